#include <algorithm>
#include <iomanip>
#include <sstream>

#include "wseg/metrics.hpp"
#include "wseg/postprocess.hpp"
#include "wseg/train.hpp"

namespace wseg {
namespace {

BinaryMask mask_from_plane(const float* prob, int height, int width) {
    BinaryMask m(width, height);
    for (std::size_t i = 0; i < m.pixels.size(); ++i) {
        m.pixels[i] = quantize_probability(prob[i]) > 127 ? 1 : 0;
    }
    return m;
}

// Stacks samples (optionally augmented) into network input/target batches.
void fill_batch(const std::vector<DataPair>& data, const std::vector<std::size_t>& order,
                std::size_t begin, std::size_t end, const TrainOptions& options, int epoch,
                Tensor& input, Tensor& target) {
    const int n = static_cast<int>(end - begin);
    const int size = data[order[begin]].image.height;
    input = Tensor({n, 3, size, size});
    target = Tensor({n, 1, size, size});
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    for (int b = 0; b < n; ++b) {
        const std::size_t idx = order[begin + static_cast<std::size_t>(b)];
        const DataPair& pair = data[idx];
        ImageRGB img;
        BinaryMask msk;
        if (options.augment_enabled) {
            AugmentSpec spec = options.augment;
            spec.seed = hash_combine(hash_combine(options.seed, static_cast<std::uint64_t>(epoch)),
                                     idx);
            auto aug = augment(pair.image, pair.mask, spec);
            img = std::move(aug.first);
            msk = std::move(aug.second);
        } else {
            img = pair.image;
            msk = pair.mask;
        }
        const Tensor x = normalize(img);
        std::copy(x.data.begin(), x.data.end(),
                  input.data.begin() + static_cast<std::ptrdiff_t>(b * 3 * plane));
        float* t = target.data.data() + static_cast<std::size_t>(b) * plane;
        for (std::size_t i = 0; i < plane; ++i) t[i] = static_cast<float>(msk.pixels[i]);
    }
}

}  // namespace

Adam::Adam(Model& model, float learning_rate) {
    slots_.reserve(model.parameters().size());
    for (const auto& p : model.parameters()) {
        slots_.push_back(nn::make_adam_state<float>(p.var->value.shape, learning_rate));
    }
}

void Adam::step(Model& model) {
    const auto& params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& var = *params[i].var;
        if (var.grad.data.empty()) {
            var.ensure_grad();  // unused parameter: zero gradient, step still counts
        }
        nn::adam_step(var.value, var.grad, slots_[i]);
    }
    model.zero_grad();
}

double dice_of_probability_plane(const float* prob, const BinaryMask& gt) {
    return dice(confusion_counts(mask_from_plane(prob, gt.height, gt.width), gt));
}

EpochStats train_epoch(Model& model, const std::vector<DataPair>& train, Adam& optimizer,
                       const TrainOptions& options, int epoch) {
    if (train.empty()) throw ArgumentError("train_epoch: empty dataset");
    model.set_mode(nn::BnMode::kTrain);

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(hash_combine(options.seed, 0xe70c000ULL + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1],
                  order[static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<int>(i) - 1))]);
    }

    double loss_sum = 0.0;
    double dice_sum = 0.0;
    std::size_t seen = 0;
    const std::size_t batch = static_cast<std::size_t>(std::max(1, options.batch_size));
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
        const std::size_t end = std::min(order.size(), begin + batch);
        // A trailing singleton batch would give batch norm a single value per
        // channel after global pooling; skip it when batching was requested.
        if (end - begin == 1 && batch > 1) break;
        Tensor input, target;
        fill_batch(train, order, begin, end, options, epoch, input, target);

        ad::GradTape<float> tape;
        auto out = model.forward_taped(tape, ad::make_input(input));
        auto loss = ad::bce_loss(tape, out, target);
        tape.backward(loss);
        optimizer.step(model);

        const int n = static_cast<int>(end - begin);
        seen += static_cast<std::size_t>(n);
        loss_sum += static_cast<double>(loss->value.data[0]) * n;
        const int size = out->value.dim(2);
        const std::size_t plane = static_cast<std::size_t>(size) * size;
        for (int b = 0; b < n; ++b) {
            BinaryMask gt(size, size);
            const float* t = target.data.data() + static_cast<std::size_t>(b) * plane;
            for (std::size_t i = 0; i < plane; ++i) gt.pixels[i] = t[i] > 0.5f ? 1 : 0;
            dice_sum += dice_of_probability_plane(out->value.plane(b, 0), gt);
        }
    }
    return {loss_sum / static_cast<double>(seen), dice_sum / static_cast<double>(seen)};
}

SplitMetrics evaluate_split(Model& model, const std::vector<DataPair>& split) {
    if (split.empty()) throw ArgumentError("evaluate_split: empty split");
    const nn::BnMode prev = model.mode();
    model.set_mode(nn::BnMode::kInference);
    double p_sum = 0.0, r_sum = 0.0, d_sum = 0.0;
    for (const auto& pair : split) {
        const Tensor out = model.forward(normalize(pair.image));
        const BinaryMask pred = mask_from_plane(out.plane(0, 0), pair.mask.height,
                                                pair.mask.width);
        const ConfusionCounts c = confusion_counts(pred, pair.mask);
        p_sum += precision(c);
        r_sum += recall(c);
        d_sum += dice(c);
    }
    model.set_mode(prev);
    const double n = static_cast<double>(split.size());
    return {p_sum / n, r_sum / n, d_sum / n};
}

FitResult fit(Model& model, const std::vector<DataPair>& train, const std::vector<DataPair>& val,
              const TrainOptions& options) {
    if (train.empty()) throw ArgumentError("fit: empty training set");
    if (val.empty()) throw ArgumentError("fit: empty validation set");

    Adam optimizer(model, options.learning_rate);
    EarlyStopper stopper{options.patience};

    FitResult result;
    std::vector<Tensor> best_state = model.state_snapshot();
    for (int epoch = 1; epoch <= options.max_epochs; ++epoch) {
        const EpochStats stats = train_epoch(model, train, optimizer, options, epoch);
        const SplitMetrics vm = evaluate_split(model, val);
        result.log.push_back(
            {epoch, stats.loss, stats.train_dice, vm.precision, vm.recall, vm.dice});
        result.epochs_run = epoch;
        if (options.on_epoch) options.on_epoch(result.log.back());

        const bool improved = vm.dice > stopper.best_metric;
        const bool stop = stopper.observe(vm.dice);
        if (improved) {
            best_state = model.state_snapshot();
            result.best_epoch = epoch;
            result.best_val_dice = vm.dice;
        }
        if (stop) {
            result.early_stopped = true;
            break;
        }
    }
    model.restore_state(best_state);
    return result;
}

std::string training_log_header() { return "epoch,loss,train_dice,val_precision,val_recall,val_dice\n"; }

std::string training_log_row(const TrainLogRow& r) {
    std::ostringstream os;
    os << std::setprecision(9) << std::fixed;
    os << r.epoch << "," << r.loss << "," << r.train_dice << "," << r.val_precision << ","
       << r.val_recall << "," << r.val_dice << "\n";
    return os.str();
}

std::string training_log_csv(const std::vector<TrainLogRow>& rows) {
    std::string out = training_log_header();
    for (const auto& r : rows) out += training_log_row(r);
    return out;
}

}  // namespace wseg
