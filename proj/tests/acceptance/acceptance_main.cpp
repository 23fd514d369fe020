// Acceptance suite: runs every release criterion end to end and prints one
// PASS/FAIL line per criterion. Exits non-zero if any criterion fails.
//
// Criteria 1, 2, 7 and 9 drive the command-line binary (WSEG_CLI_PATH);
// the rest exercise the library against independent oracles.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "../gradcheck.hpp"
#include "../oracles.hpp"
#include "wseg/checkpoint.hpp"
#include "wseg/dataset.hpp"
#include "wseg/imaging.hpp"
#include "wseg/metrics.hpp"
#include "wseg/model.hpp"
#include "wseg/postprocess.hpp"
#include "wseg/synthgen.hpp"
#include "wseg/train.hpp"

namespace fs = std::filesystem;
using namespace wseg;

namespace {

struct CriterionResult {
    int id;
    bool pass;
    std::string note;
};

std::vector<CriterionResult> g_results;

void report(int id, bool pass, const std::string& note) {
    g_results.push_back({id, pass, note});
    std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << id << ": " << note << std::endl;
}

const fs::path kWork = [] {
    auto dir = fs::temp_directory_path() / "wseg_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}();

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd =
        std::string(WSEG_CLI_PATH) + " " + args + " >> " + log.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

TensorT<double> rand_d(std::vector<int> shape, std::uint64_t seed, double lo = -1.0,
                       double hi = 1.0) {
    Rng rng(seed);
    TensorT<double> t(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

TensorT<double> rand_binary(std::vector<int> shape, std::uint64_t seed) {
    Rng rng(seed);
    TensorT<double> t(std::move(shape));
    for (auto& v : t.data) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    return t;
}

BinaryMask random_mask(int w, int h, std::uint64_t seed, double density) {
    Rng rng(seed);
    BinaryMask m(w, h);
    for (auto& p : m.pixels) p = rng.bernoulli(density) ? 1 : 0;
    return m;
}

// ----------------------------------------------------------------- 1 and 2

struct PipelineArtifacts {
    fs::path dataset = kWork / "c1_data";
    fs::path run = kWork / "c1_run";
    fs::path val_images = kWork / "c1_val_images";
    fs::path val_masks = kWork / "c1_val_masks";
    fs::path pred_raw = kWork / "c1_pred_raw";
    fs::path pred_post = kWork / "c1_pred_post";
    double raw_dice = 0.0;
    double post_dice = 0.0;
    double log_best_dice = 0.0;
    bool ok = false;
};

double mean_dice_of_dirs(const fs::path& pred_dir, const fs::path& gt_dir) {
    std::vector<EvalPair> pairs;
    for (const auto& entry : fs::directory_iterator(pred_dir)) {
        if (!entry.is_regular_file()) continue;
        pairs.push_back({entry.path().stem().string(),
                         threshold_mask(decode_gray(entry.path())),
                         threshold_mask(decode_gray(gt_dir / entry.path().filename()))});
    }
    return evaluate_dataset(std::move(pairs)).mean_dice;
}

PipelineArtifacts run_criterion1_pipeline() {
    PipelineArtifacts art;
    const fs::path log = kWork / "c1_cli.log";

    if (run_cli("synth --out " + art.dataset.string() + " --n 250 --size 64 --seed 42", log) !=
        0) {
        return art;
    }
    const std::string train_cmd = "train --data " + art.dataset.string() + " --out " +
                                  art.run.string() +
                                  " --alpha 0.25 --input-size 64 --batch 2 --lr 1e-4"
                                  " --max-epochs 300 --patience 30 --seed 42";
    if (run_cli(train_cmd, log) != 0) return art;

    // held-out split
    fs::create_directories(art.val_images);
    fs::create_directories(art.val_masks);
    for (const auto& row : read_manifest(art.dataset / "manifest.csv")) {
        if (row.split != "val") continue;
        fs::copy_file(art.dataset / row.image,
                      art.val_images / fs::path(row.image).filename());
        fs::copy_file(art.dataset / row.mask, art.val_masks / fs::path(row.mask).filename());
    }

    const std::string ckpt = (art.run / "checkpoint.wseg").string();
    if (run_cli("predict --checkpoint " + ckpt + " --images " + art.val_images.string() +
                    " --out " + art.pred_raw.string() + " --no-postprocess",
                log) != 0) {
        return art;
    }
    if (run_cli("predict --checkpoint " + ckpt + " --images " + art.val_images.string() +
                    " --out " + art.pred_post.string(),
                log) != 0) {
        return art;
    }

    art.raw_dice = mean_dice_of_dirs(art.pred_raw / "masks", art.val_masks);
    art.post_dice = mean_dice_of_dirs(art.pred_post / "masks", art.val_masks);

    // best val dice recorded in the training log
    std::istringstream is(slurp(art.run / "training_log.csv"));
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        const auto f = split_csv_line(line);
        if (f.size() >= 6) art.log_best_dice = std::max(art.log_best_dice, std::stod(f[5]));
    }
    art.ok = true;
    return art;
}

void criterion_1_and_2() {
    const auto t0 = std::chrono::steady_clock::now();
    const PipelineArtifacts art = run_criterion1_pipeline();
    const double minutes =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;

    if (!art.ok) {
        report(1, false, "pipeline commands failed; see " + (kWork / "c1_cli.log").string());
        report(2, false, "pipeline commands failed");
        return;
    }

    std::ostringstream note1;
    note1 << "synthetic end-to-end: held-out mean dice " << art.raw_dice << " (>= 0.90), "
          << std::fixed << std::setprecision(1) << minutes << " min";
    const bool consistent = std::abs(art.raw_dice - art.log_best_dice) <= 1e-6;
    if (!consistent) {
        note1 << " [log best " << art.log_best_dice << " != predict path]";
    }
    report(1, art.raw_dice >= 0.90 && consistent, note1.str());

    std::ostringstream note2;
    note2 << "post-processing non-degradation: dice " << art.post_dice << " vs raw "
          << art.raw_dice << " (>= raw - 0.005)";
    report(2, art.post_dice >= art.raw_dice - 0.005, note2.str());
}

// ----------------------------------------------------------------- 3

void criterion_3() {
    constexpr double kFloatH = 1e-3, kFloatTol = 1e-3;
    constexpr double kDoubleH = 1e-5, kDoubleTol = 1e-6;
    int checked = 0;
    double worst32 = 0.0, worst64 = 0.0;
    std::string worst_layer;
    bool pass = true;

    auto run_case = [&](const char* layer, const std::vector<TensorT<double>>& leaves,
                        auto&& build) {
        const auto f32 = gradcheck::check<float>(leaves, build, kFloatH, kFloatTol);
        const auto f64 = gradcheck::check<double>(leaves, build, kDoubleH, kDoubleTol);
        if (f32.max_rel_err > worst32) {
            worst32 = f32.max_rel_err;
            worst_layer = layer;
        }
        worst64 = std::max(worst64, f64.max_rel_err);
        if (!f32.ok || !f64.ok) {
            pass = false;
            std::cout << "  gradient check failed for " << layer << ": float32 err "
                      << f32.max_rel_err << ", float64 err " << f64.max_rel_err << std::endl;
        }
        ++checked;
    };

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        {  // standard conv
            const int stride = 1 + static_cast<int>(seed % 2);
            const int pad = static_cast<int>(seed % 2);
            const int oh = nn::conv_out_dim(4, 3, stride, pad, 1);
            const auto probe = rand_d({1, 2, oh, oh}, seed + 5000);
            run_case("conv2d",
                     {rand_d({1, 3, 4, 4}, seed * 3 + 1), rand_d({2, 3, 3, 3}, seed * 3 + 2),
                      rand_d({2}, seed * 3 + 3)},
                     [=](auto& tape, const auto& leaves) {
                         using T = typename std::decay_t<decltype(tape)>::scalar_type;
                         auto y = ad::conv2d(tape, leaves[0], leaves[1], leaves[2], stride, pad);
                         return ad::weighted_sum(tape, y, probe.template cast<T>());
                     });
        }
        {  // depthwise conv
            const int stride = 1 + static_cast<int>(seed % 2);
            const int oh = nn::conv_out_dim(5, 3, stride, 1, 1);
            const auto probe = rand_d({1, 3, oh, oh}, seed + 6000);
            run_case("depthwise_conv2d",
                     {rand_d({1, 3, 5, 5}, seed * 5 + 1), rand_d({3, 1, 3, 3}, seed * 5 + 2)},
                     [=](auto& tape, const auto& leaves) {
                         using T = typename std::decay_t<decltype(tape)>::scalar_type;
                         auto y = ad::depthwise_conv2d(tape, leaves[0], leaves[1], stride, 1);
                         return ad::weighted_sum(tape, y, probe.template cast<T>());
                     });
        }
        {  // pointwise conv
            const auto probe = rand_d({2, 3, 3, 3}, seed + 7000);
            run_case("pointwise_conv2d",
                     {rand_d({2, 4, 3, 3}, seed * 7 + 1), rand_d({3, 4, 1, 1}, seed * 7 + 2),
                      rand_d({3}, seed * 7 + 3)},
                     [=](auto& tape, const auto& leaves) {
                         using T = typename std::decay_t<decltype(tape)>::scalar_type;
                         auto y = ad::pointwise_conv2d(tape, leaves[0], leaves[1], leaves[2]);
                         return ad::weighted_sum(tape, y, probe.template cast<T>());
                     });
        }
        {  // batch norm, train mode
            const auto probe = rand_d({2, 3, 4, 4}, seed + 8000);
            run_case("batchnorm",
                     {rand_d({2, 3, 4, 4}, seed * 11 + 1), rand_d({3}, seed * 11 + 2, 0.5, 1.5),
                      rand_d({3}, seed * 11 + 3)},
                     [=](auto& tape, const auto& leaves) {
                         using T = typename std::decay_t<decltype(tape)>::scalar_type;
                         TensorT<T> rmean = TensorT<T>::zeros({3});
                         TensorT<T> rvar = TensorT<T>::full({3}, T(1));
                         auto y = ad::batchnorm(tape, leaves[0], leaves[1], leaves[2], rmean,
                                                rvar, T(1e-5), T(0.1), nn::BnMode::kTrain);
                         return ad::weighted_sum(tape, y, probe.template cast<T>());
                     });
        }
        {  // relu6 away from kinks
            auto x = rand_d({1, 2, 4, 4}, seed + 13, -3.0, 9.0);
            for (auto& v : x.data) v = gradcheck::away_from_kinks(v);
            const auto probe = rand_d({1, 2, 4, 4}, seed + 9000);
            run_case("relu6", {x}, [=](auto& tape, const auto& leaves) {
                using T = typename std::decay_t<decltype(tape)>::scalar_type;
                return ad::weighted_sum(tape, ad::relu6(tape, leaves[0]),
                                        probe.template cast<T>());
            });
        }
        {  // bilinear upsample
            const int factor = 2 + static_cast<int>(seed % 3);
            const auto probe = rand_d({1, 2, 3 * factor, 3 * factor}, seed + 10000);
            run_case("bilinear_upsample", {rand_d({1, 2, 3, 3}, seed * 13 + 1)},
                     [=](auto& tape, const auto& leaves) {
                         using T = typename std::decay_t<decltype(tape)>::scalar_type;
                         return ad::weighted_sum(
                             tape, ad::bilinear_upsample(tape, leaves[0], factor),
                             probe.template cast<T>());
                     });
        }
        {  // sigmoid + bce
            const auto target = rand_binary({1, 1, 3, 3}, seed + 12000);
            run_case("sigmoid+bce", {rand_d({1, 1, 3, 3}, seed * 19 + 1, -2.0, 2.0)},
                     [=](auto& tape, const auto& leaves) {
                         using T = typename std::decay_t<decltype(tape)>::scalar_type;
                         return ad::bce_loss(tape, ad::sigmoid(tape, leaves[0]),
                                             target.template cast<T>());
                     });
        }
    }

    std::ostringstream note;
    note << "gradient checks: " << checked << " instances over 7 layer types, worst float32 err "
         << worst32 << " (< 1e-3), worst float64 err " << worst64 << " (< 1e-6)";
    report(3, pass, note.str());
}

// ----------------------------------------------------------------- 4

void criterion_4() {
    bool pass = true;
    float worst = 0.0f;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed + 40000);
        const int c = rng.uniform_int(1, 6);
        const int oc = rng.uniform_int(1, 8);
        const int k = rng.bernoulli(0.5) ? 3 : 5;
        const int stride = rng.uniform_int(1, 2);
        const int size = rng.uniform_int(k + 2, 10);
        const int pad = k / 2;

        TensorT<float> x({1, c, size, size});
        for (auto& v : x.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        TensorT<float> dw({c, 1, k, k});
        for (auto& v : dw.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        TensorT<float> pw({oc, c, 1, 1});
        for (auto& v : pw.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));

        const nn::ConvParamsT<float> dwp{dw, std::nullopt, stride, pad, 1};
        const nn::ConvParamsT<float> pwp{pw, std::nullopt, 1, 0, 1};
        const Tensor got =
            nn::pointwise_conv2d_forward(nn::depthwise_conv2d_forward(x, dwp), pwp);

        Tensor full({oc, c, k, k});
        for (int o = 0; o < oc; ++o) {
            for (int i = 0; i < c; ++i) {
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        full.at4(o, i, ky, kx) = pw.at4(o, i, 0, 0) * dw.at4(i, 0, ky, kx);
                    }
                }
            }
        }
        const nn::ConvParamsT<float> fullp{full, std::nullopt, stride, pad, 1};
        const Tensor want = nn::conv2d_forward(x, fullp);
        for (std::size_t i = 0; i < got.data.size(); ++i) {
            worst = std::max(worst, std::abs(got.data[i] - want.data[i]));
        }

        // exact rational identity for the counted MACs at stride 1
        const auto dmacs = nn::depthwise_conv2d_macs(1, c, size, size, k, 1, pad);
        const auto pmacs = nn::pointwise_conv2d_macs(1, c, size, size, oc);
        const auto fmacs = nn::conv2d_macs(1, c, size, size, oc, k, 1, pad);
        if ((dmacs + pmacs) * static_cast<std::uint64_t>(oc) * k * k !=
            fmacs * static_cast<std::uint64_t>(k * k + oc)) {
            pass = false;
        }
    }
    pass = pass && worst < 1e-5f;
    std::ostringstream note;
    note << "separable factorization: 100 instances, max abs error " << worst
         << " (< 1e-5); MAC ratio == 1/out_ch + 1/k^2 exactly";
    report(4, pass, note.str());
}

// ----------------------------------------------------------------- 5

void criterion_5() {
    bool pass = true;
    for (std::uint64_t seed = 0; seed < 1000 && pass; ++seed) {
        const double density = 0.15 + 0.7 * ((seed % 11) / 10.0);
        const BinaryMask m = random_mask(32, 32, seed + 50000, density);
        for (int conn : {4, 8}) {
            const LabelMap got = label_components(m, conn);
            const auto want = oracle::flood_fill_labels(m, conn);
            std::map<std::int32_t, std::int32_t> fwd, bwd;
            for (std::size_t i = 0; i < got.labels.size() && pass; ++i) {
                const auto a = got.labels[i], b = want[i];
                if ((a == 0) != (b == 0)) pass = false;
                if (a == 0) continue;
                auto [it1, f1] = fwd.emplace(a, b);
                if (!f1 && it1->second != b) pass = false;
                auto [it2, f2] = bwd.emplace(b, a);
                if (!f2 && it2->second != a) pass = false;
            }
        }
    }
    report(5, pass,
           "connected components match the flood-fill oracle on 1000 random 32x32 masks, "
           "4- and 8-connectivity");
}

// ----------------------------------------------------------------- 6

void criterion_6() {
    bool pass = true;
    for (std::uint64_t seed = 0; seed < 500 && pass; ++seed) {
        const BinaryMask pred = random_mask(16, 16, seed * 2 + 60000, 0.5);
        const BinaryMask gt = random_mask(16, 16, seed * 2 + 60001, 0.5);
        const ConfusionCounts got = confusion_counts(pred, gt);
        const ConfusionCounts want = oracle::pixel_loop_counts(pred, gt);
        if (got.tp != want.tp || got.fp != want.fp || got.fn != want.fn || got.tn != want.tn) {
            pass = false;
        }
        const double p = precision(got), r = recall(got), d = dice(got);
        const double p2 = want.tp + want.fp == 0
                              ? (want.fn == 0 ? 1.0 : 0.0)
                              : static_cast<double>(want.tp) / static_cast<double>(want.tp + want.fp);
        const double r2 = want.tp + want.fn == 0
                              ? (want.fp == 0 ? 1.0 : 0.0)
                              : static_cast<double>(want.tp) / static_cast<double>(want.tp + want.fn);
        const double d2 = want.tp + want.fp + want.fn == 0
                              ? 1.0
                              : 2.0 * static_cast<double>(want.tp) /
                                    static_cast<double>(2 * want.tp + want.fp + want.fn);
        if (p != p2 || r != r2 || d != d2) pass = false;
        if (p > 0.0 && r > 0.0 && std::abs(d - 2.0 * p * r / (p + r)) > 1e-12) pass = false;
    }
    report(6, pass,
           "confusion counts and metric formulas match the pixel-loop oracle on 500 random "
           "16x16 pairs; dice == harmonic mean of precision and recall");
}

// ----------------------------------------------------------------- 7

void criterion_7() {
    Model model((ModelConfig()), 1);
    const double count = static_cast<double>(model.count_parameters());
    constexpr double target = 2141505.0;
    bool pass = count >= 0.85 * target && count <= 1.15 * target;

    // the count must also be printed by `train` / `train --describe`
    const fs::path log = kWork / "c7_describe.log";
    bool printed = false;
    if (run_cli("train --describe", log) == 0) {
        const std::string text = slurp(log);
        printed = text.find("trainable parameters: " +
                            std::to_string(model.count_parameters())) != std::string::npos;
    }
    pass = pass && printed;

    std::ostringstream note;
    note << "default model has " << static_cast<std::size_t>(count)
         << " trainable parameters (reference 2141505, deviation "
         << std::fixed << std::setprecision(2) << (count / target - 1.0) * 100.0
         << "%, within +/-15%); printed by --describe: " << (printed ? "yes" : "no");
    report(7, pass, note.str());
}

// ----------------------------------------------------------------- 8

void criterion_8() {
    bool pass = true;

    // constructed streams: peak at p, flat afterwards; with patience 100 the
    // stop lands exactly at p + 101
    for (std::uint64_t seed = 0; seed < 50 && pass; ++seed) {
        Rng rng(seed + 80000);
        const int peak = rng.uniform_int(1, 40);
        EarlyStopper s{100};
        int stop_epoch = -1;
        for (int epoch = 1; epoch <= peak + 150; ++epoch) {
            const double metric = epoch <= peak ? epoch * 0.01 : peak * 0.01;
            if (s.observe(metric)) {
                stop_epoch = epoch;
                break;
            }
        }
        if (stop_epoch != peak + 101) pass = false;
    }

    // random streams against an independent simulation
    for (std::uint64_t seed = 0; seed < 100 && pass; ++seed) {
        Rng rng(seed + 81000);
        const int patience = 100;
        const int len = rng.uniform_int(50, 400);
        std::vector<double> stream;
        for (int i = 0; i < len; ++i) stream.push_back(rng.uniform(0.0, 1.0));

        int want_stop = -1;
        double best = -1.0;
        int since = 0;
        for (int i = 0; i < len; ++i) {
            if (stream[static_cast<std::size_t>(i)] > best) {
                best = stream[static_cast<std::size_t>(i)];
                since = 0;
            } else if (++since > patience) {
                want_stop = i + 1;
                break;
            }
        }
        EarlyStopper s{patience};
        int got_stop = -1;
        for (int i = 0; i < len; ++i) {
            if (s.observe(stream[static_cast<std::size_t>(i)])) {
                got_stop = i + 1;
                break;
            }
        }
        if (got_stop != want_stop) pass = false;
    }
    report(8, pass,
           "early stopping fires exactly after 100 non-improving epochs (50 constructed + 100 "
           "random streams)");
}

// ----------------------------------------------------------------- 9

void criterion_9() {
    // Two single-threaded runs of the criterion-1 pipeline with identical
    // seeds. The epoch budget is capped to keep the suite's runtime sane;
    // determinism does not depend on how long the schedule runs.
    const fs::path log = kWork / "c9_cli.log";
    const std::string data = (kWork / "c1_data").string();  // reuse criterion-1 dataset
    bool pass = fs::exists(kWork / "c1_data" / "manifest.csv");

    std::vector<fs::path> runs;
    for (int i = 0; i < 2 && pass; ++i) {
        const fs::path run = kWork / ("c9_run" + std::to_string(i));
        const fs::path pred = kWork / ("c9_pred" + std::to_string(i));
        const std::string train_cmd = "train --data " + data + " --out " + run.string() +
                                      " --alpha 0.25 --input-size 64 --batch 2 --lr 1e-4"
                                      " --max-epochs 6 --patience 30 --seed 42 --threads 1";
        if (run_cli(train_cmd, log) != 0) pass = false;
        if (pass && run_cli("predict --checkpoint " + (run / "checkpoint.wseg").string() +
                                " --images " + (kWork / "c1_val_images").string() + " --out " +
                                pred.string() + " --threads 1",
                            log) != 0) {
            pass = false;
        }
        runs.push_back(run);
        if (pass) runs.push_back(pred);
    }

    if (pass) {
        pass = slurp(kWork / "c9_run0" / "checkpoint.wseg") ==
                   slurp(kWork / "c9_run1" / "checkpoint.wseg") &&
               slurp(kWork / "c9_run0" / "training_log.csv") ==
                   slurp(kWork / "c9_run1" / "training_log.csv");
        if (pass) {
            for (const auto& entry : fs::directory_iterator(kWork / "c9_pred0" / "masks")) {
                if (slurp(entry.path()) !=
                    slurp(kWork / "c9_pred1" / "masks" / entry.path().filename())) {
                    pass = false;
                    break;
                }
            }
        }
    }
    report(9, pass,
           "two single-threaded pipeline runs with identical seeds produce bitwise-identical "
           "checkpoints, logs and masks");
}

// ----------------------------------------------------------------- 10

void criterion_10() {
    BinaryMask clean(32, 32);
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            const int dx = x - 14, dy = y - 14;
            if (dx * dx + dy * dy <= 64) clean.at(x, y) = 1;
        }
    }
    BinaryMask raw = clean;
    for (int y = 13; y <= 15; ++y) {
        for (int x = 13; x <= 15; ++x) raw.at(x, y) = 0;  // 9-pixel interior hole
    }
    raw.at(28, 28) = raw.at(29, 28) = raw.at(28, 29) = raw.at(29, 29) = 1;  // 4-pixel speck

    Tensor prob({1, 1, 32, 32});
    for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
        prob.data[i] = raw.pixels[i] ? 0.92f : 0.06f;
    }
    const BinaryMask out = postprocess(prob, {});
    const bool pass = out.pixels == clean.pixels;
    report(10, pass,
           "raw mask with a sub-threshold interior hole and distant speck maps exactly to the "
           "clean target");
}

}  // namespace

int main() {
    std::cout << "wseg acceptance suite (work dir: " << kWork.string() << ")" << std::endl;

    criterion_1_and_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();

    int failures = 0;
    std::cout << "\nsummary:\n";
    for (const auto& r : g_results) {
        std::cout << (r.pass ? "  PASS  criterion " : "  FAIL  criterion ") << r.id << "\n";
        failures += r.pass ? 0 : 1;
    }
    std::cout << (failures == 0 ? "all criteria passed\n"
                                : std::to_string(failures) + " criteria failed\n");
    return failures == 0 ? 0 : 1;
}
