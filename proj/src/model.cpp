#include <cmath>
#include <sstream>

#include "wseg/init.hpp"
#include "wseg/model.hpp"

namespace wseg {

std::vector<EncoderStage> ModelConfig::default_encoder_spec(int t) {
    // Reference width progression; the 160-channel stage keeps stride 1 so the
    // encoder lands at output stride 16 for the decoder.
    return {{1, 16, 1, 1},  {t, 24, 2, 2}, {t, 32, 3, 2}, {t, 64, 4, 2},
            {t, 96, 3, 1},  {t, 160, 3, 1}, {t, 320, 1, 1}};
}

int ModelConfig::scaled(int channels) const {
    const double v = width_multiplier * channels;
    const long rounded = std::lround(v / 8.0) * 8;
    return static_cast<int>(std::max(8L, rounded));
}

int ModelConfig::output_stride() const {
    int os = 2;  // stem
    for (const auto& stage : encoder_block_spec) os *= stage.stride;
    return os;
}

void ModelConfig::validate() const {
    if (width_multiplier <= 0.0) throw ConfigError("width_multiplier must be positive");
    if (input_size < 1) throw ConfigError("input_size must be positive");
    if (encoder_block_spec.empty()) throw ConfigError("encoder_block_spec must not be empty");
    for (const auto& s : encoder_block_spec) {
        if (s.expansion < 1 || s.out_channels < 1 || s.repeats < 1 ||
            (s.stride != 1 && s.stride != 2)) {
            throw ConfigError("encoder stage entries must be (t>=1, c>=1, n>=1, s in {1,2})");
        }
    }
    const int os = output_stride();
    if (os % 4 != 0) throw ConfigError("encoder output stride must be a multiple of 4");
    if (input_size % os != 0) {
        throw ConfigError("encoder output stride " + std::to_string(os) +
                          " does not divide input_size " + std::to_string(input_size));
    }
    // The decoder taps the last stage that still runs at stride 4.
    int stride = 2;
    bool has_tap = false;
    for (const auto& s : encoder_block_spec) {
        stride *= s.stride;
        if (stride == 4) has_tap = true;
    }
    if (!has_tap) throw ConfigError("encoder never produces a stride-4 feature for the decoder");
    if (spp_branch_spec.empty()) throw ConfigError("spp_branch_spec must not be empty");
    for (int b : spp_branch_spec) {
        if (b < 0) throw ConfigError("spp branch entries must be >= 0");
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
        throw ConfigError("dropout_rate must be in [0, 1)");
    }
    if (first_conv_channels < 1 || spp_branch_channels < 1 || spp_out_channels < 1 ||
        low_level_channels < 1 || decoder_refine_channels < 1) {
        throw ConfigError("channel widths must be positive");
    }
    if (bn_epsilon <= 0.0f) throw ConfigError("bn_epsilon must be positive");
    if (bn_momentum <= 0.0f || bn_momentum >= 1.0f) {
        throw ConfigError("bn_momentum must be in (0, 1)");
    }
}

std::string ModelConfig::to_text() const {
    std::ostringstream os;
    os << "alpha=" << width_multiplier << "\n";
    os << "input_size=" << input_size << "\n";
    os << "expansion_ratio=" << expansion_ratio << "\n";
    os << "encoder_blocks=";
    for (std::size_t i = 0; i < encoder_block_spec.size(); ++i) {
        const auto& s = encoder_block_spec[i];
        os << (i ? "," : "") << s.expansion << ":" << s.out_channels << ":" << s.repeats << ":"
           << s.stride;
    }
    os << "\n";
    os << "spp_branches=";
    for (std::size_t i = 0; i < spp_branch_spec.size(); ++i) {
        os << (i ? "," : "") << spp_branch_spec[i];
    }
    os << "\n";
    os << "first_conv_channels=" << first_conv_channels << "\n";
    os << "spp_branch_channels=" << spp_branch_channels << "\n";
    os << "spp_out_channels=" << spp_out_channels << "\n";
    os << "low_level_channels=" << low_level_channels << "\n";
    os << "decoder_refine_channels=" << decoder_refine_channels << "\n";
    os << "dropout_rate=" << dropout_rate << "\n";
    os << "bn_epsilon=" << bn_epsilon << "\n";
    os << "bn_momentum=" << bn_momentum << "\n";
    return os.str();
}

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

ModelConfig ModelConfig::from_text(const std::string& text) {
    ModelConfig cfg;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("bad config line: " + line);
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        try {
            if (key == "alpha") {
                cfg.width_multiplier = std::stod(value);
            } else if (key == "input_size") {
                cfg.input_size = std::stoi(value);
            } else if (key == "expansion_ratio") {
                cfg.expansion_ratio = std::stoi(value);
            } else if (key == "encoder_blocks") {
                cfg.encoder_block_spec.clear();
                for (const auto& part : split_on(value, ',')) {
                    const auto f = split_on(part, ':');
                    if (f.size() != 4) throw FormatError("bad encoder stage: " + part);
                    cfg.encoder_block_spec.push_back(
                        {std::stoi(f[0]), std::stoi(f[1]), std::stoi(f[2]), std::stoi(f[3])});
                }
            } else if (key == "spp_branches") {
                cfg.spp_branch_spec.clear();
                for (const auto& part : split_on(value, ',')) {
                    cfg.spp_branch_spec.push_back(std::stoi(part));
                }
            } else if (key == "first_conv_channels") {
                cfg.first_conv_channels = std::stoi(value);
            } else if (key == "spp_branch_channels") {
                cfg.spp_branch_channels = std::stoi(value);
            } else if (key == "spp_out_channels") {
                cfg.spp_out_channels = std::stoi(value);
            } else if (key == "low_level_channels") {
                cfg.low_level_channels = std::stoi(value);
            } else if (key == "decoder_refine_channels") {
                cfg.decoder_refine_channels = std::stoi(value);
            } else if (key == "dropout_rate") {
                cfg.dropout_rate = std::stod(value);
            } else if (key == "bn_epsilon") {
                cfg.bn_epsilon = std::stof(value);
            } else if (key == "bn_momentum") {
                cfg.bn_momentum = std::stof(value);
            } else if (key == "epoch" || key == "best_val_dice") {
                // checkpoint metadata lines; handled by the checkpoint reader
            } else {
                throw FormatError("unknown config key: " + key);
            }
        } catch (const FormatError&) {
            throw;
        } catch (...) {
            throw FormatError("bad config value in line: " + line);
        }
    }
    return cfg;
}

bool ModelConfig::same_architecture(const ModelConfig& other) const {
    auto stages_equal = [](const std::vector<EncoderStage>& a,
                           const std::vector<EncoderStage>& b) {
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i].expansion != b[i].expansion || a[i].out_channels != b[i].out_channels ||
                a[i].repeats != b[i].repeats || a[i].stride != b[i].stride) {
                return false;
            }
        }
        return true;
    };
    return width_multiplier == other.width_multiplier && input_size == other.input_size &&
           stages_equal(encoder_block_spec, other.encoder_block_spec) &&
           spp_branch_spec == other.spp_branch_spec &&
           first_conv_channels == other.first_conv_channels &&
           spp_branch_channels == other.spp_branch_channels &&
           spp_out_channels == other.spp_out_channels &&
           low_level_channels == other.low_level_channels &&
           decoder_refine_channels == other.decoder_refine_channels;
}

// ------------------------------------------------------------------ model

detail::ConvBnLayer Model::make_conv_bn(int in_ch, int out_ch, int k, int stride, int dilation,
                                        bool depthwise, bool relu, const std::string& name) {
    detail::ConvBnLayer layer;
    layer.stride = stride;
    layer.padding = dilation * (k - 1) / 2;
    layer.dilation = dilation;
    layer.depthwise = depthwise;
    layer.relu = relu;

    std::vector<int> wshape;
    int fan_in;
    if (depthwise) {
        wshape = {out_ch, 1, k, k};
        fan_in = k * k;
    } else {
        wshape = {out_ch, in_ch, k, k};
        fan_in = in_ch * k * k;
    }
    layer.w = ad::make_param(nn::he_init<float>(wshape, fan_in, init_rng_.fork_seed()),
                             name + ".conv.w");
    layer.gamma = ad::make_param(Tensor::full({out_ch}, 1.0f), name + ".bn.gamma");
    layer.beta = ad::make_param(Tensor::zeros({out_ch}), name + ".bn.beta");
    layer.running_mean = Tensor::zeros({out_ch});
    layer.running_var = Tensor::full({out_ch}, 1.0f);

    params_.push_back({layer.w->name, layer.w});
    params_.push_back({layer.gamma->name, layer.gamma});
    params_.push_back({layer.beta->name, layer.beta});
    return layer;
}

ad::Var<float> Model::apply_conv_bn(ad::GradTape<float>& tape, const ad::Var<float>& x,
                                    detail::ConvBnLayer& layer) {
    ad::Var<float> y;
    if (layer.depthwise) {
        y = ad::depthwise_conv2d(tape, x, layer.w, layer.stride, layer.padding, layer.dilation);
    } else {
        y = ad::conv2d(tape, x, layer.w, nullptr, layer.stride, layer.padding, layer.dilation);
    }
    y = ad::batchnorm(tape, y, layer.gamma, layer.beta, layer.running_mean, layer.running_var,
                      config_.bn_epsilon, config_.bn_momentum, mode_);
    if (layer.relu) y = ad::relu6(tape, y);
    return y;
}

Model::Model(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      init_rng_(hash_combine(seed, 0x6d6f64656cULL)),
      dropout_rng_(hash_combine(seed, 0x64726f70ULL)) {
    config_.validate();

    const int stem_ch = config_.scaled(config_.first_conv_channels);
    stem_ = make_conv_bn(3, stem_ch, 3, 2, 1, false, true, "stem");

    int in_ch = stem_ch;
    int stride_so_far = 2;
    int block_index = 0;
    for (const auto& stage : config_.encoder_block_spec) {
        const int out_ch = config_.scaled(stage.out_channels);
        for (int rep = 0; rep < stage.repeats; ++rep) {
            const int stride = rep == 0 ? stage.stride : 1;
            std::ostringstream name;
            name << "enc" << (block_index < 10 ? "0" : "") << block_index;

            detail::InvertedResidual block;
            const int hidden = in_ch * stage.expansion;
            if (stage.expansion != 1) {
                block.expand =
                    make_conv_bn(in_ch, hidden, 1, 1, 1, false, true, name.str() + ".exp");
            }
            block.dw = make_conv_bn(hidden, hidden, 3, stride, 1, true, true, name.str() + ".dw");
            block.project =
                make_conv_bn(hidden, out_ch, 1, 1, 1, false, false, name.str() + ".proj");
            block.use_residual = stride == 1 && in_ch == out_ch;
            blocks_.push_back(std::move(block));

            stride_so_far *= stride;
            if (stride_so_far == 4) low_tap_block_ = block_index;
            in_ch = out_ch;
            ++block_index;
        }
    }
    const int enc_ch = in_ch;

    const int branch_ch = config_.scaled(config_.spp_branch_channels);
    for (std::size_t i = 0; i < config_.spp_branch_spec.size(); ++i) {
        const int scale = config_.spp_branch_spec[i];
        detail::SppBranch branch;
        branch.scale = scale;
        const std::string name = "spp" + std::to_string(i);
        if (scale > 1) {
            branch.dw = make_conv_bn(enc_ch, enc_ch, 3, 1, scale, true, true, name + ".dw");
        }
        branch.pw = make_conv_bn(enc_ch, branch_ch, 1, 1, 1, false, true, name + ".pw");
        spp_.push_back(std::move(branch));
    }
    const int spp_cat = branch_ch * static_cast<int>(spp_.size());
    const int spp_out = config_.scaled(config_.spp_out_channels);
    spp_fuse_ = make_conv_bn(spp_cat, spp_out, 1, 1, 1, false, true, "sppfuse");

    // Low-level skip projection.
    int low_ch = stem_ch;
    {
        int idx = 0;
        int cur = stem_ch;
        for (const auto& stage : config_.encoder_block_spec) {
            for (int rep = 0; rep < stage.repeats; ++rep) {
                cur = config_.scaled(stage.out_channels);
                if (idx == low_tap_block_) low_ch = cur;
                ++idx;
            }
        }
    }
    const int low_proj_ch = config_.scaled(config_.low_level_channels);
    low_proj_ = make_conv_bn(low_ch, low_proj_ch, 1, 1, 1, false, true, "lowproj");

    const int refine_ch = config_.scaled(config_.decoder_refine_channels);
    refine1_ = make_conv_bn(spp_out + low_proj_ch, refine_ch, 3, 1, 1, false, true, "refine1");
    refine2_ = make_conv_bn(refine_ch, refine_ch, 3, 1, 1, false, true, "refine2");

    head_w_ = ad::make_param(nn::he_init<float>({1, refine_ch, 1, 1}, refine_ch,
                                                init_rng_.fork_seed()),
                             "head.w");
    head_b_ = ad::make_param(Tensor::zeros({1}), "head.b");
    params_.push_back({head_w_->name, head_w_});
    params_.push_back({head_b_->name, head_b_});
}

ad::Var<float> Model::forward_taped(ad::GradTape<float>& tape, const ad::Var<float>& input) {
    const auto& s = input->value.shape;
    if (input->value.rank() != 4 || s[1] != 3 || s[2] != config_.input_size ||
        s[3] != config_.input_size) {
        throw DimensionError("model forward: expected Nx3x" + std::to_string(config_.input_size) +
                             "x" + std::to_string(config_.input_size) + " input, got " +
                             shape_str(s));
    }

    auto x = apply_conv_bn(tape, input, stem_);
    ad::Var<float> low;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        auto& block = blocks_[i];
        auto y = x;
        if (block.expand) y = apply_conv_bn(tape, y, *block.expand);
        y = apply_conv_bn(tape, y, block.dw);
        y = apply_conv_bn(tape, y, block.project);
        x = block.use_residual ? ad::add(tape, x, y) : y;
        if (static_cast<int>(i) == low_tap_block_) low = x;
    }

    // Spatial pyramid over the encoder output.
    const int enc_size = x->value.dim(2);
    ad::Var<float> cat;
    for (auto& branch : spp_) {
        ad::Var<float> b;
        if (branch.scale == 0) {
            b = ad::avg_pool(tape, x, 0);
            b = apply_conv_bn(tape, b, branch.pw);
            b = ad::bilinear_upsample(tape, b, enc_size);
        } else if (branch.scale == 1) {
            b = apply_conv_bn(tape, x, branch.pw);
        } else {
            b = apply_conv_bn(tape, x, *branch.dw);
            b = apply_conv_bn(tape, b, branch.pw);
        }
        cat = cat ? ad::concat_channels(tape, cat, b) : b;
    }
    auto fused = apply_conv_bn(tape, cat, spp_fuse_);

    auto up = ad::bilinear_upsample(tape, fused, config_.output_stride() / 4);
    auto low_p = apply_conv_bn(tape, low, low_proj_);
    auto merged = ad::concat_channels(tape, up, low_p);
    auto r = apply_conv_bn(tape, merged, refine1_);
    r = apply_conv_bn(tape, r, refine2_);
    if (mode_ == nn::BnMode::kTrain && config_.dropout_rate > 0.0) {
        r = ad::dropout(tape, r, config_.dropout_rate, dropout_rng_);
    }
    auto logits = ad::conv2d(tape, r, head_w_, head_b_, 1, 0, 1);
    auto full = ad::bilinear_upsample(tape, logits, 4);
    return ad::sigmoid(tape, full);
}

Tensor Model::forward(const Tensor& batch) {
    ad::GradTape<float> tape;
    auto out = forward_taped(tape, ad::make_input(batch));
    return out->value;
}

std::vector<NamedBuffer> Model::buffers() {
    std::vector<NamedBuffer> out;
    auto add = [&](detail::ConvBnLayer& l, const std::string& name) {
        out.push_back({name + ".bn.mean", &l.running_mean});
        out.push_back({name + ".bn.var", &l.running_var});
    };
    auto add_from_param_name = [&](detail::ConvBnLayer& l) {
        // derive "layer" from "layer.conv.w"
        const std::string& n = l.w->name;
        add(l, n.substr(0, n.size() - 7));
    };
    add_from_param_name(stem_);
    for (auto& b : blocks_) {
        if (b.expand) add_from_param_name(*b.expand);
        add_from_param_name(b.dw);
        add_from_param_name(b.project);
    }
    for (auto& s : spp_) {
        if (s.dw) add_from_param_name(*s.dw);
        add_from_param_name(s.pw);
    }
    add_from_param_name(spp_fuse_);
    add_from_param_name(low_proj_);
    add_from_param_name(refine1_);
    add_from_param_name(refine2_);
    return out;
}

std::size_t count_parameters(const std::vector<NamedParam>& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.var->value.numel();
    return n;
}

std::size_t Model::count_parameters() const { return wseg::count_parameters(params_); }

void Model::zero_grad() {
    for (auto& p : params_) {
        p.var->grad.shape.clear();
        p.var->grad.data.clear();
    }
}

std::vector<Tensor> Model::state_snapshot() const {
    std::vector<Tensor> state;
    state.reserve(params_.size());
    for (const auto& p : params_) state.push_back(p.var->value);
    for (auto& b : const_cast<Model*>(this)->buffers()) state.push_back(*b.tensor);
    return state;
}

void Model::restore_state(const std::vector<Tensor>& state) {
    auto bufs = buffers();
    if (state.size() != params_.size() + bufs.size()) {
        throw UsageError("restore_state: state size does not match model");
    }
    std::size_t i = 0;
    for (auto& p : params_) p.var->value = state[i++];
    for (auto& b : bufs) *b.tensor = state[i++];
}

std::string Model::describe() const {
    std::ostringstream os;
    os << "input: " << config_.input_size << "x" << config_.input_size
       << " rgb, output stride " << config_.output_stride() << "\n";
    os << "encoder blocks: " << blocks_.size() << ", spp branches: " << spp_.size() << "\n";
    os << "trainable parameters: " << count_parameters() << "\n";
    return os.str();
}

Model build_model(const ModelConfig& config, std::uint64_t seed) { return Model(config, seed); }

}  // namespace wseg
