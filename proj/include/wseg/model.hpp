#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wseg/autograd.hpp"
#include "wseg/rng.hpp"
#include "wseg/tensor.hpp"

namespace wseg {

struct EncoderStage {
    int expansion = 6;   // bottleneck expansion factor t
    int out_channels = 0;
    int repeats = 1;
    int stride = 1;
};

// Architecture hyperparameters. Channel widths are scaled by the width
// multiplier and rounded to the nearest multiple of 8 (floor 8).
struct ModelConfig {
    double width_multiplier = 1.0;
    int input_size = 224;
    int expansion_ratio = 6;
    std::vector<EncoderStage> encoder_block_spec;
    // Per branch: 1 = 1x1 conv, d > 1 = 3x3 depthwise at dilation d followed by
    // a 1x1 conv, 0 = global average pooling branch.
    std::vector<int> spp_branch_spec = {1, 2, 4, 0};
    int first_conv_channels = 32;
    int spp_branch_channels = 64;
    int spp_out_channels = 256;
    int low_level_channels = 48;
    int decoder_refine_channels = 48;
    double dropout_rate = 0.1;
    float bn_epsilon = 1e-5f;
    float bn_momentum = 0.1f;

    ModelConfig() : encoder_block_spec(default_encoder_spec(expansion_ratio)) {}

    static std::vector<EncoderStage> default_encoder_spec(int t);

    int scaled(int channels) const;
    int output_stride() const;
    void validate() const;

    std::string to_text() const;
    static ModelConfig from_text(const std::string& text);
    bool same_architecture(const ModelConfig& other) const;
};

namespace detail {

// Convolution + batch norm + optional ReLU6, the building unit of the network.
struct ConvBnLayer {
    ad::Var<float> w;
    ad::Var<float> gamma, beta;
    Tensor running_mean, running_var;
    int stride = 1;
    int padding = 0;
    int dilation = 1;
    bool depthwise = false;
    bool relu = true;
};

// MobileNet-style bottleneck: expand 1x1 -> depthwise 3x3 -> project 1x1, with
// a skip connection when the block keeps stride and channel count.
struct InvertedResidual {
    std::optional<ConvBnLayer> expand;
    ConvBnLayer dw;
    ConvBnLayer project;
    bool use_residual = false;
};

struct SppBranch {
    int scale = 1;  // mirrors spp_branch_spec entries
    std::optional<ConvBnLayer> dw;
    ConvBnLayer pw;
};

}  // namespace detail

struct NamedParam {
    std::string name;
    ad::Var<float> var;
};

struct NamedBuffer {
    std::string name;
    Tensor* tensor;
};

// Encoder-decoder segmentation network over 3-channel inputs, emitting a
// single-channel probability map at input resolution.
class Model {
public:
    Model(ModelConfig config, std::uint64_t seed);

    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;
    Model(Model&&) = default;
    Model& operator=(Model&&) = default;

    const ModelConfig& config() const { return config_; }

    void set_mode(nn::BnMode mode) { mode_ = mode; }
    nn::BnMode mode() const { return mode_; }

    // Graph-building forward; honors the current mode for batch norm and
    // dropout. Input must be N x 3 x S x S for S = config input_size.
    ad::Var<float> forward_taped(ad::GradTape<float>& tape, const ad::Var<float>& input);

    // Convenience forward that discards the graph.
    Tensor forward(const Tensor& batch);

    const std::vector<NamedParam>& parameters() const { return params_; }
    std::vector<NamedBuffer> buffers();
    std::size_t count_parameters() const;
    void zero_grad();

    // Full mutable state (parameters then buffers, in registry order).
    std::vector<Tensor> state_snapshot() const;
    void restore_state(const std::vector<Tensor>& state);

    Rng& dropout_rng() { return dropout_rng_; }

    std::string describe() const;

private:
    detail::ConvBnLayer make_conv_bn(int in_ch, int out_ch, int k, int stride, int dilation,
                                     bool depthwise, bool relu, const std::string& name);
    ad::Var<float> apply_conv_bn(ad::GradTape<float>& tape, const ad::Var<float>& x,
                                 detail::ConvBnLayer& layer);

    ModelConfig config_;
    nn::BnMode mode_ = nn::BnMode::kTrain;
    Rng init_rng_;
    Rng dropout_rng_;

    detail::ConvBnLayer stem_;
    std::vector<detail::InvertedResidual> blocks_;
    int low_tap_block_ = -1;  // block index whose output feeds the decoder skip
    std::vector<detail::SppBranch> spp_;
    detail::ConvBnLayer spp_fuse_;
    detail::ConvBnLayer low_proj_;
    detail::ConvBnLayer refine1_, refine2_;
    ad::Var<float> head_w_, head_b_;

    std::vector<NamedParam> params_;
};

// Counting rule shared with the tests: trainable tensors only.
std::size_t count_parameters(const std::vector<NamedParam>& params);

Model build_model(const ModelConfig& config, std::uint64_t seed);

}  // namespace wseg
