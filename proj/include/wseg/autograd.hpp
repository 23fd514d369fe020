#pragma once

#include <functional>
#include <memory>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "wseg/conv.hpp"
#include "wseg/nn_ops.hpp"
#include "wseg/rng.hpp"
#include "wseg/tensor.hpp"

namespace wseg::ad {

template <typename T>
struct VarNode {
    TensorT<T> value;
    TensorT<T> grad;  // empty until a child accumulates into it
    bool requires_grad = false;
    bool is_leaf = false;
    std::string name;
    std::vector<std::shared_ptr<VarNode>> parents;
    std::function<void(VarNode&)> backward_fn;

    void ensure_grad() {
        if (grad.data.empty()) grad = TensorT<T>::zeros(value.shape);
    }
    void accumulate(const TensorT<T>& g) {
        ensure_grad();
        for (std::size_t i = 0; i < g.data.size(); ++i) grad.data[i] += g.data[i];
    }
};

template <typename T>
using Var = std::shared_ptr<VarNode<T>>;

template <typename T>
Var<T> make_param(TensorT<T> value, std::string name) {
    auto v = std::make_shared<VarNode<T>>();
    v->value = std::move(value);
    v->requires_grad = true;
    v->is_leaf = true;
    v->name = std::move(name);
    return v;
}

template <typename T>
Var<T> make_input(TensorT<T> value) {
    auto v = std::make_shared<VarNode<T>>();
    v->value = std::move(value);
    return v;
}

// Records one forward pass as a sequence of nodes in creation order (parents
// always precede children, so the record is already topologically sorted).
// backward() replays the record in reverse exactly once per tape.
template <typename T>
class GradTape {
public:
    using scalar_type = T;

    Var<T> record(TensorT<T> value, std::vector<Var<T>> parents,
                  std::function<void(VarNode<T>&)> backward_fn) {
        auto v = std::make_shared<VarNode<T>>();
        v->value = std::move(value);
        for (const auto& p : parents) {
            if (p && p->requires_grad) v->requires_grad = true;
        }
        v->parents = std::move(parents);
        if (v->requires_grad) v->backward_fn = std::move(backward_fn);
        nodes_.push_back(v);
        return v;
    }

    void backward(const Var<T>& loss) {
        if (consumed_) throw UsageError("GradTape: backward already consumed this tape");
        consumed_ = true;
        if (loss->value.numel() != 1) {
            throw UsageError("GradTape: loss must be a scalar");
        }
        loss->ensure_grad();
        loss->grad.data[0] += T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            VarNode<T>& node = **it;
            if (node.grad.data.empty() || !node.backward_fn) continue;
            node.backward_fn(node);
        }
    }

    bool consumed() const { return consumed_; }
    std::size_t size() const { return nodes_.size(); }

private:
    std::vector<Var<T>> nodes_;
    bool consumed_ = false;
};

// ------------------------------------------------------------------ ops

template <typename T>
Var<T> conv2d(GradTape<T>& tape, const Var<T>& x, const Var<T>& w,
              const std::type_identity_t<Var<T>>& bias, int stride, int padding,
              int dilation = 1) {
    nn::ConvParamsT<T> p{w->value, bias ? std::optional<TensorT<T>>(bias->value) : std::nullopt,
                         stride, padding, dilation};
    TensorT<T> y = nn::conv2d_forward(x->value, p);
    std::vector<Var<T>> parents = bias ? std::vector<Var<T>>{x, w, bias}
                                       : std::vector<Var<T>>{x, w};
    return tape.record(std::move(y), std::move(parents),
                       [x, w, bias, stride, padding, dilation](VarNode<T>& node) {
                           nn::ConvParamsT<T> pb{w->value, std::nullopt, stride, padding, dilation};
                           if (x->requires_grad) {
                               x->accumulate(
                                   nn::conv2d_backward_input(node.grad, pb, x->value.shape));
                           }
                           if (w->requires_grad) {
                               w->accumulate(nn::conv2d_backward_weights(node.grad, x->value, pb));
                           }
                           if (bias && bias->requires_grad) {
                               bias->accumulate(nn::conv2d_backward_bias(node.grad));
                           }
                       });
}

template <typename T>
Var<T> depthwise_conv2d(GradTape<T>& tape, const Var<T>& x, const Var<T>& w, int stride,
                        int padding, int dilation = 1) {
    nn::ConvParamsT<T> p{w->value, std::nullopt, stride, padding, dilation};
    TensorT<T> y = nn::depthwise_conv2d_forward(x->value, p);
    return tape.record(std::move(y), {x, w},
                       [x, w, stride, padding, dilation](VarNode<T>& node) {
                           nn::ConvParamsT<T> pb{w->value, std::nullopt, stride, padding, dilation};
                           if (x->requires_grad) {
                               x->accumulate(nn::depthwise_conv2d_backward_input(
                                   node.grad, pb, x->value.shape));
                           }
                           if (w->requires_grad) {
                               w->accumulate(
                                   nn::depthwise_conv2d_backward_weights(node.grad, x->value, pb));
                           }
                       });
}

template <typename T>
Var<T> pointwise_conv2d(GradTape<T>& tape, const Var<T>& x, const Var<T>& w,
                        const std::type_identity_t<Var<T>>& bias, int stride = 1,
                        int padding = 0) {
    if (w->value.rank() != 4 || w->value.dim(2) != 1 || w->value.dim(3) != 1) {
        throw ArgumentError("pointwise_conv2d: contract violation, kernel must be 1x1, got " +
                            shape_str(w->value.shape));
    }
    return conv2d(tape, x, w, bias, stride, padding, 1);
}

// Batch normalization over a 4-D activation. Running statistics live outside
// the graph and are updated in place during train-mode forward.
template <typename T>
Var<T> batchnorm(GradTape<T>& tape, const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                 TensorT<T>& running_mean, TensorT<T>& running_var, T epsilon, T momentum,
                 nn::BnMode mode) {
    nn::BatchNormParamsT<T> p;
    p.gamma = gamma->value;
    p.beta = beta->value;
    p.running_mean = running_mean;
    p.running_var = running_var;
    p.epsilon = epsilon;
    p.momentum = momentum;
    p.mode = mode;
    nn::BnCache<T> cache;
    TensorT<T> y = nn::batchnorm_forward(x->value, p, &cache);
    running_mean = std::move(p.running_mean);
    running_var = std::move(p.running_var);
    return tape.record(std::move(y), {x, gamma, beta},
                       [x, gamma, beta, cache, epsilon, mode](VarNode<T>& node) {
                           nn::BatchNormParamsT<T> pb;
                           pb.gamma = gamma->value;
                           pb.beta = beta->value;
                           pb.epsilon = epsilon;
                           pb.mode = mode;
                           TensorT<T> gx, ggamma, gbeta;
                           nn::batchnorm_backward(node.grad, x->value, pb, cache,
                                                  x->requires_grad ? &gx : nullptr,
                                                  gamma->requires_grad ? &ggamma : nullptr,
                                                  beta->requires_grad ? &gbeta : nullptr);
                           if (x->requires_grad) x->accumulate(gx);
                           if (gamma->requires_grad) gamma->accumulate(ggamma);
                           if (beta->requires_grad) beta->accumulate(gbeta);
                       });
}

template <typename T>
Var<T> relu6(GradTape<T>& tape, const Var<T>& x) {
    return tape.record(nn::relu6(x->value), {x}, [x](VarNode<T>& node) {
        if (x->requires_grad) x->accumulate(nn::relu6_backward(node.grad, x->value));
    });
}

template <typename T>
Var<T> sigmoid(GradTape<T>& tape, const Var<T>& x) {
    auto out = tape.record(nn::sigmoid(x->value), {x}, [x](VarNode<T>& node) {
        if (x->requires_grad) x->accumulate(nn::sigmoid_backward(node.grad, node.value));
    });
    return out;
}

template <typename T>
Var<T> bilinear_upsample(GradTape<T>& tape, const Var<T>& x, int factor) {
    return tape.record(nn::bilinear_upsample(x->value, factor), {x},
                       [x, factor](VarNode<T>& node) {
                           if (x->requires_grad) {
                               x->accumulate(nn::bilinear_upsample_backward(node.grad, factor,
                                                                            x->value.shape));
                           }
                       });
}

template <typename T>
Var<T> avg_pool(GradTape<T>& tape, const Var<T>& x, int window) {
    return tape.record(nn::avg_pool(x->value, window), {x}, [x, window](VarNode<T>& node) {
        if (x->requires_grad) {
            x->accumulate(nn::avg_pool_backward(node.grad, window, x->value.shape));
        }
    });
}

template <typename T>
Var<T> add(GradTape<T>& tape, const Var<T>& a, const Var<T>& b) {
    require_same_shape(a->value, b->value, "add");
    TensorT<T> y;
    y.shape = a->value.shape;
    y.data.resize(a->value.data.size());
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        y.data[i] = a->value.data[i] + b->value.data[i];
    }
    return tape.record(std::move(y), {a, b}, [a, b](VarNode<T>& node) {
        if (a->requires_grad) a->accumulate(node.grad);
        if (b->requires_grad) b->accumulate(node.grad);
    });
}

// Concatenate two 4-D tensors along the channel axis.
template <typename T>
Var<T> concat_channels(GradTape<T>& tape, const Var<T>& a, const Var<T>& b) {
    require_shape(a->value, 4, "concat_channels");
    require_shape(b->value, 4, "concat_channels");
    const auto& sa = a->value.shape;
    const auto& sb = b->value.shape;
    if (sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3]) {
        throw DimensionError("concat_channels: non-channel axes differ, " + shape_str(sa) +
                             " vs " + shape_str(sb));
    }
    const int n = sa[0], ca = sa[1], cb = sb[1], h = sa[2], w = sa[3];
    TensorT<T> y({n, ca + cb, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int in = 0; in < n; ++in) {
        for (int c = 0; c < ca; ++c) {
            std::copy_n(a->value.plane(in, c), plane, y.plane(in, c));
        }
        for (int c = 0; c < cb; ++c) {
            std::copy_n(b->value.plane(in, c), plane, y.plane(in, ca + c));
        }
    }
    return tape.record(std::move(y), {a, b}, [a, b, n, ca, cb, plane](VarNode<T>& node) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (int in = 0; in < n; ++in) {
                for (int c = 0; c < ca; ++c) {
                    const T* g = node.grad.plane(in, c);
                    T* dst = a->grad.plane(in, c);
                    for (std::size_t i = 0; i < plane; ++i) dst[i] += g[i];
                }
            }
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (int in = 0; in < n; ++in) {
                for (int c = 0; c < cb; ++c) {
                    const T* g = node.grad.plane(in, ca + c);
                    T* dst = b->grad.plane(in, c);
                    for (std::size_t i = 0; i < plane; ++i) dst[i] += g[i];
                }
            }
        }
    });
}

// Inverted dropout: keep probability 1-rate, kept activations scaled by
// 1/(1-rate). Mask generation draws from the caller's RNG stream.
template <typename T>
Var<T> dropout(GradTape<T>& tape, const Var<T>& x, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ArgumentError("dropout: rate must be in [0, 1)");
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    auto mask = std::make_shared<std::vector<T>>(x->value.numel());
    for (auto& m : *mask) m = rng.uniform() < rate ? T(0) : scale;
    TensorT<T> y;
    y.shape = x->value.shape;
    y.data.resize(x->value.data.size());
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = x->value.data[i] * (*mask)[i];
    return tape.record(std::move(y), {x}, [x, mask](VarNode<T>& node) {
        if (!x->requires_grad) return;
        TensorT<T> gx;
        gx.shape = node.grad.shape;
        gx.data.resize(node.grad.data.size());
        for (std::size_t i = 0; i < gx.data.size(); ++i) {
            gx.data[i] = node.grad.data[i] * (*mask)[i];
        }
        x->accumulate(gx);
    });
}

// Scalar probe sum(coeffs * x); handy for reducing a map to a loss.
template <typename T>
Var<T> weighted_sum(GradTape<T>& tape, const Var<T>& x, const TensorT<T>& coeffs) {
    require_same_shape(x->value, coeffs, "weighted_sum");
    double acc = 0.0;
    for (std::size_t i = 0; i < coeffs.data.size(); ++i) {
        acc += static_cast<double>(x->value.data[i]) * static_cast<double>(coeffs.data[i]);
    }
    TensorT<T> y({1});
    y.data[0] = static_cast<T>(acc);
    return tape.record(std::move(y), {x}, [x, coeffs](VarNode<T>& node) {
        if (!x->requires_grad) return;
        const T upstream = node.grad.data[0];
        TensorT<T> g;
        g.shape = coeffs.shape;
        g.data.resize(coeffs.data.size());
        for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = coeffs.data[i] * upstream;
        x->accumulate(g);
    });
}

template <typename T>
Var<T> bce_loss(GradTape<T>& tape, const Var<T>& pred, const TensorT<T>& target) {
    TensorT<T> loss({1});
    loss.data[0] = nn::bce_loss(pred->value, target);
    return tape.record(std::move(loss), {pred}, [pred, target](VarNode<T>& node) {
        if (!pred->requires_grad) return;
        TensorT<T> g = nn::bce_backward(pred->value, target);
        const T upstream = node.grad.data[0];
        if (upstream != T(1)) {
            for (auto& v : g.data) v *= upstream;
        }
        pred->accumulate(g);
    });
}

}  // namespace wseg::ad
