#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "wseg/tensor.hpp"
#include "wseg/threading.hpp"

namespace wseg::nn {

// ---------------------------------------------------------------- relu6

template <typename T>
TensorT<T> relu6(const TensorT<T>& x) {
    TensorT<T> y;
    y.shape = x.shape;
    y.data.resize(x.data.size());
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        y.data[i] = std::min(std::max(x.data[i], T(0)), T(6));
    }
    return y;
}

// Subgradient: 1 strictly inside (0, 6), 0 elsewhere (including the kinks).
template <typename T>
TensorT<T> relu6_backward(const TensorT<T>& gout, const TensorT<T>& x) {
    TensorT<T> gx;
    gx.shape = x.shape;
    gx.data.resize(x.data.size());
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        gx.data[i] = (x.data[i] > T(0) && x.data[i] < T(6)) ? gout.data[i] : T(0);
    }
    return gx;
}

// ---------------------------------------------------------------- sigmoid

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x) {
    TensorT<T> y;
    y.shape = x.shape;
    y.data.resize(x.data.size());
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const T v = x.data[i];
        if (v >= T(0)) {
            y.data[i] = T(1) / (T(1) + std::exp(-v));
        } else {
            const T e = std::exp(v);
            y.data[i] = e / (T(1) + e);
        }
    }
    return y;
}

template <typename T>
TensorT<T> sigmoid_backward(const TensorT<T>& gout, const TensorT<T>& y) {
    TensorT<T> gx;
    gx.shape = y.shape;
    gx.data.resize(y.data.size());
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        gx.data[i] = gout.data[i] * y.data[i] * (T(1) - y.data[i]);
    }
    return gx;
}

// ---------------------------------------------------------------- binary cross entropy

inline constexpr double kBceEps = 1e-7;

// Mean over elements of -[y ln p + (1-y) ln(1-p)], probabilities clamped to
// [1e-7, 1-1e-7]. The sum is accumulated in double.
template <typename T>
T bce_loss(const TensorT<T>& pred, const TensorT<T>& target) {
    require_same_shape(pred, target, "bce_loss");
    const T lo = T(kBceEps), hi = T(1) - T(kBceEps);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const T p = std::min(std::max(pred.data[i], lo), hi);
        const double y = static_cast<double>(target.data[i]);
        sum -= y * std::log(static_cast<double>(p)) +
               (1.0 - y) * std::log(1.0 - static_cast<double>(p));
    }
    return static_cast<T>(sum / static_cast<double>(pred.data.size()));
}

// dL/dp with the 1/N mean factor applied; zero where the clamp saturates.
template <typename T>
TensorT<T> bce_backward(const TensorT<T>& pred, const TensorT<T>& target) {
    require_same_shape(pred, target, "bce_loss");
    const T lo = T(kBceEps), hi = T(1) - T(kBceEps);
    const T inv_n = T(1) / static_cast<T>(pred.data.size());
    TensorT<T> gx;
    gx.shape = pred.shape;
    gx.data.resize(pred.data.size());
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const T p = pred.data[i];
        if (p < lo || p > hi) {
            gx.data[i] = T(0);
            continue;
        }
        const T y = target.data[i];
        gx.data[i] = (-y / p + (T(1) - y) / (T(1) - p)) * inv_n;
    }
    return gx;
}

// ---------------------------------------------------------------- batch normalization

enum class BnMode { kTrain, kInference };

template <typename T>
struct BatchNormParamsT {
    TensorT<T> gamma, beta;              // [C]
    TensorT<T> running_mean, running_var;  // [C]
    T epsilon = T(1e-5);
    T momentum = T(0.1);
    BnMode mode = BnMode::kTrain;
};

using BatchNormParams = BatchNormParamsT<float>;

template <typename T>
struct BnCache {
    TensorT<T> mean, inv_std;  // batch statistics actually used, per channel
};

template <typename T>
BatchNormParamsT<T> make_batchnorm(int channels, T epsilon = T(1e-5), T momentum = T(0.1)) {
    BatchNormParamsT<T> p;
    p.gamma = TensorT<T>::full({channels}, T(1));
    p.beta = TensorT<T>::zeros({channels});
    p.running_mean = TensorT<T>::zeros({channels});
    p.running_var = TensorT<T>::full({channels}, T(1));
    p.epsilon = epsilon;
    p.momentum = momentum;
    return p;
}

// Train mode normalizes by batch statistics (biased variance), scales by
// gamma/beta and folds the batch stats into the running estimates (unbiased
// variance, momentum convention: run = (1-m)*run + m*batch). Inference mode
// uses the running estimates only. Mutating the running stats is the one
// in-place side effect of the forward path.
template <typename T>
TensorT<T> batchnorm_forward(const TensorT<T>& x, BatchNormParamsT<T>& p,
                             BnCache<T>* cache = nullptr) {
    require_shape(x, 4, "batchnorm");
    if (p.epsilon <= T(0)) throw ArgumentError("batchnorm: epsilon must be positive");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (p.gamma.numel() != static_cast<std::size_t>(c)) {
        throw DimensionError("batchnorm: channel axis (" + std::to_string(c) +
                             ") does not match parameter length " +
                             std::to_string(p.gamma.numel()));
    }
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t count = static_cast<std::size_t>(n) * plane;
    if (p.mode == BnMode::kTrain && count < 2) {
        throw ArgumentError("batchnorm: train mode needs batch*spatial count >= 2");
    }

    TensorT<T> y({n, c, h, w});
    TensorT<T> mean({c}), inv_std({c});

    parallel_for(c, [&](std::int64_t ci) {
        const int ch = static_cast<int>(ci);
        T mu, is;
        if (p.mode == BnMode::kTrain) {
            double sum = 0.0;
            for (int in = 0; in < n; ++in) {
                const T* xp = x.plane(in, ch);
                for (std::size_t i = 0; i < plane; ++i) sum += static_cast<double>(xp[i]);
            }
            const double m = sum / static_cast<double>(count);
            double var_sum = 0.0;
            for (int in = 0; in < n; ++in) {
                const T* xp = x.plane(in, ch);
                for (std::size_t i = 0; i < plane; ++i) {
                    const double dlt = static_cast<double>(xp[i]) - m;
                    var_sum += dlt * dlt;
                }
            }
            const double var = var_sum / static_cast<double>(count);
            const double var_unbiased = var_sum / static_cast<double>(count - 1);
            mu = static_cast<T>(m);
            is = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(p.epsilon)));
            p.running_mean.data[ch] = (T(1) - p.momentum) * p.running_mean.data[ch] +
                                      p.momentum * static_cast<T>(m);
            p.running_var.data[ch] = (T(1) - p.momentum) * p.running_var.data[ch] +
                                     p.momentum * static_cast<T>(var_unbiased);
        } else {
            mu = p.running_mean.data[ch];
            is = T(1) / std::sqrt(p.running_var.data[ch] + p.epsilon);
        }
        mean.data[ch] = mu;
        inv_std.data[ch] = is;
        const T g = p.gamma.data[ch], b = p.beta.data[ch];
        for (int in = 0; in < n; ++in) {
            const T* xp = x.plane(in, ch);
            T* yp = y.plane(in, ch);
            for (std::size_t i = 0; i < plane; ++i) {
                yp[i] = g * ((xp[i] - mu) * is) + b;
            }
        }
    });
    if (cache) {
        cache->mean = std::move(mean);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

// Standard batch-norm backward. In train mode the batch statistics are part of
// the graph; in inference mode they are constants.
template <typename T>
void batchnorm_backward(const TensorT<T>& gout, const TensorT<T>& x,
                        const BatchNormParamsT<T>& p, const BnCache<T>& cache, TensorT<T>* gx,
                        TensorT<T>* ggamma, TensorT<T>* gbeta) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t count = static_cast<std::size_t>(n) * plane;

    if (gx) *gx = TensorT<T>({n, c, h, w});
    if (ggamma) *ggamma = TensorT<T>({c});
    if (gbeta) *gbeta = TensorT<T>({c});

    parallel_for(c, [&](std::int64_t ci) {
        const int ch = static_cast<int>(ci);
        const T mu = cache.mean.data[ch], is = cache.inv_std.data[ch];
        const T g = p.gamma.data[ch];
        double sum_g = 0.0, sum_gx = 0.0;
        for (int in = 0; in < n; ++in) {
            const T* gp = gout.plane(in, ch);
            const T* xp = x.plane(in, ch);
            for (std::size_t i = 0; i < plane; ++i) {
                sum_g += static_cast<double>(gp[i]);
                sum_gx += static_cast<double>(gp[i]) *
                          static_cast<double>((xp[i] - mu) * is);
            }
        }
        if (ggamma) ggamma->data[ch] = static_cast<T>(sum_gx);
        if (gbeta) gbeta->data[ch] = static_cast<T>(sum_g);
        if (!gx) return;
        if (p.mode == BnMode::kTrain) {
            const T mean_g = static_cast<T>(sum_g / static_cast<double>(count));
            const T mean_gx = static_cast<T>(sum_gx / static_cast<double>(count));
            for (int in = 0; in < n; ++in) {
                const T* gp = gout.plane(in, ch);
                const T* xp = x.plane(in, ch);
                T* op = gx->plane(in, ch);
                for (std::size_t i = 0; i < plane; ++i) {
                    const T xhat = (xp[i] - mu) * is;
                    op[i] = g * is * (gp[i] - mean_g - xhat * mean_gx);
                }
            }
        } else {
            for (int in = 0; in < n; ++in) {
                const T* gp = gout.plane(in, ch);
                T* op = gx->plane(in, ch);
                for (std::size_t i = 0; i < plane; ++i) op[i] = g * is * gp[i];
            }
        }
    });
}

// ---------------------------------------------------------------- bilinear upsample

// Integer-factor bilinear interpolation with half-pixel centers (align-corners
// off): src = (dst + 0.5)/factor - 0.5, clamped. Constant maps stay constant.
template <typename T>
TensorT<T> bilinear_upsample(const TensorT<T>& x, int factor) {
    require_shape(x, 4, "bilinear_upsample");
    if (factor < 1) throw ArgumentError("bilinear_upsample: factor must be >= 1");
    if (factor == 1) return x;
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oh = h * factor, ow = w * factor;

    // Per-axis sample positions are shared by every row/column.
    std::vector<int> y0(oh), y1(oh), x0(ow), x1(ow);
    std::vector<T> wy(oh), wx(ow);
    auto fill_axis = [factor](int out_len, int in_len, std::vector<int>& i0, std::vector<int>& i1,
                              std::vector<T>& frac) {
        for (int i = 0; i < out_len; ++i) {
            double src = (i + 0.5) / factor - 0.5;
            src = std::min(std::max(src, 0.0), static_cast<double>(in_len - 1));
            const int lo = static_cast<int>(src);
            i0[i] = lo;
            i1[i] = std::min(lo + 1, in_len - 1);
            frac[i] = static_cast<T>(src - lo);
        }
    };
    fill_axis(oh, h, y0, y1, wy);
    fill_axis(ow, w, x0, x1, wx);

    TensorT<T> out({n, c, oh, ow});
    parallel_for(static_cast<std::int64_t>(n) * c, [&](std::int64_t idx) {
        const int in = static_cast<int>(idx / c);
        const int ch = static_cast<int>(idx % c);
        const T* xp = x.plane(in, ch);
        T* op = out.plane(in, ch);
        for (int y = 0; y < oh; ++y) {
            const T* r0 = xp + static_cast<std::size_t>(y0[y]) * w;
            const T* r1 = xp + static_cast<std::size_t>(y1[y]) * w;
            const T fy = wy[y];
            T* orow = op + static_cast<std::size_t>(y) * ow;
            for (int xo = 0; xo < ow; ++xo) {
                const T fx = wx[xo];
                const T top = r0[x0[xo]] * (T(1) - fx) + r0[x1[xo]] * fx;
                const T bot = r1[x0[xo]] * (T(1) - fx) + r1[x1[xo]] * fx;
                orow[xo] = top * (T(1) - fy) + bot * fy;
            }
        }
    });
    return out;
}

template <typename T>
TensorT<T> bilinear_upsample_backward(const TensorT<T>& gout, int factor,
                                      const std::vector<int>& input_shape) {
    if (factor == 1) return gout;
    const int n = input_shape[0], c = input_shape[1], h = input_shape[2], w = input_shape[3];
    const int oh = gout.dim(2), ow = gout.dim(3);

    std::vector<int> y0(oh), y1(oh), x0(ow), x1(ow);
    std::vector<T> wy(oh), wx(ow);
    auto fill_axis = [factor](int out_len, int in_len, std::vector<int>& i0, std::vector<int>& i1,
                              std::vector<T>& frac) {
        for (int i = 0; i < out_len; ++i) {
            double src = (i + 0.5) / factor - 0.5;
            src = std::min(std::max(src, 0.0), static_cast<double>(in_len - 1));
            const int lo = static_cast<int>(src);
            i0[i] = lo;
            i1[i] = std::min(lo + 1, in_len - 1);
            frac[i] = static_cast<T>(src - lo);
        }
    };
    fill_axis(oh, h, y0, y1, wy);
    fill_axis(ow, w, x0, x1, wx);

    TensorT<T> gx(input_shape);
    parallel_for(static_cast<std::int64_t>(n) * c, [&](std::int64_t idx) {
        const int in = static_cast<int>(idx / c);
        const int ch = static_cast<int>(idx % c);
        const T* gp = gout.plane(in, ch);
        T* op = gx.plane(in, ch);
        for (int y = 0; y < oh; ++y) {
            const T fy = wy[y];
            const T* grow = gp + static_cast<std::size_t>(y) * ow;
            T* r0 = op + static_cast<std::size_t>(y0[y]) * w;
            T* r1 = op + static_cast<std::size_t>(y1[y]) * w;
            for (int xo = 0; xo < ow; ++xo) {
                const T fx = wx[xo];
                const T g = grow[xo];
                r0[x0[xo]] += g * (T(1) - fy) * (T(1) - fx);
                r0[x1[xo]] += g * (T(1) - fy) * fx;
                r1[x0[xo]] += g * fy * (T(1) - fx);
                r1[x1[xo]] += g * fy * fx;
            }
        }
    });
    return gx;
}

// ---------------------------------------------------------------- average pooling

// Non-overlapping window average; window 0 selects global pooling (1x1 output).
template <typename T>
TensorT<T> avg_pool(const TensorT<T>& x, int window) {
    require_shape(x, 4, "avg_pool");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (window < 0) throw ArgumentError("avg_pool: window must be >= 0 (0 = global)");
    if (window > h || window > w) {
        throw ArgumentError("avg_pool: window " + std::to_string(window) +
                            " larger than input " + std::to_string(h) + "x" + std::to_string(w));
    }
    const bool global = window == 0;
    const int wh = global ? h : window;
    const int ww = global ? w : window;
    if (h % wh != 0 || w % ww != 0) {
        throw ArgumentError("avg_pool: window " + std::to_string(window) +
                            " must divide spatial dims " + std::to_string(h) + "x" +
                            std::to_string(w));
    }
    const int oh = h / wh, ow = w / ww;
    const T inv = T(1) / static_cast<T>(wh * ww);

    TensorT<T> out({n, c, oh, ow});
    parallel_for(static_cast<std::int64_t>(n) * c, [&](std::int64_t idx) {
        const int in = static_cast<int>(idx / c);
        const int ch = static_cast<int>(idx % c);
        const T* xp = x.plane(in, ch);
        T* op = out.plane(in, ch);
        for (int y = 0; y < oh; ++y) {
            for (int xo = 0; xo < ow; ++xo) {
                T acc = T(0);
                for (int dy = 0; dy < wh; ++dy) {
                    const T* row = xp + static_cast<std::size_t>(y * wh + dy) * w + xo * ww;
                    for (int dx = 0; dx < ww; ++dx) acc += row[dx];
                }
                op[static_cast<std::size_t>(y) * ow + xo] = acc * inv;
            }
        }
    });
    return out;
}

template <typename T>
TensorT<T> avg_pool_backward(const TensorT<T>& gout, int window,
                             const std::vector<int>& input_shape) {
    const int n = input_shape[0], c = input_shape[1], h = input_shape[2], w = input_shape[3];
    const bool global = window == 0;
    const int wh = global ? h : window;
    const int ww = global ? w : window;
    const int ow = gout.dim(3), oh = gout.dim(2);
    const T inv = T(1) / static_cast<T>(wh * ww);

    TensorT<T> gx(input_shape);
    parallel_for(static_cast<std::int64_t>(n) * c, [&](std::int64_t idx) {
        const int in = static_cast<int>(idx / c);
        const int ch = static_cast<int>(idx % c);
        const T* gp = gout.plane(in, ch);
        T* op = gx.plane(in, ch);
        for (int y = 0; y < oh; ++y) {
            for (int xo = 0; xo < ow; ++xo) {
                const T g = gp[static_cast<std::size_t>(y) * ow + xo] * inv;
                for (int dy = 0; dy < wh; ++dy) {
                    T* row = op + static_cast<std::size_t>(y * wh + dy) * w + xo * ww;
                    for (int dx = 0; dx < ww; ++dx) row[dx] += g;
                }
            }
        }
    });
    return gx;
}

}  // namespace wseg::nn
