#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>

#include "wseg/tensor.hpp"
#include "wseg/threading.hpp"

namespace wseg::nn {

template <typename T>
struct ConvParamsT {
    TensorT<T> weights;  // [out_ch, in_ch, k, k]; depthwise uses [ch, 1, k, k]
    std::optional<TensorT<T>> bias;  // [out_ch]
    int stride = 1;
    int padding = 0;
    int dilation = 1;
};

using ConvParams = ConvParamsT<float>;

inline int conv_out_dim(int in, int k, int stride, int pad, int dilation) {
    const int span = dilation * (k - 1) + 1;
    return (in + 2 * pad - span) / stride + 1;
}

namespace detail {

// Output index range [lo, hi] such that 0 <= out*stride - pad + koff < in_limit.
struct OutRange {
    int lo;
    int hi;
};

inline OutRange valid_out_range(int in_limit, int out_limit, int stride, int pad, int koff) {
    const int a = pad - koff;  // out*stride >= a
    int lo = a <= 0 ? 0 : (a + stride - 1) / stride;
    int hi = in_limit - 1 + pad - koff;  // out*stride <= hi
    hi = hi < 0 ? -1 : hi / stride;
    return {lo, std::min(hi, out_limit - 1)};
}

template <typename T>
void axpy(T* dst, const T* src, T a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] += a * src[i];
}

// Dot product split into four independent partial sums; the combine order is
// fixed, so results stay deterministic while the dependency chain shortens
// enough to pipeline.
template <typename T>
T plane_dot(const T* a, const T* b, std::size_t n) {
    T acc0 = T(0), acc1 = T(0), acc2 = T(0), acc3 = T(0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 += a[i] * b[i];
        acc1 += a[i + 1] * b[i + 1];
        acc2 += a[i + 2] * b[i + 2];
        acc3 += a[i + 3] * b[i + 3];
    }
    T rest = T(0);
    for (; i < n; ++i) rest += a[i] * b[i];
    return ((acc0 + acc1) + (acc2 + acc3)) + rest;
}

// dst += 3x3 same-padding correlation of src with the nine taps, one
// branch-free pass per row over the interior columns. Missing boundary rows
// alias a shared zero row.
template <typename T>
void accumulate_3x3_same(T* dst, const T* src, const T* taps, int h, int w, const T* zero_row) {
    for (int y = 0; y < h; ++y) {
        const T* r0 = y > 0 ? src + static_cast<std::size_t>(y - 1) * w : zero_row;
        const T* r1 = src + static_cast<std::size_t>(y) * w;
        const T* r2 = y + 1 < h ? src + static_cast<std::size_t>(y + 1) * w : zero_row;
        T* out = dst + static_cast<std::size_t>(y) * w;

        if (w == 1) {
            out[0] += taps[1] * r0[0] + taps[4] * r1[0] + taps[7] * r2[0];
            continue;
        }
        out[0] += taps[1] * r0[0] + taps[2] * r0[1] + taps[4] * r1[0] + taps[5] * r1[1] +
                  taps[7] * r2[0] + taps[8] * r2[1];
        for (int xo = 1; xo + 1 < w; ++xo) {
            out[xo] += taps[0] * r0[xo - 1] + taps[1] * r0[xo] + taps[2] * r0[xo + 1] +
                       taps[3] * r1[xo - 1] + taps[4] * r1[xo] + taps[5] * r1[xo + 1] +
                       taps[6] * r2[xo - 1] + taps[7] * r2[xo] + taps[8] * r2[xo + 1];
        }
        if (w > 1) {
            out[w - 1] += taps[0] * r0[w - 2] + taps[1] * r0[w - 1] + taps[3] * r1[w - 2] +
                          taps[4] * r1[w - 1] + taps[6] * r2[w - 2] + taps[7] * r2[w - 1];
        }
    }
}

template <typename T>
T row_dot(const T* grow, const T* xrow, int lo, int hi, int stride, int off) {
    T acc0 = T(0), acc1 = T(0), acc2 = T(0), acc3 = T(0);
    int xo = lo;
    for (; xo + 3 <= hi; xo += 4) {
        acc0 += grow[xo] * xrow[xo * stride + off];
        acc1 += grow[xo + 1] * xrow[(xo + 1) * stride + off];
        acc2 += grow[xo + 2] * xrow[(xo + 2) * stride + off];
        acc3 += grow[xo + 3] * xrow[(xo + 3) * stride + off];
    }
    T rest = T(0);
    for (; xo <= hi; ++xo) rest += grow[xo] * xrow[xo * stride + off];
    return ((acc0 + acc1) + (acc2 + acc3)) + rest;
}

template <typename T>
void check_conv_args(const TensorT<T>& x, const ConvParamsT<T>& p, const char* op) {
    require_shape(x, 4, op);
    require_shape(p.weights, 4, op);
    if (p.weights.dim(2) != p.weights.dim(3)) {
        throw DimensionError(std::string(op) + ": kernel must be square, got " +
                             shape_str(p.weights.shape));
    }
    if (p.stride < 1) throw ArgumentError(std::string(op) + ": stride must be >= 1");
    if (p.padding < 0) throw ArgumentError(std::string(op) + ": padding must be >= 0");
    if (p.dilation < 1) throw ArgumentError(std::string(op) + ": dilation must be >= 1");
    const int k = p.weights.dim(2);
    const int oh = conv_out_dim(x.dim(2), k, p.stride, p.padding, p.dilation);
    const int ow = conv_out_dim(x.dim(3), k, p.stride, p.padding, p.dilation);
    if (oh < 1 || ow < 1) {
        throw DimensionError(std::string(op) + ": spatial axes " + std::to_string(x.dim(2)) +
                             "x" + std::to_string(x.dim(3)) + " too small for kernel " +
                             std::to_string(k) + " (stride " + std::to_string(p.stride) +
                             ", pad " + std::to_string(p.padding) + ")");
    }
}

template <typename T>
void check_bias(const ConvParamsT<T>& p, int out_ch, const char* op) {
    if (p.bias && (p.bias->rank() != 1 || p.bias->dim(0) != out_ch)) {
        throw DimensionError(std::string(op) + ": bias axis " + shape_str(p.bias->shape) +
                             " does not match out_ch " + std::to_string(out_ch));
    }
}

}  // namespace detail

// Cross-correlation (no kernel flip), zero padding.
template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const ConvParamsT<T>& p) {
    detail::check_conv_args(x, p, "conv2d");
    const int n = x.dim(0), ic = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oc = p.weights.dim(0), k = p.weights.dim(2);
    if (p.weights.dim(1) != ic) {
        throw DimensionError("conv2d: input channel axis (" + std::to_string(ic) +
                             ") does not match weight in_ch axis (" +
                             std::to_string(p.weights.dim(1)) + ")");
    }
    detail::check_bias(p, oc, "conv2d");
    const int s = p.stride, pad = p.padding, d = p.dilation;
    const int oh = conv_out_dim(h, k, s, pad, d), ow = conv_out_dim(w, k, s, pad, d);

    TensorT<T> out({n, oc, oh, ow});
    const std::size_t plane = static_cast<std::size_t>(oh) * ow;
    const bool flat = k == 1 && s == 1 && pad == 0;  // per-pixel channel mix
    const bool same3 = k == 3 && s == 1 && pad == 1 && d == 1;
    const std::vector<T> zero_row(static_cast<std::size_t>(w), T(0));

    std::vector<detail::OutRange> rhs(static_cast<std::size_t>(k)), rws(static_cast<std::size_t>(k));
    for (int kk = 0; kk < k; ++kk) {
        rhs[static_cast<std::size_t>(kk)] = detail::valid_out_range(h, oh, s, pad, kk * d);
        rws[static_cast<std::size_t>(kk)] = detail::valid_out_range(w, ow, s, pad, kk * d);
    }

    parallel_for(static_cast<std::int64_t>(n) * oc, [&](std::int64_t idx) {
        const int in = static_cast<int>(idx / oc);
        const int co = static_cast<int>(idx % oc);
        T* oplane = out.plane(in, co);
        if (p.bias) {
            const T b = p.bias->data[co];
            std::fill(oplane, oplane + plane, b);
        }
        if (flat) {
            const T* wk = &p.weights.at4(co, 0, 0, 0);
            for (int ci = 0; ci < ic; ++ci) {
                detail::axpy(oplane, x.plane(in, ci), wk[ci], plane);
            }
            return;
        }
        if (same3) {
            for (int ci = 0; ci < ic; ++ci) {
                detail::accumulate_3x3_same(oplane, x.plane(in, ci), &p.weights.at4(co, ci, 0, 0),
                                            h, w, zero_row.data());
            }
            return;
        }
        for (int ci = 0; ci < ic; ++ci) {
            const T* xplane = x.plane(in, ci);
            const T* wk = &p.weights.at4(co, ci, 0, 0);
            for (int kh = 0; kh < k; ++kh) {
                const auto rh = rhs[static_cast<std::size_t>(kh)];
                for (int kw = 0; kw < k; ++kw) {
                    const T wv = wk[kh * k + kw];
                    if (wv == T(0)) continue;
                    const auto rw = rws[static_cast<std::size_t>(kw)];
                    for (int y = rh.lo; y <= rh.hi; ++y) {
                        const T* xrow = xplane + static_cast<std::size_t>(y * s - pad + kh * d) * w;
                        T* orow = oplane + static_cast<std::size_t>(y) * ow;
                        const int off = kw * d - pad;
                        for (int xo = rw.lo; xo <= rw.hi; ++xo) {
                            orow[xo] += wv * xrow[xo * s + off];
                        }
                    }
                }
            }
        }
    });
    return out;
}

// Gradient w.r.t. the convolution input. Each (n, ic) plane is owned by one
// worker, so accumulation order is independent of the thread count.
template <typename T>
TensorT<T> conv2d_backward_input(const TensorT<T>& gout, const ConvParamsT<T>& p,
                                 const std::vector<int>& input_shape) {
    const int n = input_shape[0], ic = input_shape[1], h = input_shape[2], w = input_shape[3];
    const int oc = p.weights.dim(0), k = p.weights.dim(2);
    const int s = p.stride, pad = p.padding, d = p.dilation;
    const int oh = gout.dim(2), ow = gout.dim(3);

    TensorT<T> gx(input_shape);
    const std::size_t plane = static_cast<std::size_t>(oh) * ow;
    const bool flat = k == 1 && s == 1 && pad == 0;
    const bool same3 = k == 3 && s == 1 && pad == 1 && d == 1;
    const std::vector<T> zero_row(static_cast<std::size_t>(w), T(0));

    std::vector<detail::OutRange> rhs(static_cast<std::size_t>(k)), rws(static_cast<std::size_t>(k));
    for (int kk = 0; kk < k; ++kk) {
        rhs[static_cast<std::size_t>(kk)] = detail::valid_out_range(h, oh, s, pad, kk * d);
        rws[static_cast<std::size_t>(kk)] = detail::valid_out_range(w, ow, s, pad, kk * d);
    }

    parallel_for(static_cast<std::int64_t>(n) * ic, [&](std::int64_t idx) {
        const int in = static_cast<int>(idx / ic);
        const int ci = static_cast<int>(idx % ic);
        T* gxplane = gx.plane(in, ci);
        if (flat) {
            for (int co = 0; co < oc; ++co) {
                detail::axpy(gxplane, gout.plane(in, co), p.weights.at4(co, ci, 0, 0), plane);
            }
            return;
        }
        if (same3) {
            // gradient of a same-padding correlation is a correlation with the
            // 180-degree-rotated taps
            for (int co = 0; co < oc; ++co) {
                const T* wk = &p.weights.at4(co, ci, 0, 0);
                const T flipped[9] = {wk[8], wk[7], wk[6], wk[5], wk[4],
                                      wk[3], wk[2], wk[1], wk[0]};
                detail::accumulate_3x3_same(gxplane, gout.plane(in, co), flipped, h, w,
                                            zero_row.data());
            }
            return;
        }
        for (int co = 0; co < oc; ++co) {
            const T* gplane = gout.plane(in, co);
            const T* wk = &p.weights.at4(co, ci, 0, 0);
            for (int kh = 0; kh < k; ++kh) {
                const auto rh = rhs[static_cast<std::size_t>(kh)];
                for (int kw = 0; kw < k; ++kw) {
                    const T wv = wk[kh * k + kw];
                    if (wv == T(0)) continue;
                    const auto rw = rws[static_cast<std::size_t>(kw)];
                    for (int y = rh.lo; y <= rh.hi; ++y) {
                        T* gxrow = gxplane + static_cast<std::size_t>(y * s - pad + kh * d) * w;
                        const T* grow = gplane + static_cast<std::size_t>(y) * ow;
                        const int off = kw * d - pad;
                        for (int xo = rw.lo; xo <= rw.hi; ++xo) {
                            gxrow[xo * s + off] += wv * grow[xo];
                        }
                    }
                }
            }
        }
    });
    return gx;
}

template <typename T>
TensorT<T> conv2d_backward_weights(const TensorT<T>& gout, const TensorT<T>& x,
                                   const ConvParamsT<T>& p) {
    const int n = x.dim(0), ic = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oc = p.weights.dim(0), k = p.weights.dim(2);
    const int s = p.stride, pad = p.padding, d = p.dilation;
    const int oh = gout.dim(2), ow = gout.dim(3);

    TensorT<T> gw(p.weights.shape);
    const std::size_t plane = static_cast<std::size_t>(oh) * ow;
    const bool flat = k == 1 && s == 1 && pad == 0;
    parallel_for(oc, [&](std::int64_t co) {
        if (flat) {
            for (int ci = 0; ci < ic; ++ci) {
                T acc = T(0);
                for (int in = 0; in < n; ++in) {
                    acc += detail::plane_dot(gout.plane(in, static_cast<int>(co)),
                                             x.plane(in, ci), plane);
                }
                gw.at4(static_cast<int>(co), ci, 0, 0) = acc;
            }
            return;
        }
        for (int ci = 0; ci < ic; ++ci) {
            for (int kh = 0; kh < k; ++kh) {
                const auto rh = detail::valid_out_range(h, oh, s, pad, kh * d);
                for (int kw = 0; kw < k; ++kw) {
                    const auto rw = detail::valid_out_range(w, ow, s, pad, kw * d);
                    const int off = kw * d - pad;
                    T acc = T(0);
                    for (int in = 0; in < n; ++in) {
                        const T* gplane = gout.plane(in, static_cast<int>(co));
                        const T* xplane = x.plane(in, ci);
                        for (int y = rh.lo; y <= rh.hi; ++y) {
                            acc += detail::row_dot(gplane + static_cast<std::size_t>(y) * ow,
                                                   xplane + static_cast<std::size_t>(
                                                                y * s - pad + kh * d) *
                                                                w,
                                                   rw.lo, rw.hi, s, off);
                        }
                    }
                    gw.at4(static_cast<int>(co), ci, kh, kw) = acc;
                }
            }
        }
    });
    return gw;
}

template <typename T>
TensorT<T> conv2d_backward_bias(const TensorT<T>& gout) {
    const int n = gout.dim(0), oc = gout.dim(1);
    const std::size_t plane = static_cast<std::size_t>(gout.dim(2)) * gout.dim(3);
    TensorT<T> gb({oc});
    parallel_for(oc, [&](std::int64_t co) {
        T acc = T(0);
        for (int in = 0; in < n; ++in) {
            const T* g = gout.plane(in, static_cast<int>(co));
            for (std::size_t i = 0; i < plane; ++i) acc += g[i];
        }
        gb.data[static_cast<std::size_t>(co)] = acc;
    });
    return gb;
}

// Depthwise: one k x k filter per input channel; channel c of the output
// depends only on channel c of the input.
template <typename T>
TensorT<T> depthwise_conv2d_forward(const TensorT<T>& x, const ConvParamsT<T>& p) {
    detail::check_conv_args(x, p, "depthwise_conv2d");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int k = p.weights.dim(2);
    if (p.weights.dim(0) != c || p.weights.dim(1) != 1) {
        throw DimensionError("depthwise_conv2d: weight axes " + shape_str(p.weights.shape) +
                             " do not match input channel axis (" + std::to_string(c) +
                             "); expected [" + std::to_string(c) + "x1xkxk]");
    }
    detail::check_bias(p, c, "depthwise_conv2d");
    const int s = p.stride, pad = p.padding, d = p.dilation;
    const int oh = conv_out_dim(h, k, s, pad, d), ow = conv_out_dim(w, k, s, pad, d);

    TensorT<T> out({n, c, oh, ow});
    const bool same3 = k == 3 && s == 1 && pad == 1 && d == 1;
    const std::vector<T> zero_row(static_cast<std::size_t>(w), T(0));
    parallel_for(static_cast<std::int64_t>(n) * c, [&](std::int64_t idx) {
        const int in = static_cast<int>(idx / c);
        const int ch = static_cast<int>(idx % c);
        T* oplane = out.plane(in, ch);
        if (p.bias) {
            std::fill(oplane, oplane + static_cast<std::size_t>(oh) * ow, p.bias->data[ch]);
        }
        const T* xplane = x.plane(in, ch);
        const T* wk = &p.weights.at4(ch, 0, 0, 0);
        if (same3) {
            detail::accumulate_3x3_same(oplane, xplane, wk, h, w, zero_row.data());
            return;
        }
        for (int kh = 0; kh < k; ++kh) {
            const auto rh = detail::valid_out_range(h, oh, s, pad, kh * d);
            for (int kw = 0; kw < k; ++kw) {
                const T wv = wk[kh * k + kw];
                if (wv == T(0)) continue;
                const auto rw = detail::valid_out_range(w, ow, s, pad, kw * d);
                for (int y = rh.lo; y <= rh.hi; ++y) {
                    const T* xrow = xplane + static_cast<std::size_t>(y * s - pad + kh * d) * w;
                    T* orow = oplane + static_cast<std::size_t>(y) * ow;
                    const int off = kw * d - pad;
                    for (int xo = rw.lo; xo <= rw.hi; ++xo) {
                        orow[xo] += wv * xrow[xo * s + off];
                    }
                }
            }
        }
    });
    return out;
}

template <typename T>
TensorT<T> depthwise_conv2d_backward_input(const TensorT<T>& gout, const ConvParamsT<T>& p,
                                           const std::vector<int>& input_shape) {
    const int n = input_shape[0], c = input_shape[1], h = input_shape[2], w = input_shape[3];
    const int k = p.weights.dim(2);
    const int s = p.stride, pad = p.padding, d = p.dilation;
    const int oh = gout.dim(2), ow = gout.dim(3);

    TensorT<T> gx(input_shape);
    const bool same3 = k == 3 && s == 1 && pad == 1 && d == 1;
    const std::vector<T> zero_row(static_cast<std::size_t>(w), T(0));
    parallel_for(static_cast<std::int64_t>(n) * c, [&](std::int64_t idx) {
        const int in = static_cast<int>(idx / c);
        const int ch = static_cast<int>(idx % c);
        T* gxplane = gx.plane(in, ch);
        const T* gplane = gout.plane(in, ch);
        const T* wk = &p.weights.at4(ch, 0, 0, 0);
        if (same3) {
            const T flipped[9] = {wk[8], wk[7], wk[6], wk[5], wk[4], wk[3], wk[2], wk[1], wk[0]};
            detail::accumulate_3x3_same(gxplane, gplane, flipped, h, w, zero_row.data());
            return;
        }
        for (int kh = 0; kh < k; ++kh) {
            const auto rh = detail::valid_out_range(h, oh, s, pad, kh * d);
            for (int kw = 0; kw < k; ++kw) {
                const T wv = wk[kh * k + kw];
                if (wv == T(0)) continue;
                const auto rw = detail::valid_out_range(w, ow, s, pad, kw * d);
                for (int y = rh.lo; y <= rh.hi; ++y) {
                    T* gxrow = gxplane + static_cast<std::size_t>(y * s - pad + kh * d) * w;
                    const T* grow = gplane + static_cast<std::size_t>(y) * ow;
                    const int off = kw * d - pad;
                    for (int xo = rw.lo; xo <= rw.hi; ++xo) {
                        gxrow[xo * s + off] += wv * grow[xo];
                    }
                }
            }
        }
    });
    return gx;
}

template <typename T>
TensorT<T> depthwise_conv2d_backward_weights(const TensorT<T>& gout, const TensorT<T>& x,
                                             const ConvParamsT<T>& p) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int k = p.weights.dim(2);
    const int s = p.stride, pad = p.padding, d = p.dilation;
    const int oh = gout.dim(2), ow = gout.dim(3);

    TensorT<T> gw(p.weights.shape);
    parallel_for(c, [&](std::int64_t ch) {
        for (int kh = 0; kh < k; ++kh) {
            const auto rh = detail::valid_out_range(h, oh, s, pad, kh * d);
            for (int kw = 0; kw < k; ++kw) {
                const auto rw = detail::valid_out_range(w, ow, s, pad, kw * d);
                const int off = kw * d - pad;
                T acc = T(0);
                for (int in = 0; in < n; ++in) {
                    const T* gplane = gout.plane(in, static_cast<int>(ch));
                    const T* xplane = x.plane(in, static_cast<int>(ch));
                    for (int y = rh.lo; y <= rh.hi; ++y) {
                        acc += detail::row_dot(
                            gplane + static_cast<std::size_t>(y) * ow,
                            xplane + static_cast<std::size_t>(y * s - pad + kh * d) * w, rw.lo,
                            rw.hi, s, off);
                    }
                }
                gw.at4(static_cast<int>(ch), 0, kh, kw) = acc;
            }
        }
    });
    return gw;
}

// 1x1 convolution: per-pixel linear map across channels.
template <typename T>
TensorT<T> pointwise_conv2d_forward(const TensorT<T>& x, const ConvParamsT<T>& p) {
    if (p.weights.rank() != 4 || p.weights.dim(2) != 1 || p.weights.dim(3) != 1) {
        throw ArgumentError("pointwise_conv2d: contract violation, kernel must be 1x1, got " +
                            shape_str(p.weights.shape));
    }
    return conv2d_forward(x, p);
}

// Exact multiply-accumulate counts for the cost-ratio analysis.
inline std::uint64_t conv2d_macs(int n, int in_ch, int h, int w, int out_ch, int k, int stride,
                                 int pad, int dilation = 1) {
    const std::uint64_t oh = static_cast<std::uint64_t>(conv_out_dim(h, k, stride, pad, dilation));
    const std::uint64_t ow = static_cast<std::uint64_t>(conv_out_dim(w, k, stride, pad, dilation));
    return static_cast<std::uint64_t>(n) * out_ch * oh * ow * in_ch * k * k;
}

inline std::uint64_t depthwise_conv2d_macs(int n, int ch, int h, int w, int k, int stride, int pad,
                                           int dilation = 1) {
    const std::uint64_t oh = static_cast<std::uint64_t>(conv_out_dim(h, k, stride, pad, dilation));
    const std::uint64_t ow = static_cast<std::uint64_t>(conv_out_dim(w, k, stride, pad, dilation));
    return static_cast<std::uint64_t>(n) * ch * oh * ow * k * k;
}

inline std::uint64_t pointwise_conv2d_macs(int n, int in_ch, int h, int w, int out_ch) {
    return static_cast<std::uint64_t>(n) * out_ch * static_cast<std::uint64_t>(h) * w * in_ch;
}

}  // namespace wseg::nn
