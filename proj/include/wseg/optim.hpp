#pragma once

#include <cmath>
#include <cstdint>

#include "wseg/tensor.hpp"
#include "wseg/threading.hpp"

namespace wseg::nn {

template <typename T>
struct AdamStateT {
    TensorT<T> m, v;  // first/second moment, mirroring the parameter shape
    std::int64_t t = 0;
    T lr = T(1e-4);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T epsilon = T(1e-8);
};

using AdamState = AdamStateT<float>;

template <typename T>
AdamStateT<T> make_adam_state(const std::vector<int>& shape, T lr) {
    AdamStateT<T> s;
    s.m = TensorT<T>::zeros(shape);
    s.v = TensorT<T>::zeros(shape);
    s.lr = lr;
    return s;
}

// One bias-corrected Adam update, in place. The step counter increments before
// the moment update.
template <typename T>
void adam_step(TensorT<T>& param, const TensorT<T>& grad, AdamStateT<T>& state) {
    require_same_shape(param, grad, "adam_step");
    require_same_shape(param, state.m, "adam_step");
    state.t += 1;
    const T b1 = state.beta1, b2 = state.beta2;
    const T corr1 = T(1) - static_cast<T>(std::pow(static_cast<double>(b1), state.t));
    const T corr2 = T(1) - static_cast<T>(std::pow(static_cast<double>(b2), state.t));
    T* m = state.m.data.data();
    T* v = state.v.data.data();
    T* p = param.data.data();
    const T* g = grad.data.data();
    const std::size_t n = param.numel();
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (T(1) - b1) * g[i];
        v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
        const T mhat = m[i] / corr1;
        const T vhat = v[i] / corr2;
        p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
}

}  // namespace wseg::nn
