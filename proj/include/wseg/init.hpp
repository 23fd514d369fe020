#pragma once

#include <cmath>
#include <cstdint>

#include "wseg/rng.hpp"
#include "wseg/tensor.hpp"

namespace wseg::nn {

// Zero-mean normal with variance 2/fan_in, deterministic per seed.
template <typename T>
TensorT<T> he_init(std::vector<int> shape, int fan_in, std::uint64_t seed) {
    if (fan_in < 1) throw ArgumentError("he_init: fan_in must be >= 1");
    Rng rng(seed);
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    TensorT<T> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<T>(rng.normal() * std_dev);
    return t;
}

}  // namespace wseg::nn
