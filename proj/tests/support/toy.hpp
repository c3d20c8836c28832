#pragma once

// Tiny network configurations for 16x16 inputs (gradient checks, fast unit tests).

#include <random>

#include "docbin/augnet.hpp"
#include "docbin/binet.hpp"

namespace docbin::testing {

inline binet::BiNetConfig toy_binet_config() {
    auto c = binet::BiNetConfig::paper();
    c.generator.base_width = 4;
    c.generator.depth = 2;
    c.generator.bottleneck_blocks = 1;
    c.generator.dropout_stages = 1;
    c.discriminator.base_width = 4;
    c.discriminator.n_layers = 2;
    return c;
}

inline augnet::AugNetConfig toy_augnet_config() {
    auto c = augnet::AugNetConfig::paper();
    c.hyper.z_dim = 2;
    c.generator.in_channels = 1 + c.hyper.z_dim;
    c.generator.base_width = 4;
    c.generator.depth = 2;
    c.generator.bottleneck_blocks = 1;
    c.encoder.base_width = 4;
    c.encoder.n_down = 2;
    c.discriminator.base_width = 4;
    c.discriminator.n_layers = 2;
    return c;
}

template <typename T>
nn::Tensor<T> uniform_tensor(nn::Shape s, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
    nn::Tensor<T> t(s);
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& v : t.values()) v = static_cast<T>(u(rng));
    return t;
}

template <typename T>
nn::Tensor<T> binary_tensor(nn::Shape s, std::mt19937_64& rng) {
    nn::Tensor<T> t(s);
    for (auto& v : t.values()) v = static_cast<T>(rng() & 1);
    return t;
}

}  // namespace docbin::testing
