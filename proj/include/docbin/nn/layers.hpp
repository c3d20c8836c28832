#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "docbin/nn/ops.hpp"

namespace docbin::nn {

template <typename T>
struct NamedParam {
    std::string name;
    Var<T> var;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

template <typename T>
Var<T> make_param(Shape s, T stddev, std::mt19937_64& rng) {
    Tensor<T> t(s);
    std::normal_distribution<double> dist(0.0, static_cast<double>(stddev));
    for (auto& v : t.values()) v = static_cast<T>(dist(rng));
    return Var<T>(std::move(t), true);
}

template <typename T>
Var<T> make_constant_param(Shape s, T value) {
    return Var<T>(Tensor<T>(s, value), true);
}

template <typename T>
class Conv2d {
public:
    Conv2d() = default;
    /// He-normal init unless an explicit standard deviation is given.
    Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, std::mt19937_64& rng, T init_std = T(-1))
        : stride_(stride), pad_(pad) {
        const T fan_in = static_cast<T>(in_ch * kernel * kernel);
        const T stddev = init_std > T(0) ? init_std : std::sqrt(T(2) / fan_in);
        weight_ = make_param<T>({out_ch, in_ch, kernel, kernel}, stddev, rng);
        bias_ = make_constant_param<T>({1, out_ch, 1, 1}, T(0));
    }

    Var<T> operator()(const Var<T>& x) const { return conv2d(x, weight_, bias_, stride_, pad_); }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        out.push_back({prefix + ".weight", weight_});
        out.push_back({prefix + ".bias", bias_});
    }

    [[nodiscard]] int kernel() const { return weight_.shape().h; }
    [[nodiscard]] int stride() const { return stride_; }
    [[nodiscard]] int padding() const { return pad_; }
    [[nodiscard]] int out_channels() const { return weight_.shape().n; }
    [[nodiscard]] const Var<T>& weight() const { return weight_; }

private:
    Var<T> weight_;
    Var<T> bias_;
    int stride_ = 1;
    int pad_ = 0;
};

template <typename T>
class ConvTranspose2d {
public:
    ConvTranspose2d() = default;
    ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride, int pad, std::mt19937_64& rng)
        : stride_(stride), pad_(pad) {
        const T fan_in = static_cast<T>(in_ch * kernel * kernel) / static_cast<T>(stride * stride);
        weight_ = make_param<T>({in_ch, out_ch, kernel, kernel}, std::sqrt(T(2) / fan_in), rng);
        bias_ = make_constant_param<T>({1, out_ch, 1, 1}, T(0));
    }

    Var<T> operator()(const Var<T>& x) const { return conv_transpose2d(x, weight_, bias_, stride_, pad_); }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        out.push_back({prefix + ".weight", weight_});
        out.push_back({prefix + ".bias", bias_});
    }

private:
    Var<T> weight_;
    Var<T> bias_;
    int stride_ = 2;
    int pad_ = 1;
};

template <typename T>
class InstanceNorm {
public:
    InstanceNorm() = default;
    explicit InstanceNorm(int channels)
        : gamma_(make_constant_param<T>({1, channels, 1, 1}, T(1))),
          beta_(make_constant_param<T>({1, channels, 1, 1}, T(0))) {}

    Var<T> operator()(const Var<T>& x) const { return instance_norm(x, gamma_, beta_); }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        out.push_back({prefix + ".gamma", gamma_});
        out.push_back({prefix + ".beta", beta_});
    }

private:
    Var<T> gamma_;
    Var<T> beta_;
};

/// Fully connected layer on (N, C, 1, 1) tensors.
template <typename T>
class Linear {
public:
    Linear() = default;
    Linear(int in_features, int out_features, std::mt19937_64& rng, T gain = T(1))
        : conv_(in_features, out_features, 1, 1, 0, rng, gain / std::sqrt(static_cast<T>(in_features))) {}

    Var<T> operator()(const Var<T>& x) const { return conv_(x); }
    void collect(const std::string& prefix, ParamList<T>& out) const { conv_.collect(prefix, out); }

private:
    Conv2d<T> conv_;
};

/// conv3x3 -> IN -> ReLU -> conv3x3 -> IN, plus identity shortcut.
template <typename T>
class ResidualBlock {
public:
    ResidualBlock() = default;
    ResidualBlock(int channels, std::mt19937_64& rng)
        : conv1_(channels, channels, 3, 1, 1, rng),
          norm1_(channels),
          conv2_(channels, channels, 3, 1, 1, rng),
          norm2_(channels) {}

    Var<T> operator()(const Var<T>& x) const {
        auto h = relu(norm1_(conv1_(x)));
        h = norm2_(conv2_(h));
        return add(x, h);
    }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        conv1_.collect(prefix + ".conv1", out);
        norm1_.collect(prefix + ".norm1", out);
        conv2_.collect(prefix + ".conv2", out);
        norm2_.collect(prefix + ".norm2", out);
    }

private:
    Conv2d<T> conv1_;
    InstanceNorm<T> norm1_;
    Conv2d<T> conv2_;
    InstanceNorm<T> norm2_;
};

template <typename T>
std::size_t parameter_count(const ParamList<T>& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.var.value().size();
    return n;
}

template <typename T>
void zero_grad(const ParamList<T>& params) {
    for (auto p : params) p.var.zero_grad();
}

template <typename T>
std::vector<Tensor<T>> snapshot(const ParamList<T>& params) {
    std::vector<Tensor<T>> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(p.var.value());
    return out;
}

}  // namespace docbin::nn
