#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "docbin/nn/layers.hpp"

namespace docbin::nn {

struct AdamOptions {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam over a fixed parameter list. Moment buffers are indexed like the list.
template <typename T>
class Adam {
public:
    Adam() = default;
    Adam(ParamList<T> params, AdamOptions opts) : params_(std::move(params)), opts_(opts) {
        for (const auto& p : params_) {
            m_.emplace_back(p.var.shape());
            v_.emplace_back(p.var.shape());
        }
    }

    /// Applies one update from the accumulated gradients, then clears them.
    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto var = params_[k].var;
            if (!var.has_grad()) continue;
            const auto& g = var.grad();
            auto& w = var.mutable_value();
            auto& m = m_[k];
            auto& v = v_[k];
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double gi = static_cast<double>(g[i]);
                const double mi = opts_.beta1 * static_cast<double>(m[i]) + (1.0 - opts_.beta1) * gi;
                const double vi = opts_.beta2 * static_cast<double>(v[i]) + (1.0 - opts_.beta2) * gi * gi;
                m[i] = static_cast<T>(mi);
                v[i] = static_cast<T>(vi);
                const double update = opts_.lr * (mi / bc1) / (std::sqrt(vi / bc2) + opts_.eps);
                w[i] = static_cast<T>(static_cast<double>(w[i]) - update);
            }
            var.zero_grad();
        }
    }

    void zero_grad() { nn::zero_grad(params_); }

    [[nodiscard]] const ParamList<T>& params() const { return params_; }
    [[nodiscard]] const AdamOptions& options() const { return opts_; }
    [[nodiscard]] std::int64_t steps() const { return t_; }

    [[nodiscard]] const std::vector<Tensor<T>>& first_moments() const { return m_; }
    [[nodiscard]] const std::vector<Tensor<T>>& second_moments() const { return v_; }

    void restore(std::int64_t t, std::vector<Tensor<T>> m, std::vector<Tensor<T>> v) {
        if (m.size() != params_.size() || v.size() != params_.size()) {
            throw std::invalid_argument("Adam::restore: moment count does not match parameter count");
        }
        for (std::size_t k = 0; k < params_.size(); ++k) {
            if (m[k].shape() != params_[k].var.shape() || v[k].shape() != params_[k].var.shape()) {
                throw std::invalid_argument("Adam::restore: moment shape mismatch for " + params_[k].name);
            }
        }
        t_ = t;
        m_ = std::move(m);
        v_ = std::move(v);
    }

private:
    ParamList<T> params_;
    AdamOptions opts_;
    std::vector<Tensor<T>> m_;
    std::vector<Tensor<T>> v_;
    std::int64_t t_ = 0;
};

}  // namespace docbin::nn
