#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "docbin/nn/autograd.hpp"

namespace docbin::nn {

namespace detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

struct ConvGeometry {
    int channels, height, width, kernel, stride, pad;
    [[nodiscard]] int out_h() const { return (height + 2 * pad - kernel) / stride + 1; }
    [[nodiscard]] int out_w() const { return (width + 2 * pad - kernel) / stride + 1; }
    [[nodiscard]] int rows() const { return channels * kernel * kernel; }
    [[nodiscard]] int cols() const { return out_h() * out_w(); }
};

// image (C,H,W) -> columns (C*k*k, Ho*Wo); zero padding.
template <typename T>
void im2col(const T* img, const ConvGeometry& g, T* cols) {
    const int oh = g.out_h();
    const int ow = g.out_w();
    for (int c = 0; c < g.channels; ++c)
        for (int ky = 0; ky < g.kernel; ++ky)
            for (int kx = 0; kx < g.kernel; ++kx) {
                T* row = cols + static_cast<std::size_t>((c * g.kernel + ky) * g.kernel + kx) * oh * ow;
                const T* plane = img + static_cast<std::size_t>(c) * g.height * g.width;
                for (int y = 0; y < oh; ++y) {
                    const int iy = y * g.stride - g.pad + ky;
                    T* dst = row + static_cast<std::size_t>(y) * ow;
                    if (iy < 0 || iy >= g.height) {
                        std::fill(dst, dst + ow, T(0));
                        continue;
                    }
                    const T* src = plane + static_cast<std::size_t>(iy) * g.width;
                    for (int x = 0; x < ow; ++x) {
                        const int ix = x * g.stride - g.pad + kx;
                        dst[x] = (ix >= 0 && ix < g.width) ? src[ix] : T(0);
                    }
                }
            }
}

// Adjoint of im2col: scatter-add columns back into the image.
template <typename T>
void col2im(const T* cols, const ConvGeometry& g, T* img) {
    const int oh = g.out_h();
    const int ow = g.out_w();
    for (int c = 0; c < g.channels; ++c)
        for (int ky = 0; ky < g.kernel; ++ky)
            for (int kx = 0; kx < g.kernel; ++kx) {
                const T* row = cols + static_cast<std::size_t>((c * g.kernel + ky) * g.kernel + kx) * oh * ow;
                T* plane = img + static_cast<std::size_t>(c) * g.height * g.width;
                for (int y = 0; y < oh; ++y) {
                    const int iy = y * g.stride - g.pad + ky;
                    if (iy < 0 || iy >= g.height) continue;
                    const T* src = row + static_cast<std::size_t>(y) * ow;
                    T* dst = plane + static_cast<std::size_t>(iy) * g.width;
                    for (int x = 0; x < ow; ++x) {
                        const int ix = x * g.stride - g.pad + kx;
                        if (ix >= 0 && ix < g.width) dst[ix] += src[x];
                    }
                }
            }
}

template <typename T>
Tensor<T> scalar_tensor(T v) {
    return Tensor<T>::scalar(v);
}

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw ShapeError(msg);
}

}  // namespace detail

/// 2-D convolution. weight: (Cout, Cin, k, k); bias: (1, Cout, 1, 1).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad) {
    using namespace detail;
    const Shape xs = x.shape();
    const Shape ws = weight.shape();
    require(ws.c == xs.c && ws.h == ws.w, "conv2d: weight " + ws.str() + " incompatible with input " + xs.str());
    require(bias.shape() == Shape{1, ws.n, 1, 1}, "conv2d: bias shape " + bias.shape().str());
    const ConvGeometry g{xs.c, xs.h, xs.w, ws.h, stride, pad};
    require(g.out_h() > 0 && g.out_w() > 0, "conv2d: input " + xs.str() + " smaller than kernel");
    const int cout = ws.n;
    Tensor<T> out({xs.n, cout, g.out_h(), g.out_w()});
    Buffer<T> cols(static_cast<std::size_t>(g.rows()) * g.cols());
    ConstMatMap<T> wm(weight.value().data(), cout, g.rows());
    for (int n = 0; n < xs.n; ++n) {
        im2col(x.value().data() + n * xs.sample(), g, cols.data());
        MatMap<T> ym(out.data() + n * out.shape().sample(), cout, g.cols());
        ym.noalias() = wm * ConstMatMap<T>(cols.data(), g.rows(), g.cols());
        for (int c = 0; c < cout; ++c) ym.row(c).array() += bias.value()[c];
    }
    return make_result<T>(std::move(out), {x, weight, bias}, [g, cout](Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& wn = *self.parents[1];
        auto& bn = *self.parents[2];
        const Shape xs = xn.value.shape();
        const Shape ys = self.value.shape();
        Buffer<T> cols(static_cast<std::size_t>(g.rows()) * g.cols());
        ConstMatMap<T> wm(wn.value.data(), cout, g.rows());
        for (int n = 0; n < xs.n; ++n) {
            ConstMatMap<T> dy(self.grad.data() + n * ys.sample(), cout, g.cols());
            if (bn.requires_grad) {
                auto& db = bn.grad_buffer();
                for (int c = 0; c < cout; ++c) db[c] += dy.row(c).sum();
            }
            if (wn.requires_grad) {
                im2col(xn.value.data() + n * xs.sample(), g, cols.data());
                MatMap<T> dw(wn.grad_buffer().data(), cout, g.rows());
                dw.noalias() += dy * ConstMatMap<T>(cols.data(), g.rows(), g.cols()).transpose();
            }
            if (xn.requires_grad) {
                MatMap<T> dcols(cols.data(), g.rows(), g.cols());
                dcols.noalias() = wm.transpose() * dy;
                col2im(cols.data(), g, xn.grad_buffer().data() + n * xs.sample());
            }
        }
    });
}

/// Transposed convolution. weight: (Cin, Cout, k, k); bias: (1, Cout, 1, 1).
/// Output side is (H - 1) * stride - 2 * pad + k.
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int pad) {
    using namespace detail;
    const Shape xs = x.shape();
    const Shape ws = weight.shape();
    require(ws.n == xs.c && ws.h == ws.w, "conv_transpose2d: weight " + ws.str() + " vs input " + xs.str());
    const int cout = ws.c;
    require(bias.shape() == Shape{1, cout, 1, 1}, "conv_transpose2d: bias shape " + bias.shape().str());
    const int oh = (xs.h - 1) * stride - 2 * pad + ws.h;
    const int ow = (xs.w - 1) * stride - 2 * pad + ws.w;
    const ConvGeometry g{cout, oh, ow, ws.h, stride, pad};
    require(g.out_h() == xs.h && g.out_w() == xs.w, "conv_transpose2d: inconsistent geometry");
    Tensor<T> out({xs.n, cout, oh, ow});
    Buffer<T> cols(static_cast<std::size_t>(g.rows()) * g.cols());
    ConstMatMap<T> wm(weight.value().data(), xs.c, g.rows());
    for (int n = 0; n < xs.n; ++n) {
        MatMap<T> cm(cols.data(), g.rows(), g.cols());
        cm.noalias() = wm.transpose() * ConstMatMap<T>(x.value().data() + n * xs.sample(), xs.c, g.cols());
        T* o = out.data() + n * out.shape().sample();
        col2im(cols.data(), g, o);
        for (int c = 0; c < cout; ++c) {
            const T b = bias.value()[c];
            T* plane = o + static_cast<std::size_t>(c) * oh * ow;
            for (int i = 0; i < oh * ow; ++i) plane[i] += b;
        }
    }
    return make_result<T>(std::move(out), {x, weight, bias}, [g, cin = xs.c](Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& wn = *self.parents[1];
        auto& bn = *self.parents[2];
        const Shape xs = xn.value.shape();
        const Shape ys = self.value.shape();
        Buffer<T> cols(static_cast<std::size_t>(g.rows()) * g.cols());
        ConstMatMap<T> wm(wn.value.data(), cin, g.rows());
        for (int n = 0; n < xs.n; ++n) {
            const T* dy = self.grad.data() + n * ys.sample();
            if (bn.requires_grad) {
                auto& db = bn.grad_buffer();
                for (int c = 0; c < ys.c; ++c) {
                    T s = 0;
                    for (std::size_t i = 0; i < ys.plane(); ++i) s += dy[c * ys.plane() + i];
                    db[c] += s;
                }
            }
            im2col(dy, g, cols.data());
            ConstMatMap<T> dcols(cols.data(), g.rows(), g.cols());
            if (wn.requires_grad) {
                MatMap<T> dw(wn.grad_buffer().data(), cin, g.rows());
                dw.noalias() += ConstMatMap<T>(xn.value.data() + n * xs.sample(), cin, g.cols()) * dcols.transpose();
            }
            if (xn.requires_grad) {
                MatMap<T> dx(xn.grad_buffer().data() + n * xs.sample(), cin, g.cols());
                dx.noalias() += wm * dcols;
            }
        }
    });
}

/// Per-sample, per-channel normalization with affine gamma/beta of shape (1, C, 1, 1).
template <typename T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5)) {
    const Shape s = x.shape();
    detail::require(gamma.shape() == Shape{1, s.c, 1, 1} && beta.shape() == gamma.shape(),
                    "instance_norm: affine parameter shape mismatch");
    const std::size_t m = s.plane();
    Tensor<T> xhat(s);
    std::vector<T> inv_std(static_cast<std::size_t>(s.n) * s.c);
    Tensor<T> out(s);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c) {
            const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * m;
            const T* in = x.value().data() + off;
            T mean = 0;
            for (std::size_t i = 0; i < m; ++i) mean += in[i];
            mean /= static_cast<T>(m);
            T var = 0;
            for (std::size_t i = 0; i < m; ++i) var += (in[i] - mean) * (in[i] - mean);
            var /= static_cast<T>(m);
            const T is = T(1) / std::sqrt(var + eps);
            inv_std[n * s.c + c] = is;
            const T ga = gamma.value()[c];
            const T be = beta.value()[c];
            for (std::size_t i = 0; i < m; ++i) {
                const T xh = (in[i] - mean) * is;
                xhat[off + i] = xh;
                out[off + i] = ga * xh + be;
            }
        }
    return make_result<T>(std::move(out), {x, gamma, beta},
                          [xhat = std::move(xhat), inv_std = std::move(inv_std), m](Node<T>& self) {
                              auto& xn = *self.parents[0];
                              auto& gn = *self.parents[1];
                              auto& bn = *self.parents[2];
                              const Shape s = xn.value.shape();
                              for (int n = 0; n < s.n; ++n)
                                  for (int c = 0; c < s.c; ++c) {
                                      const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * m;
                                      const T* dy = self.grad.data() + off;
                                      T sum_dy = 0;
                                      T sum_dy_xh = 0;
                                      for (std::size_t i = 0; i < m; ++i) {
                                          sum_dy += dy[i];
                                          sum_dy_xh += dy[i] * xhat[off + i];
                                      }
                                      if (gn.requires_grad) gn.grad_buffer()[c] += sum_dy_xh;
                                      if (bn.requires_grad) bn.grad_buffer()[c] += sum_dy;
                                      if (xn.requires_grad) {
                                          const T ga = gn.value[c];
                                          const T is = inv_std[n * s.c + c];
                                          const T mm = static_cast<T>(m);
                                          T* dx = xn.grad_buffer().data() + off;
                                          for (std::size_t i = 0; i < m; ++i) {
                                              dx[i] += ga * is / mm * (mm * dy[i] - sum_dy - xhat[off + i] * sum_dy_xh);
                                          }
                                      }
                                  }
                          });
}

namespace detail {

template <typename T, typename F, typename DF>
Var<T> unary(const Var<T>& x, F f, DF df) {
    Tensor<T> out(x.shape());
    const auto& in = x.value();
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
    return make_result<T>(std::move(out), {x}, [df](Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& g = xn.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(xn.value[i], self.value[i]);
    });
}

}  // namespace detail

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope = T(0.2)) {
    return detail::unary(
        x, [slope](T v) { return v > 0 ? v : slope * v; }, [slope](T v, T) { return v > 0 ? T(1) : slope; });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
    return detail::unary(
        x, [](T v) { return v > 0 ? v : T(0); }, [](T v, T) { return v > 0 ? T(1) : T(0); });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
    return detail::unary(
        x, [](T v) { return T(1) / (T(1) + std::exp(-v)); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
    return detail::unary(
        x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

/// Element-wise clamp; gradient passes only strictly inside the interval.
template <typename T>
Var<T> clamp(const Var<T>& x, T lo, T hi) {
    return detail::unary(
        x, [lo, hi](T v) { return std::min(hi, std::max(lo, v)); },
        [lo, hi](T v, T) { return (v > lo && v < hi) ? T(1) : T(0); });
}

/// Inverted dropout. With training=false or p=0 this is the identity.
template <typename T>
Var<T> dropout(const Var<T>& x, T p, bool training, std::mt19937_64& rng) {
    if (!training || p <= T(0)) return x;
    std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
    const T scale = T(1) / (T(1) - p);
    Tensor<T> mask(x.shape());
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        mask[i] = keep(rng) ? scale : T(0);
        out[i] = x.value()[i] * mask[i];
    }
    return make_result<T>(std::move(out), {x}, [mask = std::move(mask)](Node<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
    });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    detail::require(a.shape() == b.shape(), "add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    Tensor<T> out = a.value();
    out += b.value();
    return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
        for (int k = 0; k < 2; ++k) {
            auto& p = *self.parents[k];
            if (p.requires_grad) p.grad_buffer() += self.grad;
        }
    });
}

/// Concatenation along the channel axis.
template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts) {
    detail::require(!parts.empty(), "concat_channels: no inputs");
    Shape s = parts.front().shape();
    int channels = 0;
    for (const auto& p : parts) {
        detail::require(p.shape().n == s.n && p.shape().h == s.h && p.shape().w == s.w,
                        "concat_channels: spatial/batch mismatch " + s.str() + " vs " + p.shape().str());
        channels += p.shape().c;
    }
    s.c = channels;
    Tensor<T> out(s);
    std::vector<int> offsets;
    for (int n = 0; n < s.n; ++n) {
        T* dst = out.data() + n * s.sample();
        for (const auto& p : parts) {
            const auto len = p.shape().sample();
            std::copy_n(p.value().data() + n * len, len, dst);
            dst += len;
        }
    }
    return make_result<T>(std::move(out), parts, [](Node<T>& self) {
        const Shape s = self.value.shape();
        std::size_t offset = 0;
        for (auto& pp : self.parents) {
            const auto len = pp->value.shape().sample();
            if (pp->requires_grad) {
                auto& g = pp->grad_buffer();
                for (int n = 0; n < s.n; ++n) {
                    const T* src = self.grad.data() + n * s.sample() + offset;
                    T* dst = g.data() + n * len;
                    for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
                }
            }
            offset += len;
        }
    });
}

template <typename T>
Var<T> pixel_shuffle(const Var<T>& x, int r) {
    return make_result<T>(pixel_shuffle(x.value(), r), {x}, [r](Node<T>& self) {
        self.parents[0]->grad_buffer() += pixel_unshuffle(self.grad, r);
    });
}

/// (N, C, 1, 1) -> (N, C, H, W) by spatial replication.
template <typename T>
Var<T> tile_spatial(const Var<T>& x, int h, int w) {
    const Shape s = x.shape();
    detail::require(s.h == 1 && s.w == 1, "tile_spatial: expects (N,C,1,1), got " + s.str());
    Tensor<T> out({s.n, s.c, h, w});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c) {
            const T v = x.value().at(n, c, 0, 0);
            std::fill_n(out.data() + out.index(n, c, 0, 0), static_cast<std::size_t>(h) * w, v);
        }
    return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        const Shape s = self.value.shape();
        for (int n = 0; n < s.n; ++n)
            for (int c = 0; c < s.c; ++c) {
                const T* src = self.grad.data() + self.value.index(n, c, 0, 0);
                T acc = 0;
                for (std::size_t i = 0; i < s.plane(); ++i) acc += src[i];
                g.at(n, c, 0, 0) += acc;
            }
    });
}

/// (N, C, H, W) -> (N, C, 1, 1) spatial mean.
template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
    const Shape s = x.shape();
    Tensor<T> out({s.n, s.c, 1, 1});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c) {
            const T* src = x.value().data() + x.value().index(n, c, 0, 0);
            T acc = 0;
            for (std::size_t i = 0; i < s.plane(); ++i) acc += src[i];
            out.at(n, c, 0, 0) = acc / static_cast<T>(s.plane());
        }
    return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& g = xn.grad_buffer();
        const Shape s = xn.value.shape();
        for (int n = 0; n < s.n; ++n)
            for (int c = 0; c < s.c; ++c) {
                const T d = self.grad.at(n, c, 0, 0) / static_cast<T>(s.plane());
                T* dst = g.data() + g.index(n, c, 0, 0);
                for (std::size_t i = 0; i < s.plane(); ++i) dst[i] += d;
            }
    });
}

/// z = mu + exp(logvar / 2) * eps, with eps a fixed noise tensor.
template <typename T>
Var<T> reparameterize(const Var<T>& mu, const Var<T>& logvar, const Tensor<T>& eps) {
    detail::require(mu.shape() == logvar.shape() && eps.shape() == mu.shape(), "reparameterize: shape mismatch");
    Tensor<T> out(mu.shape());
    Tensor<T> sigma(mu.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        sigma[i] = std::exp(logvar.value()[i] / T(2));
        out[i] = mu.value()[i] + sigma[i] * eps[i];
    }
    return make_result<T>(std::move(out), {mu, logvar}, [sigma = std::move(sigma), eps](Node<T>& self) {
        auto& mn = *self.parents[0];
        auto& ln = *self.parents[1];
        if (mn.requires_grad) mn.grad_buffer() += self.grad;
        if (ln.requires_grad) {
            auto& g = ln.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * eps[i] * sigma[i] / T(2);
        }
    });
}

// ---------------------------------------------------------------- losses

/// mean |a - b|; either side may be a constant leaf.
template <typename T>
Var<T> l1_loss(const Var<T>& a, const Var<T>& b) {
    detail::require(a.shape() == b.shape(), "l1_loss: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    const auto& av = a.value();
    const auto& bv = b.value();
    T acc = 0;
    for (std::size_t i = 0; i < av.size(); ++i) acc += std::abs(av[i] - bv[i]);
    const T inv = T(1) / static_cast<T>(av.size());
    return make_result<T>(detail::scalar_tensor(acc * inv), {a, b}, [inv](Node<T>& self) {
        auto& an = *self.parents[0];
        auto& bn = *self.parents[1];
        const T g = self.grad[0] * inv;
        for (std::size_t i = 0; i < an.value.size(); ++i) {
            const T d = an.value[i] - bn.value[i];
            const T sgn = d > 0 ? T(1) : (d < 0 ? T(-1) : T(0));
            if (an.requires_grad) an.grad_buffer()[i] += g * sgn;
            if (bn.requires_grad) bn.grad_buffer()[i] -= g * sgn;
        }
    });
}

/// mean (x - target)^2 against a constant target value.
template <typename T>
Var<T> mse_to_constant(const Var<T>& x, T target) {
    const auto& v = x.value();
    T acc = 0;
    for (std::size_t i = 0; i < v.size(); ++i) acc += (v[i] - target) * (v[i] - target);
    const T inv = T(1) / static_cast<T>(v.size());
    return make_result<T>(detail::scalar_tensor(acc * inv), {x}, [inv, target](Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& g = xn.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * inv * T(2) * (xn.value[i] - target);
    });
}

/// mean binary cross-entropy between sigmoid(logits) and a constant label.
template <typename T>
Var<T> bce_with_logits(const Var<T>& logits, T label) {
    const auto& v = logits.value();
    T acc = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const T x = v[i];
        // max(x,0) - x*label + log(1 + exp(-|x|))
        acc += std::max(x, T(0)) - x * label + std::log1p(std::exp(-std::abs(x)));
    }
    const T inv = T(1) / static_cast<T>(v.size());
    return make_result<T>(detail::scalar_tensor(acc * inv), {logits}, [inv, label](Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& g = xn.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const T p = T(1) / (T(1) + std::exp(-xn.value[i]));
            g[i] += self.grad[0] * inv * (p - label);
        }
    });
}

/// KL(N(mu, exp(logvar)) || N(0, I)) summed over latent dims, averaged over the batch.
template <typename T>
Var<T> kl_divergence(const Var<T>& mu, const Var<T>& logvar) {
    detail::require(mu.shape() == logvar.shape(), "kl_divergence: shape mismatch");
    const auto& m = mu.value();
    const auto& lv = logvar.value();
    T acc = 0;
    for (std::size_t i = 0; i < m.size(); ++i) acc += std::exp(lv[i]) + m[i] * m[i] - T(1) - lv[i];
    const T inv_batch = T(1) / static_cast<T>(mu.shape().n);
    return make_result<T>(detail::scalar_tensor(T(0.5) * acc * inv_batch), {mu, logvar}, [inv_batch](Node<T>& self) {
        auto& mn = *self.parents[0];
        auto& ln = *self.parents[1];
        const T g = self.grad[0] * inv_batch;
        if (mn.requires_grad) {
            auto& d = mn.grad_buffer();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += g * mn.value[i];
        }
        if (ln.requires_grad) {
            auto& d = ln.grad_buffer();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += g * T(0.5) * (std::exp(ln.value[i]) - T(1));
        }
    });
}

/// sum_i weight_i * term_i over scalar terms.
template <typename T>
Var<T> weighted_sum(const std::vector<std::pair<T, Var<T>>>& terms) {
    T acc = 0;
    std::vector<Var<T>> inputs;
    std::vector<T> weights;
    for (const auto& [w, v] : terms) {
        acc += w * v.item();
        inputs.push_back(v);
        weights.push_back(w);
    }
    return make_result<T>(detail::scalar_tensor(acc), inputs, [weights](Node<T>& self) {
        for (std::size_t k = 0; k < weights.size(); ++k) {
            auto& p = *self.parents[k];
            if (p.requires_grad) p.grad_buffer()[0] += self.grad[0] * weights[k];
        }
    });
}

}  // namespace docbin::nn
