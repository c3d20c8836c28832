#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "docbin/binet.hpp"

namespace docbin::augnet {

using binet::DiscriminatorConfig;
using binet::GeneratorConfig;
using nn::Tensor;
using nn::Var;

enum class AdversarialLoss { LeastSquares, Logistic };

NLOHMANN_JSON_SERIALIZE_ENUM(AdversarialLoss, {{AdversarialLoss::LeastSquares, "least_squares"},
                                               {AdversarialLoss::Logistic, "logistic"}})

inline constexpr double kLogvarLimit = 10.0;

struct AugNetHyper {
    double lambda_img = 10.0;
    double lambda_latent = 0.5;
    double lambda_kl = 0.01;
    int z_dim = 8;
    AdversarialLoss adversarial = AdversarialLoss::LeastSquares;
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    int epochs = 6;

    [[nodiscard]] nn::AdamOptions adam() const { return {lr, beta1, beta2, 1e-8}; }

    void validate() const {
        if (!(lambda_img > 0 && lambda_latent > 0 && lambda_kl > 0 && lr > 0)) {
            throw ConfigError("augnet: loss weights and learning rate must be positive");
        }
        if (z_dim < 1) throw ConfigError("augnet: z_dim must be >= 1");
        if (!(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1)) throw ConfigError("augnet: Adam betas must lie in (0,1)");
        if (epochs < 1) throw ConfigError("augnet: epochs must be >= 1");
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AugNetHyper, lambda_img, lambda_latent, lambda_kl, z_dim, adversarial,
                                                lr, beta1, beta2, epochs)

/// conv4/s2 -> [IN] -> LeakyReLU -> residual block, n_down times, then global
/// average pooling and two linear heads.
struct EncoderConfig {
    int in_channels = 3;
    int base_width = 64;
    int n_down = 4;
    int max_width_mult = 4;

    void validate() const {
        if (in_channels < 1 || base_width < 1 || n_down < 1 || max_width_mult < 1) {
            throw ConfigError("encoder: non-positive size parameter");
        }
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EncoderConfig, in_channels, base_width, n_down, max_width_mult)

struct AugNetConfig {
    GeneratorConfig generator;
    EncoderConfig encoder;
    DiscriminatorConfig discriminator;
    AugNetHyper hyper;

    /// Generator input = rendered ground truth (1 channel) + tiled z; output = 3-channel image.
    static AugNetConfig paper() {
        AugNetConfig c;
        c.generator.in_channels = 1 + c.hyper.z_dim;
        c.generator.out_channels = 3;
        c.generator.dropout = 0.0;
        c.generator.dropout_stages = 0;
        c.discriminator.in_channels = 1 + 3;
        return c;
    }

    static AugNetConfig desk() {
        auto c = paper();
        c.generator.base_width = 16;
        c.encoder.base_width = 16;
        c.discriminator.base_width = 16;
        return c;
    }

    void validate() const {
        generator.validate();
        encoder.validate();
        discriminator.validate();
        hyper.validate();
        if (generator.in_channels != 1 + hyper.z_dim) throw ConfigError("augnet: generator input must be 1 + z_dim");
        if (generator.out_channels != encoder.in_channels) {
            throw ConfigError("augnet: encoder must read the generator's output channels");
        }
        if (discriminator.in_channels != 1 + generator.out_channels) {
            throw ConfigError("augnet: discriminator must see condition and candidate channels");
        }
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AugNetConfig, generator, encoder, discriminator, hyper)

inline const AugNetConfig& validated(const AugNetConfig& c) {
    c.validate();
    return c;
}

template <typename T>
class LatentEncoder {
public:
    LatentEncoder() = default;
    LatentEncoder(const EncoderConfig& cfg, int z_dim, std::mt19937_64& rng) : cfg_(cfg) {
        cfg_.validate();
        int in = cfg_.in_channels;
        for (int i = 0; i < cfg_.n_down; ++i) {
            const int out = cfg_.base_width * std::min(1 << i, cfg_.max_width_mult);
            stages_.emplace_back(in, out, i > 0, true, rng);
            in = out;
        }
        mu_head_ = nn::Linear<T>(in, z_dim, rng);
        logvar_head_ = nn::Linear<T>(in, z_dim, rng);
    }

    /// (mu, logvar), each (N, z_dim, 1, 1); logvar clamped to [-10, 10].
    std::pair<Var<T>, Var<T>> operator()(const Var<T>& x) const {
        if (x.shape().c != cfg_.in_channels) throw ArgumentError("encoder: unexpected channel count");
        auto h = x;
        for (const auto& s : stages_) h = s(h);
        const auto pooled = nn::global_avg_pool(h);
        const auto lv = nn::clamp(logvar_head_(pooled), static_cast<T>(-kLogvarLimit), static_cast<T>(kLogvarLimit));
        return {mu_head_(pooled), lv};
    }

    void collect(const std::string& prefix, nn::ParamList<T>& out) const {
        for (std::size_t i = 0; i < stages_.size(); ++i) stages_[i].collect(prefix + ".stage" + std::to_string(i), out);
        mu_head_.collect(prefix + ".mu", out);
        logvar_head_.collect(prefix + ".logvar", out);
    }

    /// Input side must be at least 2^n_down.
    [[nodiscard]] int min_size() const { return 1 << cfg_.n_down; }

private:
    EncoderConfig cfg_;
    std::vector<binet::EncoderStage<T>> stages_;
    nn::Linear<T> mu_head_;
    nn::Linear<T> logvar_head_;
};

template <typename T>
struct AugNet {
    AugNetConfig config;
    binet::UNetGenerator<T> generator;
    LatentEncoder<T> encoder;
    binet::PatchDiscriminator<T> discriminator;

    AugNet() = default;
    AugNet(const AugNetConfig& cfg, std::mt19937_64& rng)
        : config(validated(cfg)),
          generator(cfg.generator, rng),
          encoder(cfg.encoder, cfg.hyper.z_dim, rng),
          discriminator(cfg.discriminator, rng) {}

    /// Generator and encoder are optimized jointly.
    [[nodiscard]] nn::ParamList<T> generator_encoder_parameters() const {
        nn::ParamList<T> out;
        generator.collect("generator", out);
        encoder.collect("encoder", out);
        return out;
    }

    [[nodiscard]] nn::ParamList<T> discriminator_parameters() const { return discriminator.parameters("discriminator"); }

    /// G(A, z): z (N, z_dim, 1, 1) is tiled over the image and concatenated to A.
    Var<T> generate(const Var<T>& a, const Var<T>& z) const {
        const auto s = a.shape();
        if (z.shape().n != s.n || z.shape().c != config.hyper.z_dim || z.shape().h != 1 || z.shape().w != 1) {
            throw ArgumentError("augnet: z must be (N, " + std::to_string(config.hyper.z_dim) + ", 1, 1)");
        }
        std::mt19937_64 unused(0);
        return generator(nn::concat_channels<T>({a, nn::tile_spatial(z, s.h, s.w)}), false, unused);
    }
};

// -------------------------------------------------------------- latent space

struct GaussianParams {
    std::vector<double> mu;
    std::vector<double> logvar;
};

/// Posterior parameters of a single degraded image.
template <typename T>
GaussianParams encode(const AugNet<T>& net, const RasterImage& target) {
    if (target.channels() != net.config.encoder.in_channels) throw ArgumentError("encode: expects a 3-channel image");
    const int m = net.encoder.min_size();
    if (target.height() < m || target.width() < m) {
        throw ArgumentError("encode: image smaller than " + std::to_string(m) + "x" + std::to_string(m));
    }
    const auto [mu, logvar] = net.encoder(Var<T>(nn::image_to_tensor<T>(target)));
    GaussianParams out;
    for (T v : mu.value().values()) out.mu.push_back(static_cast<double>(v));
    for (T v : logvar.value().values()) out.logvar.push_back(static_cast<double>(v));
    return out;
}

inline std::vector<double> reparameterize(const GaussianParams& p, std::mt19937_64& rng) {
    if (p.mu.size() != p.logvar.size()) throw ArgumentError("reparameterize: mu and logvar differ in length");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> z(p.mu.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double lv = std::clamp(p.logvar[i], -kLogvarLimit, kLogvarLimit);
        z[i] = p.mu[i] + std::exp(lv / 2) * normal(rng);
    }
    return z;
}

/// 0.5 * sum_d (exp(logvar) + mu^2 - 1 - logvar).
inline double kl_loss(const GaussianParams& p) {
    double acc = 0;
    for (std::size_t i = 0; i < p.mu.size(); ++i) {
        acc += std::exp(p.logvar[i]) + p.mu[i] * p.mu[i] - 1.0 - p.logvar[i];
    }
    return 0.5 * acc;
}

template <typename T>
Tensor<T> standard_normal(nn::Shape s, std::mt19937_64& rng) {
    Tensor<T> t(s);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : t.values()) v = static_cast<T>(normal(rng));
    return t;
}

/// Degraded rendering of a mask for a given latent code.
template <typename T>
RasterImage generate(const AugNet<T>& net, const BinaryMask& gt, const std::vector<double>& z) {
    if (static_cast<int>(z.size()) != net.config.hyper.z_dim) throw ArgumentError("generate: wrong latent length");
    Tensor<T> zt({1, net.config.hyper.z_dim, 1, 1});
    for (std::size_t i = 0; i < z.size(); ++i) zt[i] = static_cast<T>(z[i]);
    const int m = net.generator.config().size_multiple();
    const int h = (gt.height() + m - 1) / m * m;
    const int w = (gt.width() + m - 1) / m * m;
    const auto padded = reflect_pad(gt, h, w);
    const auto out = net.generate(Var<T>(nn::masks_to_tensor<T>({padded})), Var<T>(zt));
    return crop(nn::tensor_to_image(out.value()), 0, 0, gt.height(), gt.width());
}

/// n images G(render(gt), z_i) with z_i ~ N(0, I).
template <typename T>
std::vector<RasterImage> sample_degraded(const AugNet<T>& net, const BinaryMask& gt, int n, std::mt19937_64& rng) {
    if (n < 0) throw ArgumentError("sample_degraded: negative count");
    std::vector<RasterImage> out;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        std::vector<double> z(static_cast<std::size_t>(net.config.hyper.z_dim));
        for (auto& v : z) v = normal(rng);
        out.push_back(generate(net, gt, z));
    }
    return out;
}

// ------------------------------------------------------------------ objective

template <typename T>
Var<T> adversarial_term(AdversarialLoss kind, const Var<T>& scores, T label) {
    return kind == AdversarialLoss::LeastSquares ? nn::mse_to_constant(scores, label)
                                                 : nn::bce_with_logits(scores, label);
}

template <typename T>
struct AugNetTerms {
    Var<T> gan_vae;    // adversarial term on G(A, z), z from the posterior of B
    Var<T> l1_vae;     // |B - G(A, z)|
    Var<T> gan_lr;     // adversarial term on G(A, z'), z' from the prior
    Var<T> l1_latent;  // |z' - mu(E(G(A, z')))|
    Var<T> kl;
    Var<T> total;
    Var<T> fake_vae;
    Var<T> fake_lr;
};

/// Noise for one objective evaluation: eps_vae for the posterior sample, z_prior for the cLR branch.
template <typename T>
struct LatentNoise {
    Tensor<T> eps_vae;
    Tensor<T> z_prior;

    static LatentNoise draw(int batch, int z_dim, std::mt19937_64& rng) {
        return {standard_normal<T>({batch, z_dim, 1, 1}, rng), standard_normal<T>({batch, z_dim, 1, 1}, rng)};
    }
};

/// Generator/encoder objective. a: (N, 1, H, W) rendered ground truth, b: (N, 3, H, W) degraded image.
template <typename T>
AugNetTerms<T> augnet_objective(const AugNet<T>& net, const Var<T>& a, const Var<T>& b, const LatentNoise<T>& noise) {
    const auto& hp = net.config.hyper;
    AugNetTerms<T> t;

    const auto [mu, logvar] = net.encoder(b);
    const auto z = nn::reparameterize(mu, logvar, noise.eps_vae);
    t.fake_vae = net.generate(a, z);
    t.gan_vae = adversarial_term(hp.adversarial, net.discriminator(a, t.fake_vae), T(1));
    t.l1_vae = nn::l1_loss(t.fake_vae, b);
    t.kl = nn::kl_divergence(mu, logvar);

    const auto z_prior = Var<T>(noise.z_prior);
    t.fake_lr = net.generate(a, z_prior);
    t.gan_lr = adversarial_term(hp.adversarial, net.discriminator(a, t.fake_lr), T(1));
    const auto mu_fake = net.encoder(t.fake_lr).first;
    t.l1_latent = nn::l1_loss(mu_fake, z_prior);

    t.total = nn::weighted_sum<T>({{T(1), t.gan_vae},
                                   {static_cast<T>(hp.lambda_img), t.l1_vae},
                                   {T(1), t.gan_lr},
                                   {static_cast<T>(hp.lambda_latent), t.l1_latent},
                                   {static_cast<T>(hp.lambda_kl), t.kl}});
    return t;
}

/// Discriminator objective: real pairs toward 1, both kinds of fakes (detached) toward 0.
template <typename T>
Var<T> discriminator_loss(const AugNet<T>& net, const Var<T>& a, const Var<T>& b, const Var<T>& fake_vae,
                          const Var<T>& fake_lr) {
    const auto kind = net.config.hyper.adversarial;
    const auto real = adversarial_term(kind, net.discriminator(a, b), T(1));
    const auto f1 = adversarial_term(kind, net.discriminator(a, fake_vae.detach()), T(0));
    const auto f2 = adversarial_term(kind, net.discriminator(a, fake_lr.detach()), T(0));
    return nn::weighted_sum<T>({{T(1), real}, {T(0.5), f1}, {T(0.5), f2}});
}

}  // namespace docbin::augnet
