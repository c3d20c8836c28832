#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "docbin/errors.hpp"
#include "docbin/image.hpp"
#include "docbin/nn/adam.hpp"
#include "docbin/nn/convert.hpp"
#include "docbin/nn/layers.hpp"

namespace docbin::binet {

using nn::Tensor;
using nn::Var;

enum class Upsampling { PixelShuffle, Transpose };

NLOHMANN_JSON_SERIALIZE_ENUM(Upsampling, {{Upsampling::PixelShuffle, "pixel_shuffle"},
                                          {Upsampling::Transpose, "transpose"}})

/// U-Net layout. Stage i of the encoder has width base_width * min(2^i, max_width_mult)
/// and halves the resolution; the decoder mirrors it with long skips by concatenation.
struct GeneratorConfig {
    int in_channels = 3;
    int out_channels = 1;
    int base_width = 64;
    int depth = 4;
    int max_width_mult = 8;
    int bottleneck_blocks = 6;
    bool residual = true;  // residual blocks after every encoder stage and in the bottleneck
    Upsampling upsampling = Upsampling::PixelShuffle;
    double dropout = 0.5;
    int dropout_stages = 3;  // innermost decoder stages that apply dropout

    [[nodiscard]] int width(int stage) const { return base_width * std::min(1 << stage, max_width_mult); }
    [[nodiscard]] int size_multiple() const { return 1 << depth; }

    void validate() const {
        if (in_channels < 1 || out_channels < 1 || base_width < 1) throw ConfigError("generator: non-positive width");
        if (depth < 1 || depth > 8) throw ConfigError("generator: depth must be in [1, 8]");
        if (max_width_mult < 1) throw ConfigError("generator: max_width_mult must be >= 1");
        if (bottleneck_blocks < 0 || dropout_stages < 0) throw ConfigError("generator: negative block count");
        if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("generator: dropout must be in [0, 1)");
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GeneratorConfig, in_channels, out_channels, base_width, depth,
                                                max_width_mult, bottleneck_blocks, residual, upsampling, dropout,
                                                dropout_stages)

/// PatchGAN: n_layers stride-2 convs, one stride-1 conv, then a 1-channel stride-1 head.
struct DiscriminatorConfig {
    int in_channels = 4;
    int base_width = 64;
    int n_layers = 3;
    int max_width_mult = 8;
    bool instance_norm = false;

    void validate() const {
        if (in_channels < 1 || base_width < 1 || n_layers < 1 || max_width_mult < 1) {
            throw ConfigError("discriminator: non-positive size parameter");
        }
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DiscriminatorConfig, in_channels, base_width, n_layers,
                                                max_width_mult, instance_norm)

struct BiNetHyper {
    double lambda_l1 = 100.0;
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    int pretrain_epochs = 5;
    int adv_epochs = 20;

    [[nodiscard]] nn::AdamOptions adam() const { return {lr, beta1, beta2, 1e-8}; }

    void validate() const {
        if (!(lambda_l1 > 0 && lr > 0 && beta1 > 0 && beta2 > 0)) throw ConfigError("binet: hyper-parameters must be positive");
        if (beta1 >= 1 || beta2 >= 1) throw ConfigError("binet: Adam betas must be below 1");
        if (pretrain_epochs < 1 || adv_epochs < 1) throw ConfigError("binet: epochs must be >= 1");
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BiNetHyper, lambda_l1, lr, beta1, beta2, pretrain_epochs, adv_epochs)

struct BiNetConfig {
    GeneratorConfig generator;
    DiscriminatorConfig discriminator;
    BiNetHyper hyper;

    static BiNetConfig paper() { return {}; }

    /// Widths divided by 4 for CPU-scale runs.
    static BiNetConfig desk() {
        BiNetConfig c;
        c.generator.base_width = 16;
        c.discriminator.base_width = 16;
        return c;
    }

    /// The pix2pix-style parent: transposed-convolution upsampling, no residual blocks.
    static BiNetConfig parent(BiNetConfig base) {
        base.generator.upsampling = Upsampling::Transpose;
        base.generator.residual = false;
        return base;
    }

    void validate() const {
        generator.validate();
        discriminator.validate();
        hyper.validate();
        if (discriminator.in_channels != generator.in_channels + generator.out_channels) {
            throw ConfigError("binet: discriminator must see input and candidate channels");
        }
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BiNetConfig, generator, discriminator, hyper)

inline const BiNetConfig& validated(const BiNetConfig& c) {
    c.validate();
    return c;
}

// ------------------------------------------------------------------ generator

template <typename T>
class EncoderStage {
public:
    EncoderStage() = default;
    EncoderStage(int in_ch, int out_ch, bool norm, bool residual, std::mt19937_64& rng)
        : down_(in_ch, out_ch, 4, 2, 1, rng), use_norm_(norm), use_res_(residual) {
        if (norm) norm_ = nn::InstanceNorm<T>(out_ch);
        if (residual) res_ = nn::ResidualBlock<T>(out_ch, rng);
    }

    Var<T> operator()(const Var<T>& x) const {
        auto h = down_(x);
        if (use_norm_) h = norm_(h);
        h = nn::leaky_relu(h);
        return use_res_ ? res_(h) : h;
    }

    void collect(const std::string& prefix, nn::ParamList<T>& out) const {
        down_.collect(prefix + ".down", out);
        if (use_norm_) norm_.collect(prefix + ".norm", out);
        if (use_res_) res_.collect(prefix + ".res", out);
    }

private:
    nn::Conv2d<T> down_;
    nn::InstanceNorm<T> norm_;
    nn::ResidualBlock<T> res_;
    bool use_norm_ = true;
    bool use_res_ = true;
};

/// x2 upsampling. PixelShuffle: conv3x3 to 4*out channels then periodic shuffle.
/// Transpose: 4x4 stride-2 transposed conv. Non-final stages add IN + ReLU (+ dropout).
template <typename T>
class DecoderStage {
public:
    DecoderStage() = default;
    DecoderStage(int in_ch, int out_ch, Upsampling mode, bool final, T dropout, std::mt19937_64& rng)
        : mode_(mode), final_(final), dropout_(dropout) {
        if (mode == Upsampling::PixelShuffle) {
            conv_ = nn::Conv2d<T>(in_ch, out_ch * 4, 3, 1, 1, rng);
        } else {
            up_ = nn::ConvTranspose2d<T>(in_ch, out_ch, 4, 2, 1, rng);
        }
        if (!final) norm_ = nn::InstanceNorm<T>(out_ch);
    }

    Var<T> operator()(const Var<T>& x, bool training, std::mt19937_64& rng) const {
        auto h = mode_ == Upsampling::PixelShuffle ? nn::pixel_shuffle(conv_(x), 2) : up_(x);
        if (final_) return nn::sigmoid(h);
        h = nn::relu(norm_(h));
        return nn::dropout(h, dropout_, training, rng);
    }

    void collect(const std::string& prefix, nn::ParamList<T>& out) const {
        if (mode_ == Upsampling::PixelShuffle) {
            conv_.collect(prefix + ".conv", out);
        } else {
            up_.collect(prefix + ".up", out);
        }
        if (!final_) norm_.collect(prefix + ".norm", out);
    }

    [[nodiscard]] Upsampling mode() const { return mode_; }

private:
    Upsampling mode_ = Upsampling::PixelShuffle;
    bool final_ = false;
    T dropout_ = 0;
    nn::Conv2d<T> conv_;
    nn::ConvTranspose2d<T> up_;
    nn::InstanceNorm<T> norm_;
};

template <typename T>
class UNetGenerator {
public:
    UNetGenerator() = default;
    UNetGenerator(const GeneratorConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
        cfg_.validate();
        int in = cfg_.in_channels;
        for (int i = 0; i < cfg_.depth; ++i) {
            encoder_.emplace_back(in, cfg_.width(i), i > 0, cfg_.residual, rng);
            in = cfg_.width(i);
        }
        if (cfg_.residual) {
            for (int b = 0; b < cfg_.bottleneck_blocks; ++b) bottleneck_.emplace_back(in, rng);
        }
        // decoder_[j] produces the resolution of encoder stage j-1 (j=0 is the output head).
        decoder_.resize(static_cast<std::size_t>(cfg_.depth));
        for (int j = cfg_.depth - 1; j >= 0; --j) {
            const int stage_in = j == cfg_.depth - 1 ? cfg_.width(j) : 2 * cfg_.width(j);
            const bool final = j == 0;
            const int stage_out = final ? cfg_.out_channels : cfg_.width(j - 1);
            const bool drop = !final && j >= cfg_.depth - cfg_.dropout_stages;
            decoder_[static_cast<std::size_t>(j)] =
                DecoderStage<T>(stage_in, stage_out, cfg_.upsampling, final, drop ? T(cfg_.dropout) : T(0), rng);
        }
        skip_enabled_.assign(static_cast<std::size_t>(std::max(0, cfg_.depth - 1)), true);
    }

    /// x is (N, in_channels, H, W) with H and W divisible by 2^depth; output is in (0, 1).
    Var<T> operator()(const Var<T>& x, bool training, std::mt19937_64& rng) const {
        const auto s = x.shape();
        if (s.c != cfg_.in_channels) {
            throw ArgumentError("generator: expected " + std::to_string(cfg_.in_channels) + " channels, got " +
                                std::to_string(s.c));
        }
        const int m = cfg_.size_multiple();
        if (s.h % m != 0 || s.w % m != 0 || s.h == 0 || s.w == 0) {
            throw ArgumentError("generator: input " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                                " is not a multiple of " + std::to_string(m));
        }
        std::vector<Var<T>> skips;
        auto h = x;
        for (const auto& stage : encoder_) {
            h = stage(h);
            skips.push_back(h);
        }
        for (const auto& block : bottleneck_) h = block(h);
        for (int j = cfg_.depth - 1; j >= 0; --j) {
            h = decoder_[static_cast<std::size_t>(j)](h, training, rng);
            if (j == 0) break;
            const auto& skip = skips[static_cast<std::size_t>(j - 1)];
            const auto bridge = skip_enabled_[static_cast<std::size_t>(j - 1)] ? skip : Var<T>(Tensor<T>(skip.shape()));
            h = nn::concat_channels<T>({h, bridge});
        }
        return h;
    }

    /// Deterministic inference (dropout off).
    Var<T> operator()(const Var<T>& x) const {
        std::mt19937_64 unused(0);
        return (*this)(x, false, unused);
    }

    /// Long skip from encoder stage `stage` (0-based, < depth-1); disabled skips feed zeros.
    void set_skip_enabled(int stage, bool enabled) { skip_enabled_.at(static_cast<std::size_t>(stage)) = enabled; }

    void collect(const std::string& prefix, nn::ParamList<T>& out) const {
        for (std::size_t i = 0; i < encoder_.size(); ++i) encoder_[i].collect(prefix + ".enc" + std::to_string(i), out);
        for (std::size_t b = 0; b < bottleneck_.size(); ++b) {
            bottleneck_[b].collect(prefix + ".bottleneck" + std::to_string(b), out);
        }
        for (std::size_t j = decoder_.size(); j-- > 0;) decoder_[j].collect(prefix + ".dec" + std::to_string(j), out);
    }

    [[nodiscard]] nn::ParamList<T> parameters(const std::string& prefix = "generator") const {
        nn::ParamList<T> out;
        collect(prefix, out);
        return out;
    }

    [[nodiscard]] const GeneratorConfig& config() const { return cfg_; }
    [[nodiscard]] const std::vector<DecoderStage<T>>& decoder() const { return decoder_; }
    [[nodiscard]] std::size_t residual_block_count() const {
        return bottleneck_.size() + (cfg_.residual ? encoder_.size() : 0);
    }

private:
    GeneratorConfig cfg_;
    std::vector<EncoderStage<T>> encoder_;
    std::vector<nn::ResidualBlock<T>> bottleneck_;
    std::vector<DecoderStage<T>> decoder_;
    std::vector<bool> skip_enabled_;
};

// -------------------------------------------------------------- discriminator

struct ConvSpec {
    int kernel;
    int stride;
    int pad;
};

inline std::vector<ConvSpec> patch_layers(const DiscriminatorConfig& cfg) {
    std::vector<ConvSpec> layers(static_cast<std::size_t>(cfg.n_layers), ConvSpec{4, 2, 1});
    layers.push_back({4, 1, 1});
    layers.push_back({4, 1, 1});
    return layers;
}

/// Side of the input window seen by one output score.
inline int receptive_field(const DiscriminatorConfig& cfg) {
    int rf = 1;
    const auto layers = patch_layers(cfg);
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) rf = (rf - 1) * it->stride + it->kernel;
    return rf;
}

inline int score_map_size(const DiscriminatorConfig& cfg, int input) {
    int s = input;
    for (const auto& l : patch_layers(cfg)) s = (s + 2 * l.pad - l.kernel) / l.stride + 1;
    return s;
}

template <typename T>
class PatchDiscriminator {
public:
    PatchDiscriminator() = default;
    PatchDiscriminator(const DiscriminatorConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
        cfg_.validate();
        const auto layers = patch_layers(cfg_);
        int in = cfg_.in_channels;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const bool head = i + 1 == layers.size();
            const int out = head ? 1 : cfg_.base_width * std::min(1 << i, cfg_.max_width_mult);
            convs_.emplace_back(in, out, layers[i].kernel, layers[i].stride, layers[i].pad, rng);
            if (cfg_.instance_norm && i > 0 && !head) norms_.emplace_back(out);
            else norms_.emplace_back();
            in = out;
        }
    }

    /// Raw score logits, (N, 1, h, w).
    Var<T> operator()(const Var<T>& x) const {
        auto h = x;
        for (std::size_t i = 0; i < convs_.size(); ++i) {
            h = convs_[i](h);
            if (i + 1 == convs_.size()) break;
            if (cfg_.instance_norm && i > 0) h = norms_[i](h);
            h = nn::leaky_relu(h);
        }
        return h;
    }

    /// Conditional form: scores the channel concatenation of condition and candidate.
    Var<T> operator()(const Var<T>& condition, const Var<T>& candidate) const {
        if (condition.shape().h != candidate.shape().h || condition.shape().w != candidate.shape().w) {
            throw ArgumentError("discriminator: condition and candidate differ in size");
        }
        return (*this)(nn::concat_channels<T>({condition, candidate}));
    }

    void collect(const std::string& prefix, nn::ParamList<T>& out) const {
        for (std::size_t i = 0; i < convs_.size(); ++i) {
            convs_[i].collect(prefix + ".conv" + std::to_string(i), out);
            if (cfg_.instance_norm && i > 0 && i + 1 < convs_.size()) norms_[i].collect(prefix + ".norm" + std::to_string(i), out);
        }
    }

    [[nodiscard]] nn::ParamList<T> parameters(const std::string& prefix = "discriminator") const {
        nn::ParamList<T> out;
        collect(prefix, out);
        return out;
    }

    [[nodiscard]] const DiscriminatorConfig& config() const { return cfg_; }

private:
    DiscriminatorConfig cfg_;
    std::vector<nn::Conv2d<T>> convs_;
    std::vector<nn::InstanceNorm<T>> norms_;
};

// --------------------------------------------------------------------- model

template <typename T>
struct BiNet {
    BiNetConfig config;
    UNetGenerator<T> generator;
    PatchDiscriminator<T> discriminator;

    BiNet() = default;
    BiNet(const BiNetConfig& cfg, std::mt19937_64& rng)
        : config(validated(cfg)), generator(cfg.generator, rng), discriminator(cfg.discriminator, rng) {}

    [[nodiscard]] nn::ParamList<T> generator_parameters() const { return generator.parameters("generator"); }
    [[nodiscard]] nn::ParamList<T> discriminator_parameters() const { return discriminator.parameters("discriminator"); }
};

// -------------------------------------------------------------------- losses

namespace detail {
inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
}  // namespace detail

/// E[log D(x, y)] + E[log(1 - D(x, G(x)))] with D = sigmoid(logits). The
/// discriminator maximizes this value.
template <typename T>
double cgan_value(const Tensor<T>& d_real_logits, const Tensor<T>& d_fake_logits) {
    double real = 0;
    double fake = 0;
    for (T v : d_real_logits.values()) real -= detail::softplus(-static_cast<double>(v));
    for (T v : d_fake_logits.values()) fake -= detail::softplus(static_cast<double>(v));
    return real / static_cast<double>(d_real_logits.size()) + fake / static_cast<double>(d_fake_logits.size());
}

template <typename T>
struct BiNetTerms {
    Var<T> cgan;   // -E[log D(x, G(x))]; zero when not adversarial
    Var<T> l1;     // mean |y - G(x)|
    Var<T> total;  // cgan + lambda * l1 (just l1 when not adversarial)
    Var<T> fake;   // G(x)
};

/// Generator-side objective. x: (N, 3, H, W) degraded input, y: (N, 1, H, W) rendered ground truth.
template <typename T>
BiNetTerms<T> binet_objective(const BiNet<T>& net, const Var<T>& x, const Var<T>& y, bool adversarial, bool training,
                              std::mt19937_64& rng) {
    BiNetTerms<T> t;
    t.fake = net.generator(x, training, rng);
    t.l1 = nn::l1_loss(t.fake, y);
    if (!adversarial) {
        t.cgan = Var<T>(Tensor<T>::scalar(T(0)));
        t.total = t.l1;
        return t;
    }
    t.cgan = nn::bce_with_logits(net.discriminator(x, t.fake), T(1));
    t.total = nn::weighted_sum<T>({{T(1), t.cgan}, {static_cast<T>(net.config.hyper.lambda_l1), t.l1}});
    return t;
}

/// Discriminator loss -L_cGAN on a real pair and a (detached) fake.
template <typename T>
Var<T> discriminator_loss(const PatchDiscriminator<T>& d, const Var<T>& x, const Var<T>& y, const Var<T>& fake) {
    const auto real = nn::bce_with_logits(d(x, y), T(1));
    const auto other = nn::bce_with_logits(d(x, fake.detach()), T(0));
    return nn::weighted_sum<T>({{T(1), real}, {T(1), other}});
}

// ----------------------------------------------------------------- inference

template <typename T>
RasterImage generator_forward(const UNetGenerator<T>& g, const RasterImage& img) {
    const auto x = Var<T>(nn::image_to_tensor<T>(img.channels() == 3 ? img : to_rgb(img)));
    return nn::tensor_to_image(g(x).value());
}

template <typename T>
Tensor<T> discriminator_forward(const PatchDiscriminator<T>& d, const RasterImage& input, const RasterImage& candidate) {
    const auto x = Var<T>(nn::image_to_tensor<T>(input));
    const auto y = Var<T>(nn::image_to_tensor<T>(candidate));
    return d(x, y).value();
}

struct TilingOptions {
    int tile = 256;
    int overlap = 64;

    void validate(int multiple) const {
        if (tile < 1 || tile % multiple != 0) {
            throw ArgumentError("binarize: tile " + std::to_string(tile) + " must be a positive multiple of " +
                                std::to_string(multiple));
        }
        if (overlap < 0 || overlap >= tile) throw ArgumentError("binarize: overlap must be in [0, tile)");
    }
};

/// Generator output over an arbitrary-size image: overlapping tiles (stride tile - overlap)
/// on a reflection-padded canvas, overlaps averaged.
template <typename T>
RasterImage probability_map(const UNetGenerator<T>& g, const RasterImage& img, const TilingOptions& opt = {}) {
    opt.validate(g.config().size_multiple());
    const auto rgb = img.channels() == 3 ? img : to_rgb(img);
    const auto canvas = reflect_pad(rgb, opt.tile, opt.tile);
    const int stride = opt.tile - opt.overlap;
    std::vector<int> ys;
    std::vector<int> xs;
    for (int y = 0;; y += stride) {
        ys.push_back(std::min(y, canvas.height() - opt.tile));
        if (y + opt.tile >= canvas.height()) break;
    }
    for (int x = 0;; x += stride) {
        xs.push_back(std::min(x, canvas.width() - opt.tile));
        if (x + opt.tile >= canvas.width()) break;
    }
    std::vector<double> sum(static_cast<std::size_t>(canvas.height()) * canvas.width(), 0.0);
    std::vector<int> hits(sum.size(), 0);
    for (int y0 : ys)
        for (int x0 : xs) {
            const auto out = g(Var<T>(nn::image_to_tensor<T>(crop(canvas, y0, x0, opt.tile, opt.tile)))).value();
            for (int y = 0; y < opt.tile; ++y)
                for (int x = 0; x < opt.tile; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y0 + y) * canvas.width() + (x0 + x);
                    sum[i] += static_cast<double>(out.at(0, 0, y, x));
                    ++hits[i];
                }
        }
    std::vector<float> prob(static_cast<std::size_t>(img.height()) * img.width());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * canvas.width() + x;
            prob[static_cast<std::size_t>(y) * img.width() + x] =
                static_cast<float>(std::clamp(sum[i] / hits[i], 0.0, 1.0));
        }
    return {img.height(), img.width(), 1, std::move(prob)};
}

/// Pixels whose averaged generator output falls below 0.5 are ink.
template <typename T>
BinaryMask binarize(const UNetGenerator<T>& g, const RasterImage& img, const TilingOptions& opt = {}) {
    return image_to_mask(probability_map(g, img, opt), 0.5f);
}

}  // namespace docbin::binet
