#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "docbin/augnet.hpp"
#include "support/gradcheck.hpp"
#include "support/synthdoc.hpp"
#include "support/toy.hpp"

using namespace docbin;
using namespace docbin::augnet;
using nn::Shape;
using nn::Tensor;
using nn::Var;
namespace synth = docbin::testing;

namespace {

template <typename T>
bool unchanged(const nn::ParamList<T>& params, const std::vector<Tensor<T>>& snap) {
    for (std::size_t k = 0; k < params.size(); ++k)
        if (params[k].var.value().storage() != snap[k].storage()) return false;
    return true;
}

template <typename T>
double grad_norm(const nn::ParamList<T>& params, const std::string& prefix) {
    double acc = 0;
    for (const auto& p : params) {
        if (p.name.rfind(prefix, 0) != 0 || !p.var.has_grad()) continue;
        for (T g : p.var.grad().values()) acc += static_cast<double>(g) * g;
    }
    return std::sqrt(acc);
}

struct ToyBatch {
    Var<double> a;
    Var<double> b;
    LatentNoise<double> noise;
};

ToyBatch toy_batch(const AugNet<double>& net, std::mt19937_64& rng, int n = 1) {
    return {Var<double>(synth::binary_tensor<double>({n, 1, 16, 16}, rng)),
            Var<double>(synth::uniform_tensor<double>({n, 3, 16, 16}, rng)),
            LatentNoise<double>::draw(n, net.config.hyper.z_dim, rng)};
}

}  // namespace

TEST(AugNetConfigTest, Defaults) {
    const auto c = AugNetConfig::paper();
    EXPECT_EQ(c.hyper.lambda_img, 10.0);
    EXPECT_EQ(c.hyper.lambda_latent, 0.5);
    EXPECT_EQ(c.hyper.lambda_kl, 0.01);
    EXPECT_EQ(c.hyper.z_dim, 8);
    EXPECT_EQ(c.hyper.epochs, 6);
    EXPECT_EQ(c.hyper.lr, 2e-4);
    EXPECT_EQ(c.hyper.beta1, 0.5);
    EXPECT_EQ(c.hyper.beta2, 0.999);
    EXPECT_EQ(c.generator.in_channels, 9);
    EXPECT_EQ(c.generator.out_channels, 3);
    EXPECT_NO_THROW(c.validate());
    EXPECT_NO_THROW(AugNetConfig::desk().validate());
}

TEST(AugNetConfigTest, InconsistentLatentWidthIsRejected) {
    auto c = AugNetConfig::desk();
    c.hyper.z_dim = 4;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Kl, ClosedForms) {
    EXPECT_NEAR(kl_loss({std::vector<double>(8, 1.0), std::vector<double>(8, 0.0)}), 4.0, 1e-12);
    EXPECT_EQ(kl_loss({std::vector<double>(8, 0.0), std::vector<double>(8, 0.0)}), 0.0);
    EXPECT_NEAR(kl_loss({{0.0}, {std::log(2.0)}}), 0.5 * (1.0 - std::log(2.0)), 1e-15);
}

TEST(Kl, OperatorAgreesWithClosedForm) {
    const Var<double> mu(Tensor<double>({1, 8, 1, 1}, 1.0));
    const Var<double> logvar(Tensor<double>({1, 8, 1, 1}, 0.0));
    EXPECT_NEAR(nn::kl_divergence(mu, logvar).item(), 4.0, 1e-12);
    // Batch mean of per-sample sums.
    const Var<double> mu2(Tensor<double>({2, 8, 1, 1}, 1.0));
    const Var<double> lv2(Tensor<double>({2, 8, 1, 1}, 0.0));
    EXPECT_NEAR(nn::kl_divergence(mu2, lv2).item(), 4.0, 1e-12);
}

TEST(Reparameterize, MomentsMatchPosterior) {
    const GaussianParams p{{0.5, -2.0}, {0.0, std::log(0.25)}};
    std::mt19937_64 rng(1);
    const int n = 40000;
    double s0 = 0, s1 = 0, q0 = 0, q1 = 0;
    for (int i = 0; i < n; ++i) {
        const auto z = reparameterize(p, rng);
        s0 += z[0];
        s1 += z[1];
        q0 += z[0] * z[0];
        q1 += z[1] * z[1];
    }
    const double m0 = s0 / n;
    const double m1 = s1 / n;
    EXPECT_NEAR(m0, 0.5, 4 * 1.0 / std::sqrt(n));
    EXPECT_NEAR(m1, -2.0, 4 * 0.5 / std::sqrt(n));
    EXPECT_NEAR(q0 / n - m0 * m0, 1.0, 0.03);
    EXPECT_NEAR(q1 / n - m1 * m1, 0.25, 0.0075);
}

TEST(Reparameterize, ClampsExtremeLogvar) {
    std::mt19937_64 rng(2);
    const auto z = reparameterize({{0.0}, {1e6}}, rng);
    EXPECT_TRUE(std::isfinite(z[0]));
    EXPECT_LT(std::abs(z[0]), 20 * std::exp(kLogvarLimit / 2));
}

TEST(Encoder, HeadsAndMinimumSize) {
    std::mt19937_64 rng(3);
    const AugNet<float> net(AugNetConfig::desk(), rng);
    EXPECT_EQ(net.encoder.min_size(), 16);
    const auto p = encode(net, RasterImage(32, 40, 3, 0.7f));
    EXPECT_EQ(p.mu.size(), 8u);
    EXPECT_EQ(p.logvar.size(), 8u);
    for (double v : p.logvar) EXPECT_LE(std::abs(v), kLogvarLimit);
    EXPECT_THROW(encode(net, RasterImage(8, 40, 3, 0.7f)), ArgumentError);
    EXPECT_THROW(encode(net, RasterImage(32, 32, 1, 0.7f)), ArgumentError);
}

TEST(Sampling, DistinctLatentsGiveDistinctImages) {
    std::mt19937_64 rng(4);
    const AugNet<float> net(AugNetConfig::desk(), rng);
    const auto doc = synth::make_document(48, 40, synth::DegradationStyle::seen(), rng);
    const auto imgs = sample_degraded(net, doc.truth, 3, rng);
    ASSERT_EQ(imgs.size(), 3u);
    for (const auto& im : imgs) {
        EXPECT_EQ(im.channels(), 3);
        EXPECT_EQ(im.height(), 48);
        EXPECT_EQ(im.width(), 40);
    }
    double d = 0;
    for (std::size_t i = 0; i < imgs[0].pixels().size(); ++i) d += std::abs(imgs[0].pixels()[i] - imgs[1].pixels()[i]);
    EXPECT_GT(d / static_cast<double>(imgs[0].pixels().size()), 1e-4);
}

TEST(Sampling, SameLatentSameImage) {
    std::mt19937_64 rng(5);
    const AugNet<float> net(AugNetConfig::desk(), rng);
    const auto truth = synth::render_text(32, 32, rng);
    const std::vector<double> z(8, 0.3);
    const auto a = generate(net, truth, z);
    const auto b = generate(net, truth, z);
    EXPECT_TRUE(std::equal(a.pixels().begin(), a.pixels().end(), b.pixels().begin()));
    EXPECT_THROW(generate(net, truth, std::vector<double>(3, 0.0)), ArgumentError);
}

TEST(Objective, TotalIsWeightedSum) {
    std::mt19937_64 rng(6);
    const AugNet<double> net(synth::toy_augnet_config(), rng);
    const auto batch = toy_batch(net, rng, 2);
    const auto t = augnet_objective(net, batch.a, batch.b, batch.noise);
    const double expect = t.gan_vae.item() + 10 * t.l1_vae.item() + t.gan_lr.item() + 0.5 * t.l1_latent.item() +
                          0.01 * t.kl.item();
    EXPECT_NEAR(t.total.item(), expect, 1e-12);
    EXPECT_EQ(t.fake_vae.shape(), (Shape{2, 3, 16, 16}));
}

TEST(Objective, LogvarHeadDoesNotAffectLatentReconstruction) {
    std::mt19937_64 rng(7);
    const AugNet<double> net(synth::toy_augnet_config(), rng);
    const auto batch = toy_batch(net, rng);
    const auto before = augnet_objective(net, batch.a, batch.b, batch.noise);
    for (auto p : net.generator_encoder_parameters()) {
        if (p.name.rfind("encoder.logvar", 0) == 0) {
            for (auto& v : p.var.mutable_value().values()) v += 0.3;
        }
    }
    const auto after = augnet_objective(net, batch.a, batch.b, batch.noise);
    EXPECT_EQ(after.l1_latent.item(), before.l1_latent.item());
    EXPECT_EQ(after.gan_lr.item(), before.gan_lr.item());
    EXPECT_NE(after.kl.item(), before.kl.item());
    EXPECT_NE(after.l1_vae.item(), before.l1_vae.item());
}

TEST(Objective, LatentReconstructionTrainsGeneratorAndEncoder) {
    std::mt19937_64 rng(8);
    const AugNet<double> net(synth::toy_augnet_config(), rng);
    const auto batch = toy_batch(net, rng);
    const auto params = net.generator_encoder_parameters();
    nn::zero_grad(params);
    nn::backward(augnet_objective(net, batch.a, batch.b, batch.noise).l1_latent);
    EXPECT_GT(grad_norm(params, "generator"), 0.0);
    EXPECT_GT(grad_norm(params, "encoder.mu"), 0.0);
    EXPECT_EQ(grad_norm(params, "encoder.logvar"), 0.0);
}

TEST(Objective, DiscriminatorStepLeavesGeneratorAndEncoderUntouched) {
    std::mt19937_64 rng(9);
    const AugNet<double> net(synth::toy_augnet_config(), rng);
    const auto batch = toy_batch(net, rng);
    const auto ge = net.generator_encoder_parameters();
    const auto d = net.discriminator_parameters();
    nn::Adam<double> opt_ge(ge, net.config.hyper.adam());
    nn::Adam<double> opt_d(d, net.config.hyper.adam());

    const auto ge_before = nn::snapshot(ge);
    const auto d_before = nn::snapshot(d);
    const auto terms = augnet_objective(net, batch.a, batch.b, batch.noise);
    nn::backward(terms.total);
    opt_ge.step();
    EXPECT_FALSE(unchanged(ge, ge_before));
    EXPECT_TRUE(unchanged(d, d_before));

    opt_d.zero_grad();
    const auto ge_mid = nn::snapshot(ge);
    nn::backward(discriminator_loss(net, batch.a, batch.b, terms.fake_vae, terms.fake_lr));
    EXPECT_EQ(grad_norm(ge, ""), 0.0);
    opt_d.step();
    EXPECT_TRUE(unchanged(ge, ge_mid));
    EXPECT_FALSE(unchanged(d, d_before));
}

TEST(Objective, LogisticVariantMatchesBce) {
    std::mt19937_64 rng(10);
    auto cfg = synth::toy_augnet_config();
    cfg.hyper.adversarial = AdversarialLoss::Logistic;
    const AugNet<double> net(cfg, rng);
    const auto batch = toy_batch(net, rng);
    const auto t = augnet_objective(net, batch.a, batch.b, batch.noise);
    const auto scores = net.discriminator(batch.a, t.fake_lr);
    EXPECT_NEAR(t.gan_lr.item(), nn::bce_with_logits(scores, 1.0).item(), 1e-12);
}

TEST(Gradients, AugNetObjectiveMatchesFiniteDifferences) {
    std::mt19937_64 rng(11);
    const AugNet<double> net(synth::toy_augnet_config(), rng);
    const auto batch = toy_batch(net, rng);
    const auto samples = synth::check_gradients(
        net.generator_encoder_parameters(),
        [&] { return augnet_objective(net, batch.a, batch.b, batch.noise).total; }, 30, 5);
    for (const auto& s : samples) {
        EXPECT_LT(s.relative_error(), 1e-3) << s.name << "[" << s.index << "] " << s.analytic << " vs " << s.numeric;
    }
}

TEST(Gradients, AugNetDiscriminatorLossMatchesFiniteDifferences) {
    std::mt19937_64 rng(12);
    const AugNet<double> net(synth::toy_augnet_config(), rng);
    const auto batch = toy_batch(net, rng);
    const auto terms = augnet_objective(net, batch.a, batch.b, batch.noise);
    const auto samples = synth::check_gradients(
        net.discriminator_parameters(),
        [&] { return discriminator_loss(net, batch.a, batch.b, terms.fake_vae, terms.fake_lr); }, 30, 6);
    for (const auto& s : samples) EXPECT_LT(s.relative_error(), 1e-3) << s.name;
}
