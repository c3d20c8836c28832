#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <initializer_list>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "docbin/augnet.hpp"
#include "docbin/binet.hpp"
#include "docbin/checkpoint.hpp"
#include "docbin/datapipe.hpp"

namespace docbin::train {

using nlohmann::json;

enum class Stage { AugNet, BiNetPretrain, BiNetAdv };
enum class Preset { Paper, Desk };

NLOHMANN_JSON_SERIALIZE_ENUM(Stage, {{Stage::AugNet, "augnet"},
                                     {Stage::BiNetPretrain, "binet-pretrain"},
                                     {Stage::BiNetAdv, "binet-adv"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Preset, {{Preset::Paper, "paper"}, {Preset::Desk, "desk"}})

inline std::string stage_name(Stage s) { return json(s).get<std::string>(); }

inline json patches_to_json(const data::TrainingSetSpec& p) {
    return {{"extract_size", p.extract_size}, {"stride", p.stride}, {"jitter", p.jitter}, {"out_size", p.out_size}};
}

/// Everything a training stage needs. `model` holds the resolved network config
/// (Aug-Net for the augnet stage, Bi-Net otherwise).
struct TrainConfig {
    Stage stage = Stage::AugNet;
    Preset preset = Preset::Desk;
    int epochs = 1;
    int batch_size = 8;
    double mix_ratio = 0.5;
    std::uint64_t seed = 0;
    std::vector<std::string> train_dirs;
    std::vector<std::string> eval_dirs;
    data::TrainingSetSpec patches;
    json model;
    std::string out_dir;
    std::string aug_checkpoint;
    std::string init_checkpoint;
    std::int64_t max_steps = 0;         // 0 = no cap
    std::int64_t checkpoint_every = 0;  // 0 = per epoch only

    [[nodiscard]] bool is_binet() const { return stage != Stage::AugNet; }

    static json default_model(Stage stage, Preset preset) {
        if (stage == Stage::AugNet) {
            return preset == Preset::Paper ? json(augnet::AugNetConfig::paper()) : json(augnet::AugNetConfig::desk());
        }
        return preset == Preset::Paper ? json(binet::BiNetConfig::paper()) : json(binet::BiNetConfig::desk());
    }

    static data::TrainingSetSpec default_patches(Preset preset) {
        data::TrainingSetSpec p;
        if (preset == Preset::Paper) {
            p.extract_size = 512;
            p.stride = 256;
            p.out_size = 256;
        } else {
            p.extract_size = 64;
            p.stride = 32;
            p.out_size = 64;
        }
        return p;
    }

    [[nodiscard]] augnet::AugNetConfig augnet_config() const {
        if (is_binet()) throw ConfigError("config: stage " + stage_name(stage) + " has no Aug-Net model");
        return model.get<augnet::AugNetConfig>();
    }

    [[nodiscard]] binet::BiNetConfig binet_config() const {
        if (!is_binet()) throw ConfigError("config: augnet stage has no Bi-Net model");
        return model.get<binet::BiNetConfig>();
    }

    static int default_epochs(Stage stage, const json& model) {
        switch (stage) {
            case Stage::AugNet: return model.get<augnet::AugNetConfig>().hyper.epochs;
            case Stage::BiNetPretrain: return model.get<binet::BiNetConfig>().hyper.pretrain_epochs;
            case Stage::BiNetAdv: return model.get<binet::BiNetConfig>().hyper.adv_epochs;
        }
        return 1;
    }

    static TrainConfig defaults(Stage stage, Preset preset) {
        TrainConfig c;
        c.stage = stage;
        c.preset = preset;
        c.model = default_model(stage, preset);
        c.epochs = default_epochs(stage, c.model);
        c.patches = default_patches(preset);
        return c;
    }

    void validate() const {
        if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
        if (!(mix_ratio >= 0.0 && mix_ratio <= 1.0)) throw ConfigError("config: mix_ratio must lie in [0, 1]");
        if (max_steps < 0 || checkpoint_every < 0) throw ConfigError("config: step counts must be non-negative");
        patches.validate();
        if (is_binet()) {
            const auto m = binet_config();
            m.validate();
            if (patches.out_size % m.generator.size_multiple() != 0) {
                throw ConfigError("config: patch size must be a multiple of " + std::to_string(m.generator.size_multiple()));
            }
        } else {
            const auto m = augnet_config();
            m.validate();
            if (patches.out_size % m.generator.size_multiple() != 0) {
                throw ConfigError("config: patch size must be a multiple of " + std::to_string(m.generator.size_multiple()));
            }
        }
    }

    /// Enum from its JSON string; unknown strings are errors rather than the first enumerator.
    template <typename E>
    static E parse_enum(const json& v, const std::string& key, std::initializer_list<E> options) {
        for (E e : options)
            if (json(e) == v) return e;
        throw ConfigError("config: invalid value " + v.dump() + " for '" + key + "'");
    }

    /// Parses a config document. Missing keys take stage/preset defaults; unknown keys are rejected.
    static TrainConfig from_json(const json& j) {
        static const std::set<std::string> known{
            "stage",      "preset",     "epochs",  "batch_size",     "mix_ratio",       "seed",
            "train_dirs", "eval_dirs",  "patches", "model",          "out_dir",         "aug_checkpoint",
            "init_checkpoint", "max_steps", "checkpoint_every"};
        if (!j.is_object()) throw ConfigError("config: expected a JSON object");
        for (const auto& [key, _] : j.items()) {
            if (!known.contains(key)) throw ConfigError("config: unknown key '" + key + "'");
        }
        try {
            const auto stage = parse_enum<Stage>(j.at("stage"), "stage",
                                                 {Stage::AugNet, Stage::BiNetPretrain, Stage::BiNetAdv});
            const auto preset =
                j.contains("preset") ? parse_enum<Preset>(j.at("preset"), "preset", {Preset::Paper, Preset::Desk})
                                     : Preset::Desk;
            auto c = defaults(stage, preset);
            if (j.contains("model")) {
                auto merged = c.model;
                merged.merge_patch(j.at("model"));
                c.model = stage == Stage::AugNet ? json(merged.get<augnet::AugNetConfig>())
                                                 : json(merged.get<binet::BiNetConfig>());
                // Anything that did not survive the round trip is a typo or an invalid enum value.
                if (const auto d = json::diff(merged, c.model); !d.empty()) {
                    throw ConfigError("config: invalid model field " + d.at(0).at("path").get<std::string>());
                }
                c.epochs = default_epochs(stage, c.model);
            }
            c.epochs = j.value("epochs", c.epochs);
            c.batch_size = j.value("batch_size", c.batch_size);
            c.mix_ratio = j.value("mix_ratio", c.mix_ratio);
            c.seed = j.value("seed", c.seed);
            c.train_dirs = j.value("train_dirs", c.train_dirs);
            c.eval_dirs = j.value("eval_dirs", c.eval_dirs);
            if (j.contains("patches")) {
                const auto& p = j.at("patches");
                c.patches.extract_size = p.value("extract_size", c.patches.extract_size);
                c.patches.stride = p.value("stride", c.patches.stride);
                c.patches.jitter = p.value("jitter", c.patches.jitter);
                c.patches.out_size = p.value("out_size", c.patches.out_size);
            }
            c.out_dir = j.value("out_dir", c.out_dir);
            c.aug_checkpoint = j.value("aug_checkpoint", c.aug_checkpoint);
            c.init_checkpoint = j.value("init_checkpoint", c.init_checkpoint);
            c.max_steps = j.value("max_steps", c.max_steps);
            c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
            c.patches.seed = c.seed;
            c.validate();
            return c;
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }

    static TrainConfig from_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read config file: " + path.string());
        try {
            return from_json(json::parse(in));
        } catch (const json::parse_error& e) {
            throw ConfigError("config " + path.string() + ": " + e.what());
        }
    }

    [[nodiscard]] json to_json() const {
        return {{"stage", stage},
                {"preset", preset},
                {"epochs", epochs},
                {"batch_size", batch_size},
                {"mix_ratio", mix_ratio},
                {"seed", seed},
                {"train_dirs", train_dirs},
                {"eval_dirs", eval_dirs},
                {"patches", patches_to_json(patches)},
                {"model", model},
                {"out_dir", out_dir},
                {"aug_checkpoint", aug_checkpoint},
                {"init_checkpoint", init_checkpoint},
                {"max_steps", max_steps},
                {"checkpoint_every", checkpoint_every}};
    }

    /// The part of the config that determines the training trajectory.
    [[nodiscard]] json identity() const { return identity_of(to_json()); }

    static json identity_of(json j) {
        for (const char* k : {"out_dir", "max_steps", "checkpoint_every", "epochs", "aug_checkpoint", "init_checkpoint"}) {
            j.erase(k);
        }
        return j;
    }

    [[nodiscard]] std::string hash() const { return ckpt::config_hash(identity()); }
};

inline TrainConfig validated(TrainConfig c) {
    c.validate();
    return c;
}

// ------------------------------------------------------------------ records

struct StepRecord {
    std::int64_t step = 0;
    std::int64_t epoch = 0;
    std::vector<std::pair<std::string, double>> losses;
    double wall_ms = 0;

    [[nodiscard]] double loss(const std::string& name) const {
        for (const auto& [k, v] : losses)
            if (k == name) return v;
        throw ArgumentError("no loss term '" + name + "'");
    }

    [[nodiscard]] json to_json() const {
        json l = json::object();
        for (const auto& [k, v] : losses) l[k] = v;
        return {{"type", "step"}, {"step", step}, {"epoch", epoch}, {"losses", l}, {"wall_ms", wall_ms}};
    }
};

struct RunRecord {
    std::string config_hash;
    std::vector<StepRecord> steps;
    std::vector<std::string> checkpoints;

    [[nodiscard]] std::vector<double> series(const std::string& term) const {
        std::vector<double> out;
        out.reserve(steps.size());
        for (const auto& s : steps) out.push_back(s.loss(term));
        return out;
    }
};

/// Mean of series[begin, end).
inline double window_mean(const std::vector<double>& series, std::size_t begin, std::size_t end) {
    if (begin >= end || end > series.size()) throw ArgumentError("window_mean: bad range");
    double acc = 0;
    for (std::size_t i = begin; i < end; ++i) acc += series[i];
    return acc / static_cast<double>(end - begin);
}

/// Append-only JSON-lines log; no-op when the path is empty.
class RunLog {
public:
    RunLog() = default;
    explicit RunLog(const std::filesystem::path& path) : path_(path) {
        if (path_.empty()) return;
        if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
        out_.open(path_, std::ios::app);
        if (!out_) throw IoError("cannot open run log: " + path_.string());
    }

    void write(const json& line) {
        if (!out_.is_open()) return;
        out_ << line.dump() << '\n';
        out_.flush();
    }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

// ------------------------------------------------------------------- batches

/// Maps a global step to the samples of its batch. Batches never straddle epochs;
/// datasets smaller than one batch wrap around.
class BatchCursor {
public:
    BatchCursor(std::shared_ptr<const data::TrainingSet> set, int batch) : set_(std::move(set)), batch_(batch) {
        if (!set_ || set_->size() == 0) throw DataError("training set is empty");
    }

    [[nodiscard]] std::int64_t steps_per_epoch() const {
        return std::max<std::int64_t>(1, static_cast<std::int64_t>(set_->size()) / batch_);
    }

    [[nodiscard]] std::vector<data::PairedSample> batch_at(std::int64_t step) const {
        const std::int64_t epoch = step / steps_per_epoch();
        const std::int64_t offset = (step % steps_per_epoch()) * batch_;
        if (epoch != cached_epoch_) {
            order_ = set_->epoch_order(epoch);
            cached_epoch_ = epoch;
        }
        std::vector<data::PairedSample> out;
        for (int i = 0; i < batch_; ++i) {
            const auto idx = order_[static_cast<std::size_t>(offset + i) % order_.size()];
            out.push_back(set_->sample(idx, epoch));
        }
        return out;
    }

    [[nodiscard]] int batch() const { return batch_; }

private:
    std::shared_ptr<const data::TrainingSet> set_;
    int batch_;
    mutable std::int64_t cached_epoch_ = -1;
    mutable std::vector<std::size_t> order_;
};

template <typename T>
struct BatchTensors {
    nn::Var<T> input;   // (N, 3, H, W)
    nn::Var<T> target;  // (N, 1, H, W), ink 0 / paper 1
};

template <typename T>
BatchTensors<T> to_tensors(const std::vector<data::PairedSample>& batch) {
    std::vector<RasterImage> inputs;
    std::vector<BinaryMask> targets;
    for (const auto& s : batch) {
        inputs.push_back(s.input);
        targets.push_back(s.target);
    }
    return {nn::Var<T>(nn::images_to_tensor<T>(inputs)), nn::Var<T>(nn::masks_to_tensor<T>(targets))};
}

/// Number of synthetic samples in a batch of `batch` at the given mix ratio.
inline int synthetic_count(double mix_ratio, int batch) {
    return static_cast<int>(std::ceil(mix_ratio * batch - 1e-9));
}

inline void require_finite(const std::vector<std::pair<std::string, double>>& losses, std::int64_t step,
                           const std::string& last_good) {
    for (const auto& [name, v] : losses) {
        if (!std::isfinite(v)) {
            std::string detail;
            for (const auto& [n, x] : losses) detail += " " + n + "=" + std::to_string(x);
            throw TrainingFault("non-finite loss '" + name + "' at step " + std::to_string(step) + ":" + detail +
                                "; last good checkpoint: " + (last_good.empty() ? "<none>" : last_good));
        }
    }
}

// ------------------------------------------------------------------- loading

inline augnet::AugNet<float> augnet_from_checkpoint(const ckpt::Checkpoint& c) {
    if (c.component != "augnet") throw ConfigError("checkpoint holds a '" + c.component + "' model, expected augnet");
    std::mt19937_64 rng(0);
    augnet::AugNet<float> net(c.config.at("model").get<augnet::AugNetConfig>(), rng);
    ckpt::load_params(c, net.generator_encoder_parameters());
    ckpt::load_params(c, net.discriminator_parameters());
    return net;
}

inline binet::BiNet<float> binet_from_checkpoint(const ckpt::Checkpoint& c) {
    if (c.component != "binet") throw ConfigError("checkpoint holds a '" + c.component + "' model, expected binet");
    std::mt19937_64 rng(0);
    binet::BiNet<float> net(c.config.at("model").get<binet::BiNetConfig>(), rng);
    ckpt::load_params(c, net.generator_parameters());
    ckpt::load_params(c, net.discriminator_parameters());
    return net;
}

inline augnet::AugNet<float> load_augnet(const std::filesystem::path& p) {
    return augnet_from_checkpoint(ckpt::load_checkpoint(p));
}
inline binet::BiNet<float> load_binet(const std::filesystem::path& p) {
    return binet_from_checkpoint(ckpt::load_checkpoint(p));
}

// ------------------------------------------------------------------ trainers

/// Shared loop: step counting, epoch checkpoints, run log, resume.
template <typename Derived>
class TrainerBase {
public:
    [[nodiscard]] std::int64_t steps_done() const { return step_; }
    [[nodiscard]] std::int64_t steps_per_epoch() const { return cursor_.steps_per_epoch(); }
    [[nodiscard]] const TrainConfig& config() const { return cfg_; }

    [[nodiscard]] std::int64_t total_steps() const {
        const std::int64_t full = static_cast<std::int64_t>(cfg_.epochs) * steps_per_epoch();
        return cfg_.max_steps > 0 ? std::min(full, cfg_.max_steps) : full;
    }

    /// Runs until total_steps(), checkpointing at epoch ends (and every
    /// checkpoint_every steps) when out_dir is set.
    RunRecord run() {
        RunRecord rec;
        rec.config_hash = cfg_.hash();
        const std::filesystem::path dir = cfg_.out_dir;
        const std::string stage = stage_name(cfg_.stage);
        RunLog log(dir.empty() ? std::filesystem::path() : dir / (stage + ".jsonl"));
        log.write({{"type", "run"}, {"config_hash", rec.config_hash}, {"config", cfg_.to_json()}, {"start_step", step_}});
        while (step_ < total_steps()) {
            auto s = self().step();
            log.write(s.to_json());
            rec.steps.push_back(std::move(s));
            if (dir.empty()) continue;
            const bool epoch_end = step_ % steps_per_epoch() == 0;
            const bool periodic = cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0;
            if (epoch_end || periodic) {
                const auto name = epoch_end ? stage + "-epoch" + std::to_string(step_ / steps_per_epoch()) + ".ckpt"
                                            : stage + "-step" + std::to_string(step_) + ".ckpt";
                save(dir / name);
                rec.checkpoints.push_back((dir / name).string());
                log.write({{"type", "checkpoint"}, {"step", step_}, {"path", (dir / name).string()}});
            }
        }
        if (!dir.empty()) {
            save(dir / (stage + ".ckpt"));
            rec.checkpoints.push_back((dir / (stage + ".ckpt")).string());
        }
        return rec;
    }

    void save(const std::filesystem::path& p) {
        ckpt::save_checkpoint(self().checkpoint(), p);
        last_checkpoint_ = p.string();
    }

    /// Restores weights, optimizer moments, rng and step; the config hash must match.
    void resume(const ckpt::Checkpoint& c) {
        if (c.config_hash != cfg_.hash()) {
            throw ConfigError("checkpoint was written under a different config:\n" +
                              ckpt::config_diff(TrainConfig::identity_of(c.config), cfg_.identity()));
        }
        self().restore(c);
        ckpt::restore_rng(rng_, c.rng_state);
        step_ = c.step;
    }

    void resume(const std::filesystem::path& p) {
        resume(ckpt::load_checkpoint(p));
        last_checkpoint_ = p.string();
    }

protected:
    TrainerBase(TrainConfig cfg, std::shared_ptr<const data::TrainingSet> data)
        : cfg_(validated(std::move(cfg))),
          cursor_(std::move(data), cfg_.batch_size),
          rng_(cfg_.seed ^ 0xa5a5a5a5a5a5a5a5ULL) {}

    ckpt::Checkpoint base_checkpoint(const std::string& component) const {
        ckpt::Checkpoint c;
        c.component = component;
        c.config = cfg_.to_json();
        c.config_hash = cfg_.hash();
        c.step = step_;
        c.rng_state = ckpt::rng_state(rng_);
        c.extra["stage"] = stage_name(cfg_.stage);
        return c;
    }

    std::uint64_t init_seed() const { return cfg_.seed; }

    TrainConfig cfg_;
    BatchCursor cursor_;
    std::mt19937_64 rng_;
    std::int64_t step_ = 0;
    std::string last_checkpoint_;

private:
    Derived& self() { return static_cast<Derived&>(*this); }
};

class AugNetTrainer : public TrainerBase<AugNetTrainer> {
public:
    AugNetTrainer(TrainConfig cfg, std::shared_ptr<const data::TrainingSet> data)
        : TrainerBase(std::move(cfg), std::move(data)) {
        if (cfg_.stage != Stage::AugNet) throw ConfigError("AugNetTrainer needs stage 'augnet'");
        std::mt19937_64 init(init_seed());
        net_ = augnet::AugNet<float>(cfg_.augnet_config(), init);
        opt_ge_ = nn::Adam<float>(net_.generator_encoder_parameters(), net_.config.hyper.adam());
        opt_d_ = nn::Adam<float>(net_.discriminator_parameters(), net_.config.hyper.adam());
    }

    /// One generator/encoder update followed by one discriminator update.
    StepRecord step() {
        const auto t0 = std::chrono::steady_clock::now();
        const auto b = to_tensors<float>(cursor_.batch_at(step_));
        const auto& a = b.target;
        const auto& real = b.input;
        const auto noise = augnet::LatentNoise<float>::draw(a.shape().n, net_.config.hyper.z_dim, rng_);
        const auto t = augnet::augnet_objective(net_, a, real, noise);

        StepRecord rec;
        rec.step = step_;
        rec.epoch = step_ / steps_per_epoch();
        rec.losses = {{"gan_vae", t.gan_vae.item()}, {"l1_vae", t.l1_vae.item()},     {"gan_lr", t.gan_lr.item()},
                      {"l1_latent", t.l1_latent.item()}, {"kl", t.kl.item()}, {"total", t.total.item()}};
        require_finite(rec.losses, step_, last_checkpoint_);

        opt_ge_.zero_grad();
        nn::backward(t.total);
        opt_ge_.step();

        opt_d_.zero_grad();
        const auto d_loss = augnet::discriminator_loss(net_, a, real, t.fake_vae, t.fake_lr);
        rec.losses.emplace_back("d_loss", d_loss.item());
        require_finite(rec.losses, step_, last_checkpoint_);
        nn::backward(d_loss);
        opt_d_.step();

        ++step_;
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        return rec;
    }

    [[nodiscard]] ckpt::Checkpoint checkpoint() const {
        auto c = base_checkpoint("augnet");
        ckpt::store_params(c, net_.generator_encoder_parameters());
        ckpt::store_params(c, net_.discriminator_parameters());
        ckpt::store_adam(c, "adam_ge", opt_ge_);
        ckpt::store_adam(c, "adam_d", opt_d_);
        return c;
    }

    void restore(const ckpt::Checkpoint& c) {
        ckpt::load_params(c, net_.generator_encoder_parameters());
        ckpt::load_params(c, net_.discriminator_parameters());
        ckpt::load_adam(c, "adam_ge", opt_ge_);
        ckpt::load_adam(c, "adam_d", opt_d_);
    }

    [[nodiscard]] const augnet::AugNet<float>& model() const { return net_; }

private:
    augnet::AugNet<float> net_;
    nn::Adam<float> opt_ge_;
    nn::Adam<float> opt_d_;
};

/// Bi-Net pretraining (generator, L1 only) or adversarial training. With an
/// Aug-Net and mix_ratio > 0, the first ceil(mix_ratio * batch) samples of each
/// batch get their input replaced by a degraded rendering of their own ground truth.
class BiNetTrainer : public TrainerBase<BiNetTrainer> {
public:
    BiNetTrainer(TrainConfig cfg, std::shared_ptr<const data::TrainingSet> data,
                 std::shared_ptr<const augnet::AugNet<float>> aug = nullptr)
        : TrainerBase(std::move(cfg), std::move(data)), aug_(std::move(aug)) {
        if (!cfg_.is_binet()) throw ConfigError("BiNetTrainer needs a binet stage");
        if (cfg_.stage == Stage::BiNetAdv && cfg_.mix_ratio > 0 && !aug_) {
            throw ConfigError("mix_ratio > 0 needs an Aug-Net checkpoint (aug_checkpoint)");
        }
        std::mt19937_64 init(init_seed());
        net_ = binet::BiNet<float>(cfg_.binet_config(), init);
        opt_g_ = nn::Adam<float>(net_.generator_parameters(), net_.config.hyper.adam());
        if (adversarial()) opt_d_ = nn::Adam<float>(net_.discriminator_parameters(), net_.config.hyper.adam());
    }

    /// Starts from the weights of another Bi-Net checkpoint (e.g. the pretrained generator).
    void initialize_from(const ckpt::Checkpoint& c) {
        const auto other = binet_from_checkpoint(c);
        if (json(other.config) != json(net_.config)) throw ConfigError("initial checkpoint has a different Bi-Net layout");
        ckpt::load_params(c, net_.generator_parameters());
        ckpt::load_params(c, net_.discriminator_parameters());
    }

    [[nodiscard]] bool adversarial() const { return cfg_.stage == Stage::BiNetAdv; }

    [[nodiscard]] int synthetic_per_batch() const {
        return aug_ ? std::min(cfg_.batch_size, synthetic_count(cfg_.mix_ratio, cfg_.batch_size)) : 0;
    }

    /// The samples of the next batch after mixing (advances nothing).
    [[nodiscard]] std::vector<data::PairedSample> mixed_batch(std::int64_t step, std::mt19937_64& rng) const {
        auto batch = cursor_.batch_at(step);
        const int n_syn = synthetic_per_batch();
        for (int i = 0; i < n_syn; ++i) {
            auto& s = batch[static_cast<std::size_t>(i)];
            s.input = augnet::sample_degraded(*aug_, s.target, 1, rng).front();
            s.synthetic = true;
            s.origin += "#synthetic";
        }
        return batch;
    }

    StepRecord step() {
        const auto t0 = std::chrono::steady_clock::now();
        const auto samples = mixed_batch(step_, rng_);
        const auto b = to_tensors<float>(samples);
        const auto t = binet::binet_objective(net_, b.input, b.target, adversarial(), true, rng_);

        StepRecord rec;
        rec.step = step_;
        rec.epoch = step_ / steps_per_epoch();
        rec.losses = {{"l1", t.l1.item()}, {"cgan", t.cgan.item()}, {"total", t.total.item()}};
        require_finite(rec.losses, step_, last_checkpoint_);

        opt_g_.zero_grad();
        nn::backward(t.total);
        opt_g_.step();

        if (adversarial()) {
            opt_d_.zero_grad();
            const auto d_loss = binet::discriminator_loss(net_.discriminator, b.input, b.target, t.fake);
            rec.losses.emplace_back("d_loss", d_loss.item());
            require_finite(rec.losses, step_, last_checkpoint_);
            nn::backward(d_loss);
            opt_d_.step();
        } else {
            // Only the generator is optimized; drop gradients nothing will consume.
            nn::zero_grad(net_.discriminator_parameters());
        }

        ++step_;
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        return rec;
    }

    [[nodiscard]] ckpt::Checkpoint checkpoint() const {
        auto c = base_checkpoint("binet");
        ckpt::store_params(c, net_.generator_parameters());
        ckpt::store_params(c, net_.discriminator_parameters());
        ckpt::store_adam(c, "adam_g", opt_g_);
        if (adversarial()) ckpt::store_adam(c, "adam_d", opt_d_);
        return c;
    }

    void restore(const ckpt::Checkpoint& c) {
        ckpt::load_params(c, net_.generator_parameters());
        ckpt::load_params(c, net_.discriminator_parameters());
        ckpt::load_adam(c, "adam_g", opt_g_);
        if (adversarial()) ckpt::load_adam(c, "adam_d", opt_d_);
    }

    [[nodiscard]] const binet::BiNet<float>& model() const { return net_; }

private:
    std::shared_ptr<const augnet::AugNet<float>> aug_;
    binet::BiNet<float> net_;
    nn::Adam<float> opt_g_;
    nn::Adam<float> opt_d_;
};

// --------------------------------------------------------- file-driven stages

inline std::shared_ptr<const data::TrainingSet> training_set_for(const TrainConfig& cfg) {
    if (cfg.train_dirs.empty()) throw ConfigError("config: train_dirs is empty");
    std::vector<std::filesystem::path> dirs(cfg.train_dirs.begin(), cfg.train_dirs.end());
    auto set = std::make_shared<const data::TrainingSet>(data::TrainingSet::from_dirs(dirs, cfg.patches));
    if (!cfg.eval_dirs.empty()) {
        std::set<std::string> eval_stems;
        for (const auto& d : cfg.eval_dirs) {
            const auto s = data::stems_of(data::load_dibco_dir(d));
            eval_stems.insert(s.begin(), s.end());
        }
        data::require_disjoint(set->stems(), eval_stems);
    }
    return set;
}

/// Stage I from a config file's settings; `resume_from` continues an interrupted run.
inline RunRecord train_augnet(const TrainConfig& cfg, const std::string& resume_from = "") {
    if (cfg.stage != Stage::AugNet) throw ConfigError("train-augnet needs stage 'augnet'");
    AugNetTrainer t(cfg, training_set_for(cfg));
    if (!resume_from.empty()) t.resume(std::filesystem::path(resume_from));
    return t.run();
}

/// Stage II: pretraining or adversarial training depending on cfg.stage.
inline RunRecord train_binet(const TrainConfig& cfg, const std::string& resume_from = "") {
    if (!cfg.is_binet()) throw ConfigError("train-binet needs stage 'binet-pretrain' or 'binet-adv'");
    std::shared_ptr<const augnet::AugNet<float>> aug;
    if (!cfg.aug_checkpoint.empty() && cfg.mix_ratio > 0) {
        aug = std::make_shared<const augnet::AugNet<float>>(load_augnet(cfg.aug_checkpoint));
    }
    BiNetTrainer t(cfg, training_set_for(cfg), aug);
    if (!cfg.init_checkpoint.empty()) t.initialize_from(ckpt::load_checkpoint(cfg.init_checkpoint));
    if (!resume_from.empty()) t.resume(std::filesystem::path(resume_from));
    return t.run();
}

}  // namespace docbin::train
