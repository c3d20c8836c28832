// docbin: document binarization baselines, Bi-Net/Aug-Net training and DIBCO-style evaluation.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 data error
// (unreadable or unpaired images, corrupt checkpoints), 1 anything else.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "docbin/classical.hpp"
#include "docbin/evaluation.hpp"
#include "docbin/image_io.hpp"
#include "docbin/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

struct ProtocolFlags {
    std::uint64_t seed = 0;
    int patch_size = 256;
    int patches = 5;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--seed", seed, "Patch-selection seed")->capture_default_str();
        cmd->add_option("--patch-size", patch_size, "Evaluation patch side")->capture_default_str()->check(CLI::PositiveNumber);
        cmd->add_option("--patches", patches, "Patches per image")->capture_default_str()->check(CLI::PositiveNumber);
    }

    [[nodiscard]] docbin::eval::Protocol protocol() const { return {patch_size, patches, seed}; }
};

void print_report(const std::vector<docbin::eval::EvalRun>& runs, const docbin::eval::ReportFiles& files) {
    std::cout << docbin::eval::markdown_table(runs);
    std::cout << "\nwrote " << files.table.string() << ", " << files.grid.string() << " and " << files.csvs.size()
              << " CSV file(s)\n";
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw docbin::ConfigError("cannot read config file: " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw docbin::ConfigError("config " + path + ": " + e.what());
    }
}

void print_run(const docbin::train::RunRecord& rec) {
    if (rec.steps.empty()) {
        std::cout << "nothing to do: run already complete\n";
    } else {
        const auto& last = rec.steps.back();
        std::cout << "trained steps " << rec.steps.front().step << ".." << last.step << " (config " << rec.config_hash
                  << ")\nlast losses:";
        for (const auto& [k, v] : last.losses) std::cout << ' ' << k << '=' << v;
        std::cout << '\n';
    }
    if (!rec.checkpoints.empty()) std::cout << "final checkpoint: " << rec.checkpoints.back() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Document binarization: classical baselines, Bi-Net with Aug-Net augmentation, DIBCO metrics"};
    app.require_subcommand(1);

    // baseline
    std::string method;
    std::string input;
    std::string out;
    std::optional<int> window;
    std::optional<double> k;
    auto* baseline = app.add_subcommand("baseline", "Binarize one image with otsu, niblack or sauvola");
    baseline->add_option("--method", method, "otsu | niblack | sauvola")->required();
    baseline->add_option("--input", input, "Input image")->required();
    baseline->add_option("--out", out, "Output mask (PNG, ink black)")->required();
    baseline->add_option("--window", window, "Local window side (niblack, sauvola)");
    baseline->add_option("--k", k, "Local threshold k (niblack, sauvola)");

    // binarize
    std::string weights;
    docbin::binet::TilingOptions tiling;
    auto* binarize = app.add_subcommand("binarize", "Binarize one image with a trained Bi-Net checkpoint");
    binarize->add_option("--weights", weights, "Bi-Net checkpoint")->required();
    binarize->add_option("--input", input, "Input image")->required();
    binarize->add_option("--out", out, "Output mask (PNG, ink black)")->required();
    binarize->add_option("--tile", tiling.tile, "Tile side")->capture_default_str();
    binarize->add_option("--overlap", tiling.overlap, "Tile overlap")->capture_default_str();

    // evaluate
    std::string dataset;
    ProtocolFlags proto;
    auto* evaluate = app.add_subcommand("evaluate", "Score one method on one DIBCO-style directory");
    evaluate->add_option("--method", method, "otsu | niblack | sauvola | binet:<checkpoint>")->required();
    evaluate->add_option("--dataset", dataset, "Directory of <stem>.<ext> and <stem>_gt.<ext> pairs")->required();
    evaluate->add_option("--out", out, "Report directory")->required();
    proto.add_to(evaluate);

    // report
    std::vector<std::string> methods;
    std::vector<std::string> datasets;
    auto* report = app.add_subcommand("report", "Evaluate every method on every dataset into one comparison table");
    report->add_option("--method", methods, "Method id (repeatable)")->required();
    report->add_option("--dataset", datasets, "Dataset directory (repeatable)")->required();
    report->add_option("--out", out, "Report directory")->required();
    proto.add_to(report);

    // ablate
    std::string config;
    std::optional<std::uint64_t> seed;
    auto* ablate = app.add_subcommand("ablate", "Evaluate the ablation arms listed in a JSON config");
    ablate->add_option("--config", config, "Ablation config (arms, datasets, patch protocol)")->required();
    ablate->add_option("--out", out, "Report directory")->required();
    ablate->add_option("--seed", seed, "Override the config's patch seed");

    // training
    std::string resume;
    std::string aug;
    auto* train_aug = app.add_subcommand("train-augnet", "Train the Aug-Net (stage I)");
    train_aug->add_option("--config", config, "Training config (JSON)")->required();
    train_aug->add_option("--seed", seed, "Override the config seed");
    train_aug->add_option("--out", out, "Override the output directory");
    train_aug->add_option("--resume", resume, "Continue from a checkpoint of this run");

    bool pretrain = false;
    bool adv = false;
    auto* train_bi = app.add_subcommand("train-binet", "Train the Bi-Net (stage II)");
    train_bi->add_option("--config", config, "Training config (JSON)")->required();
    auto* pre_flag = train_bi->add_flag("--pretrain", pretrain, "L1-only pretraining");
    auto* adv_flag = train_bi->add_flag("--adv", adv, "Adversarial training");
    pre_flag->excludes(adv_flag);
    train_bi->add_option("--seed", seed, "Override the config seed");
    train_bi->add_option("--out", out, "Override the output directory");
    train_bi->add_option("--aug", aug, "Override the Aug-Net checkpoint");
    train_bi->add_option("--resume", resume, "Continue from a checkpoint of this run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (baseline->parsed()) {
            auto spec = docbin::eval::MethodSpec::parse(method);
            if (spec.kind == "binet") throw docbin::ArgumentError("baseline: use the binarize subcommand for Bi-Net");
            spec.window = window;
            spec.k = k;
            const auto mask = docbin::eval::make_binarizer(spec)(docbin::load_image(input));
            docbin::save_png(mask, out);
            std::cout << "wrote " << out << " (" << mask.count() << " ink pixels)\n";
        } else if (binarize->parsed()) {
            const auto net = docbin::train::load_binet(weights);
            const auto mask = docbin::binet::binarize(net.generator, docbin::load_image(input), tiling);
            docbin::save_png(mask, out);
            std::cout << "wrote " << out << " (" << mask.count() << " ink pixels)\n";
        } else if (evaluate->parsed()) {
            const std::vector<docbin::eval::EvalRun> runs{docbin::eval::evaluate(method, dataset, proto.protocol())};
            print_report(runs, docbin::eval::report(runs, out));
        } else if (report->parsed()) {
            std::vector<docbin::eval::EvalRun> runs;
            for (const auto& d : datasets)
                for (const auto& m : methods) runs.push_back(docbin::eval::evaluate(m, d, proto.protocol()));
            print_report(runs, docbin::eval::report(runs, out));
        } else if (ablate->parsed()) {
            auto cfg = docbin::eval::AblationConfig::from_file(config);
            if (seed) cfg.protocol.seed = *seed;
            const auto result = docbin::eval::ablation_matrix(cfg.arms, cfg.datasets, cfg.protocol);
            for (const auto& s : result.skipped) std::cerr << "skipped " << s << '\n';
            if (result.runs.empty()) throw docbin::DataError("ablation: no arm could be evaluated");
            const auto files = docbin::eval::report(result.runs, out, docbin::eval::skipped_note(result.skipped));
            print_report(result.runs, files);
        } else {
            auto j = load_json(config);
            if (!j.is_object()) throw docbin::ConfigError("config: expected a JSON object");
            if (seed) j["seed"] = *seed;
            if (!out.empty()) j["out_dir"] = out;
            if (train_bi->parsed()) {
                if (pretrain) j["stage"] = "binet-pretrain";
                if (adv) j["stage"] = "binet-adv";
                if (!aug.empty()) j["aug_checkpoint"] = aug;
            }
            const auto cfg = docbin::train::TrainConfig::from_json(j);
            if (cfg.out_dir.empty()) throw docbin::ConfigError("config: out_dir is required for training");
            const auto rec = train_aug->parsed() ? docbin::train::train_augnet(cfg, resume)
                                                 : docbin::train::train_binet(cfg, resume);
            print_run(rec);
        }
    } catch (const docbin::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const docbin::ArgumentError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const docbin::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const docbin::IoError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const docbin::FormatError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const docbin::IntegrityError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
