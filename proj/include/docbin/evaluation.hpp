#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <random>
#include <string>
#include <vector>

#include "docbin/classical.hpp"
#include "docbin/datapipe.hpp"
#include "docbin/image_io.hpp"
#include "docbin/metrics.hpp"
#include "docbin/trainer.hpp"

namespace docbin::eval {

/// Patch protocol: `patches_per_image` random square patches per image, drawn
/// from one rng seeded with `seed` over the images in stem order.
struct Protocol {
    int patch_size = 256;
    int patches_per_image = 5;
    std::uint64_t seed = 0;
};

using Binarizer = std::function<BinaryMask(const RasterImage&)>;

struct MethodSpec {
    std::string id;          // as given, e.g. "sauvola" or "binet:runs/binet.ckpt"
    std::string kind;        // otsu | niblack | sauvola | binet
    std::string checkpoint;  // binet only
    std::optional<int> window;
    std::optional<double> k;

    static MethodSpec parse(const std::string& text) {
        MethodSpec m;
        m.id = text;
        const auto colon = text.find(':');
        m.kind = text.substr(0, colon);
        if (m.kind == "binet") {
            if (colon == std::string::npos || colon + 1 == text.size()) {
                throw ArgumentError("method 'binet' needs a checkpoint: binet:<path>");
            }
            m.checkpoint = text.substr(colon + 1);
        } else if (colon != std::string::npos || (m.kind != "otsu" && m.kind != "niblack" && m.kind != "sauvola")) {
            throw ArgumentError("unknown method '" + text + "' (expected otsu, niblack, sauvola or binet:<ckpt>)");
        }
        return m;
    }
};

inline classical::LocalWindowParams window_params(const MethodSpec& m) {
    auto p = m.kind == "niblack" ? classical::LocalWindowParams::niblack_defaults()
                                 : classical::LocalWindowParams::sauvola_defaults();
    if (m.window) p.window = *m.window;
    if (m.k) p.k = *m.k;
    p.validate();
    return p;
}

/// Tile side for Bi-Net inference: the patch itself when the network accepts it.
inline binet::TilingOptions tiling_for(const binet::GeneratorConfig& g, int patch_size) {
    binet::TilingOptions t;
    if (patch_size % g.size_multiple() == 0 && patch_size <= t.tile) {
        t.tile = patch_size;
        t.overlap = std::min(t.overlap, patch_size / 4);
    }
    return t;
}

inline Binarizer make_binarizer(const MethodSpec& m, int patch_size = 256) {
    if (m.kind == "otsu") {
        return [](const RasterImage& img) { return classical::otsu(to_grayscale(img)).mask; };
    }
    if (m.kind == "niblack" || m.kind == "sauvola") {
        const auto p = window_params(m);
        const bool niblack = m.kind == "niblack";
        return [p, niblack](const RasterImage& img) {
            const auto gray = to_grayscale(img);
            return niblack ? classical::niblack(gray, p) : classical::sauvola(gray, p);
        };
    }
    auto net = std::make_shared<binet::BiNet<float>>(train::load_binet(m.checkpoint));
    const auto tiling = tiling_for(net->config.generator, patch_size);
    return [net, tiling](const RasterImage& img) { return binet::binarize(net->generator, img, tiling); };
}

struct Aggregate {
    double fm = 0;
    double pfm = 0;
    double psnr = 0;
    double drd = 0;
    std::size_t count = 0;
    std::size_t psnr_excluded = 0;  // infinite PSNR (perfect patches)
    std::size_t drd_excluded = 0;   // DRD undefined (no non-uniform block)
};

/// Arithmetic means; infinite PSNR and undefined DRD rows are left out of their column's mean.
inline Aggregate aggregate(const std::vector<metrics::MetricReport>& reports) {
    Aggregate a;
    a.count = reports.size();
    std::size_t n_psnr = 0;
    std::size_t n_drd = 0;
    for (const auto& r : reports) {
        a.fm += r.f_measure;
        a.pfm += r.pseudo_f_measure;
        if (std::isfinite(r.psnr)) {
            a.psnr += r.psnr;
            ++n_psnr;
        }
        if (r.drd) {
            a.drd += *r.drd;
            ++n_drd;
        }
    }
    if (a.count > 0) {
        a.fm /= static_cast<double>(a.count);
        a.pfm /= static_cast<double>(a.count);
    }
    a.psnr = n_psnr ? a.psnr / static_cast<double>(n_psnr) : std::numeric_limits<double>::infinity();
    a.drd = n_drd ? a.drd / static_cast<double>(n_drd) : std::numeric_limits<double>::quiet_NaN();
    a.psnr_excluded = a.count - n_psnr;
    a.drd_excluded = a.count - n_drd;
    return a;
}

struct PatchPreview {
    std::string id;
    RasterImage input;
    BinaryMask ground_truth;
    BinaryMask prediction;
};

struct EvalRun {
    std::string method;
    std::string dataset;
    Protocol protocol;
    std::vector<metrics::MetricReport> reports;
    Aggregate summary;
    std::vector<PatchPreview> previews;
};

/// Same seed and images give the same patches, whatever the method.
inline std::vector<data::PairedSample> evaluation_patches(const std::vector<data::PairedSample>& images,
                                                          const Protocol& p) {
    std::mt19937_64 rng(p.seed);
    std::vector<data::PairedSample> out;
    for (const auto& img : images) {
        auto patches = data::extract_patches(img, {p.patch_size, p.patches_per_image, p.seed}, rng);
        std::move(patches.begin(), patches.end(), std::back_inserter(out));
    }
    return out;
}

inline EvalRun evaluate_pairs(const Binarizer& binarize, const std::string& method, const std::string& dataset,
                              const std::vector<data::PairedSample>& images, const Protocol& p,
                              std::size_t preview_count = 1) {
    EvalRun run{method, dataset, p, {}, {}, {}};
    for (const auto& patch : evaluation_patches(images, p)) {
        auto pred = binarize(patch.input);
        run.reports.push_back(metrics::score(pred, patch.target, patch.origin));
        if (run.previews.size() < preview_count) {
            run.previews.push_back({patch.origin, patch.input, patch.target, std::move(pred)});
        }
    }
    run.summary = aggregate(run.reports);
    return run;
}

inline std::string dataset_id(const std::filesystem::path& dir) {
    return dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
}

inline EvalRun evaluate(const std::string& method, const std::filesystem::path& dataset_dir, const Protocol& p) {
    const auto images = data::load_dibco_dir(dataset_dir);
    return evaluate_pairs(make_binarizer(MethodSpec::parse(method), p.patch_size), method, dataset_id(dataset_dir),
                          images, p);
}

// ------------------------------------------------------------------- ablation

struct AblationArm {
    std::string name;        // proposed | no-aug | parent | anything else
    std::string checkpoint;  // Bi-Net checkpoint
};

struct AblationResult {
    std::vector<EvalRun> runs;
    std::vector<std::string> skipped;  // "<arm>: <reason>"
};

/// The parent arm must be the transposed-convolution, residual-free generator.
inline void check_arm_structure(const AblationArm& arm, const binet::BiNetConfig& cfg) {
    if (arm.name != "parent") return;
    if (cfg.generator.upsampling != binet::Upsampling::Transpose || cfg.generator.residual) {
        throw ConfigError("ablation arm 'parent' must use transposed-convolution upsampling without residual blocks");
    }
}

/// {"arms": [{"name", "checkpoint"}], "datasets": [...], "patch_size", "patches_per_image", "seed"}
struct AblationConfig {
    std::vector<AblationArm> arms;
    std::vector<std::filesystem::path> datasets;
    Protocol protocol;

    static AblationConfig from_json(const nlohmann::json& j) {
        static const std::set<std::string> known{"arms", "datasets", "patch_size", "patches_per_image", "seed"};
        if (!j.is_object()) throw ConfigError("ablation config: expected a JSON object");
        for (const auto& [key, _] : j.items())
            if (!known.contains(key)) throw ConfigError("ablation config: unknown key '" + key + "'");
        AblationConfig c;
        try {
            for (const auto& a : j.at("arms")) c.arms.push_back({a.at("name"), a.at("checkpoint")});
            for (const auto& d : j.at("datasets")) c.datasets.emplace_back(d.get<std::string>());
            c.protocol.patch_size = j.value("patch_size", c.protocol.patch_size);
            c.protocol.patches_per_image = j.value("patches_per_image", c.protocol.patches_per_image);
            c.protocol.seed = j.value("seed", c.protocol.seed);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("ablation config: ") + e.what());
        }
        if (c.arms.empty() || c.datasets.empty()) throw ConfigError("ablation config: needs at least one arm and dataset");
        if (c.protocol.patch_size < 1 || c.protocol.patches_per_image < 1) {
            throw ConfigError("ablation config: patch_size and patches_per_image must be positive");
        }
        return c;
    }

    static AblationConfig from_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read ablation config: " + path.string());
        try {
            return from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("ablation config " + path.string() + ": " + e.what());
        }
    }
};

inline AblationResult ablation_matrix(const std::vector<AblationArm>& arms,
                                      const std::vector<std::filesystem::path>& datasets, const Protocol& p) {
    if (arms.empty()) throw ArgumentError("ablation needs at least one arm");
    AblationResult out;
    std::vector<std::pair<std::string, std::vector<data::PairedSample>>> loaded;
    for (const auto& d : datasets) loaded.emplace_back(dataset_id(d), data::load_dibco_dir(d));
    for (const auto& arm : arms) {
        if (!std::filesystem::exists(arm.checkpoint)) {
            out.skipped.push_back(arm.name + ": missing checkpoint " + arm.checkpoint);
            continue;
        }
        auto net = std::make_shared<binet::BiNet<float>>(train::load_binet(arm.checkpoint));
        check_arm_structure(arm, net->config);
        const auto tiling = tiling_for(net->config.generator, p.patch_size);
        const Binarizer b = [net, tiling](const RasterImage& img) { return binet::binarize(net->generator, img, tiling); };
        for (const auto& [id, images] : loaded) out.runs.push_back(evaluate_pairs(b, arm.name, id, images, p));
    }
    return out;
}

// --------------------------------------------------------------------- report

inline std::string fixed3(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

/// Fractions are shown as percentages: 0.94333 -> "94.333".
inline std::string percent3(double fraction) { return fixed3(fraction * 100.0); }

inline std::string full_precision(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string safe_name(std::string s) {
    for (auto& ch : s) {
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_' && ch != '.') ch = '_';
    }
    return s;
}

inline std::string run_csv(const EvalRun& run) {
    std::string out = "# method=" + run.method + " dataset=" + run.dataset + " seed=" + std::to_string(run.protocol.seed) +
                      " patch_size=" + std::to_string(run.protocol.patch_size) +
                      " patches_per_image=" + std::to_string(run.protocol.patches_per_image) + "\n";
    out += "image_id,FM,pFM,PSNR,DRD\n";
    for (const auto& r : run.reports) {
        out += r.image_id + "," + full_precision(r.f_measure) + "," + full_precision(r.pseudo_f_measure) + "," +
               full_precision(r.psnr) + "," + (r.drd ? full_precision(*r.drd) : std::string("undefined")) + "\n";
    }
    const auto& a = run.summary;
    out += "mean," + full_precision(a.fm) + "," + full_precision(a.pfm) + "," + full_precision(a.psnr) + "," +
           (std::isnan(a.drd) ? std::string("undefined") : full_precision(a.drd)) + "\n";
    return out;
}

inline std::string markdown_table(const std::vector<EvalRun>& runs) {
    std::string out = "| Method | Dataset | FM ↑ | pFM ↑ | PSNR ↑ | DRD ↓ |\n";
    out += "|---|---|---:|---:|---:|---:|\n";
    std::vector<std::string> notes;
    for (const auto& r : runs) {
        const auto& a = r.summary;
        out += "| " + r.method + " | " + r.dataset + " | " + percent3(a.fm) + " | " + percent3(a.pfm) + " | " +
               fixed3(a.psnr) + " | " + fixed3(a.drd) + " |\n";
        if (a.psnr_excluded > 0) {
            notes.push_back(r.method + " / " + r.dataset + ": " + std::to_string(a.psnr_excluded) + " of " +
                            std::to_string(a.count) + " patches had infinite PSNR and are excluded from the PSNR mean");
        }
        if (a.drd_excluded > 0) {
            notes.push_back(r.method + " / " + r.dataset + ": " + std::to_string(a.drd_excluded) + " of " +
                            std::to_string(a.count) +
                            " patches have no non-uniform 8x8 block (DRD undefined) and are excluded from the DRD mean");
        }
    }
    if (!runs.empty()) {
        out += "\nPatches: " + std::to_string(runs.front().protocol.patches_per_image) + " per image, " +
               std::to_string(runs.front().protocol.patch_size) + "x" + std::to_string(runs.front().protocol.patch_size) +
               ", seed " + std::to_string(runs.front().protocol.seed) + ".\n";
    }
    for (const auto& n : notes) out += "\n- " + n;
    if (!notes.empty()) out += "\n";
    return out;
}

inline std::string skipped_note(const std::vector<std::string>& skipped) {
    if (skipped.empty()) return "";
    std::string out = "\nSkipped arms:\n";
    for (const auto& s : skipped) out += "\n- " + s;
    return out + "\n";
}

/// Rows of [input | ground truth | prediction], one row per run (first preview).
inline RasterImage preview_grid(const std::vector<EvalRun>& runs, int gutter = 4) {
    std::vector<const PatchPreview*> rows;
    for (const auto& r : runs)
        if (!r.previews.empty()) rows.push_back(&r.previews.front());
    if (rows.empty()) return RasterImage(1, 1, 3, 1.0f);
    int cell_h = 0;
    int cell_w = 0;
    for (const auto* p : rows) {
        cell_h = std::max(cell_h, p->input.height());
        cell_w = std::max(cell_w, p->input.width());
    }
    const int h = static_cast<int>(rows.size()) * (cell_h + gutter) + gutter;
    const int w = 3 * (cell_w + gutter) + gutter;
    std::vector<float> px(static_cast<std::size_t>(h) * w * 3, 1.0f);
    auto paste = [&](const RasterImage& img, int y0, int x0) {
        const auto rgb = to_rgb(img);
        for (int y = 0; y < rgb.height(); ++y)
            for (int x = 0; x < rgb.width(); ++x)
                for (int c = 0; c < 3; ++c) px[(static_cast<std::size_t>(y0 + y) * w + x0 + x) * 3 + c] = rgb.at(y, x, c);
    };
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const int y0 = gutter + static_cast<int>(i) * (cell_h + gutter);
        paste(rows[i]->input, y0, gutter);
        paste(mask_to_image(rows[i]->ground_truth), y0, 2 * gutter + cell_w);
        paste(mask_to_image(rows[i]->prediction), y0, 3 * gutter + 2 * cell_w);
    }
    return {h, w, 3, std::move(px)};
}

struct ReportFiles {
    std::vector<std::filesystem::path> csvs;
    std::filesystem::path table;
    std::filesystem::path grid;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("short write to " + path.string());
}

inline ReportFiles report(const std::vector<EvalRun>& runs, const std::filesystem::path& out_dir,
                          const std::string& table_suffix = "") {
    if (runs.empty()) throw ArgumentError("report: no runs to report");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) throw IoError("cannot create report directory " + out_dir.string());
    ReportFiles files;
    for (const auto& r : runs) {
        auto p = out_dir / (safe_name(r.method) + "__" + safe_name(r.dataset) + ".csv");
        write_text(p, run_csv(r));
        files.csvs.push_back(std::move(p));
    }
    files.table = out_dir / "table.md";
    write_text(files.table, markdown_table(runs) + table_suffix);
    files.grid = out_dir / "grid.png";
    save_png(preview_grid(runs), files.grid);
    return files;
}

}  // namespace docbin::eval
