#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "docbin/evaluation.hpp"
#include "support/synthdoc.hpp"

namespace fs = std::filesystem;
using namespace docbin;
using namespace docbin::eval;
namespace synth = docbin::testing;

namespace {

class TempDir {
public:
    explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("docbin_eval_" + name)) {
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    [[nodiscard]] const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

metrics::MetricReport row(double fm, double psnr, std::optional<double> drd) {
    metrics::MetricReport r;
    r.image_id = "x";
    r.f_measure = fm;
    r.pseudo_f_measure = fm;
    r.psnr = psnr;
    r.drd = drd;
    return r;
}

// Bi-Net checkpoint with untrained weights; enough for plumbing tests.
fs::path write_binet(const fs::path& dir, const std::string& name, binet::BiNetConfig model) {
    auto cfg = train::TrainConfig::defaults(train::Stage::BiNetPretrain, train::Preset::Desk);
    model.generator.base_width = 4;
    model.discriminator.base_width = 4;
    cfg.model = model;
    cfg.patches = {32, 32, 0, 32, 0};
    cfg.batch_size = 1;
    auto set = std::make_shared<const data::TrainingSet>(
        synth::make_pairs(1, 32, 32, synth::DegradationStyle::seen(), 1), cfg.patches);
    train::BiNetTrainer t(cfg, set);
    const auto path = dir / (name + ".ckpt");
    t.save(path);
    return path;
}

}  // namespace

TEST(Methods, ParseKnownIds) {
    EXPECT_EQ(MethodSpec::parse("otsu").kind, "otsu");
    EXPECT_EQ(MethodSpec::parse("sauvola").kind, "sauvola");
    const auto b = MethodSpec::parse("binet:runs/a.ckpt");
    EXPECT_EQ(b.kind, "binet");
    EXPECT_EQ(b.checkpoint, "runs/a.ckpt");
    EXPECT_THROW(MethodSpec::parse("binet"), ArgumentError);
    EXPECT_THROW(MethodSpec::parse("binet:"), ArgumentError);
    EXPECT_THROW(MethodSpec::parse("wolf"), ArgumentError);
    EXPECT_THROW(MethodSpec::parse("otsu:3"), ArgumentError);
}

TEST(Aggregate, MeansExcludeInfinitePsnrAndUndefinedDrd) {
    const double inf = std::numeric_limits<double>::infinity();
    const auto a = aggregate({row(1.0, inf, 0.0), row(0.5, 20.0, std::nullopt), row(0.0, 10.0, 3.0)});
    EXPECT_EQ(a.count, 3u);
    EXPECT_DOUBLE_EQ(a.fm, 0.5);
    EXPECT_DOUBLE_EQ(a.psnr, 15.0);
    EXPECT_DOUBLE_EQ(a.drd, 1.5);
    EXPECT_EQ(a.psnr_excluded, 1u);
    EXPECT_EQ(a.drd_excluded, 1u);
}

TEST(Evaluate, TenImagesGiveFiftyPatchReports) {
    TempDir dir("fifty");
    synth::write_dataset(dir.path() / "synthetic10", 10, 80, 96, synth::DegradationStyle::seen(), 2);
    const auto run = evaluate("sauvola", dir.path() / "synthetic10", {64, 5, 7});
    EXPECT_EQ(run.reports.size(), 50u);
    EXPECT_EQ(run.dataset, "synthetic10");
    EXPECT_EQ(run.method, "sauvola");
    double fm = 0;
    for (const auto& r : run.reports) fm += r.f_measure;
    EXPECT_NEAR(run.summary.fm, fm / 50.0, 1e-12);
    EXPECT_EQ(run.summary.count, 50u);
}

TEST(Evaluate, OtsuOnCleanRenderingScoresPerfectly) {
    TempDir dir("clean");
    std::mt19937_64 rng(3);
    for (int i = 0; i < 2; ++i) {
        const auto truth = synth::render_text(70, 70, rng);
        save_png(to_rgb(mask_to_image(truth)), dir.path() / ("p" + std::to_string(i) + ".png"));
        save_png(truth, dir.path() / ("p" + std::to_string(i) + "_gt.png"));
    }
    const auto run = evaluate("otsu", dir.path(), {48, 3, 1});
    ASSERT_EQ(run.reports.size(), 6u);
    for (const auto& r : run.reports) {
        EXPECT_EQ(r.f_measure, 1.0) << r.image_id;
        EXPECT_TRUE(std::isinf(r.psnr));
    }
    EXPECT_EQ(run.summary.psnr_excluded, 6u);
}

TEST(Evaluate, SameSeedSamePatchesAcrossMethods) {
    const auto images = synth::make_pairs(3, 60, 70, synth::DegradationStyle::seen(), 4, "set/img");
    const auto a = evaluate_pairs(make_binarizer(MethodSpec::parse("otsu")), "otsu", "set", images, {32, 5, 9});
    const auto b = evaluate_pairs(make_binarizer(MethodSpec::parse("niblack")), "niblack", "set", images, {32, 5, 9});
    const auto c = evaluate_pairs(make_binarizer(MethodSpec::parse("otsu")), "otsu", "set", images, {32, 5, 10});
    ASSERT_EQ(a.reports.size(), b.reports.size());
    bool moved = false;
    for (std::size_t i = 0; i < a.reports.size(); ++i) {
        EXPECT_EQ(a.reports[i].image_id, b.reports[i].image_id);
        moved |= a.reports[i].image_id != c.reports[i].image_id;
    }
    EXPECT_TRUE(moved);
    const auto again = evaluate_pairs(make_binarizer(MethodSpec::parse("otsu")), "otsu", "set", images, {32, 5, 9});
    EXPECT_EQ(markdown_table({a}), markdown_table({again}));
}

TEST(Evaluate, PairingErrorsPropagate) {
    TempDir dir("orphan");
    save_png(RasterImage(20, 20, 3, 0.5f), dir.path() / "lonely.png");
    EXPECT_THROW(evaluate("otsu", dir.path(), {16, 1, 0}), DataError);
}

TEST(Evaluate, BiNetCheckpointMethod) {
    TempDir dir("binet_method");
    const auto ckpt = write_binet(dir.path(), "model", binet::BiNetConfig::desk());
    synth::write_dataset(dir.path() / "set", 2, 40, 40, synth::DegradationStyle::seen(), 5);
    const auto run = evaluate("binet:" + ckpt.string(), dir.path() / "set", {32, 2, 0});
    EXPECT_EQ(run.reports.size(), 4u);
    EXPECT_THROW(evaluate("binet:" + (dir.path() / "nope.ckpt").string(), dir.path() / "set", {32, 2, 0}), IoError);
}

TEST(Formatting, PercentWithThreeDecimals) {
    EXPECT_EQ(percent3(0.94333), "94.333");
    EXPECT_EQ(percent3(1.0), "100.000");
    EXPECT_EQ(fixed3(std::numeric_limits<double>::infinity()), "inf");
}

TEST(Formatting, TableHasArrowsAndFootnotes) {
    EvalRun run;
    run.method = "otsu";
    run.dataset = "d";
    run.reports = {row(0.94333, std::numeric_limits<double>::infinity(), std::nullopt), row(0.94333, 18.0, 2.0)};
    run.summary = aggregate(run.reports);
    const auto table = markdown_table({run});
    EXPECT_NE(table.find("| Method | Dataset | FM ↑ | pFM ↑ | PSNR ↑ | DRD ↓ |"), std::string::npos) << table;
    EXPECT_NE(table.find("| otsu | d | 94.333 | 94.333 | 18.000 | 2.000 |"), std::string::npos) << table;
    EXPECT_NE(table.find("1 of 2 patches had infinite PSNR"), std::string::npos) << table;
    EXPECT_NE(table.find("DRD undefined"), std::string::npos) << table;
}

TEST(Report, OneRunGivesCsvTableAndGrid) {
    TempDir dir("report");
    const auto images = synth::make_pairs(2, 48, 48, synth::DegradationStyle::seen(), 1, "set/img");
    const auto run = evaluate_pairs(make_binarizer(MethodSpec::parse("otsu")), "otsu", "set", images, {32, 2, 3});
    const auto files = report({run}, dir.path() / "out");
    ASSERT_EQ(files.csvs.size(), 1u);
    const auto csv = slurp(files.csvs.front());
    EXPECT_EQ(csv.rfind("# method=otsu dataset=set seed=3", 0), 0u) << csv;
    EXPECT_NE(csv.find("image_id,FM,pFM,PSNR,DRD\n"), std::string::npos);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2 + 4 + 1);
    EXPECT_TRUE(fs::exists(files.table));
    const auto grid = load_image(files.grid);
    EXPECT_EQ(grid.height(), 32 + 8);
    EXPECT_EQ(grid.width(), 3 * 32 + 16);
}

TEST(Report, CsvRowsComeFromTheMetricsModule) {
    const auto images = synth::make_pairs(1, 40, 40, synth::DegradationStyle::seen(), 8, "set/img");
    const auto binarizer = make_binarizer(MethodSpec::parse("sauvola"));
    const auto run = evaluate_pairs(binarizer, "sauvola", "set", images, {32, 1, 3});
    const auto patch = evaluation_patches(images, {32, 1, 3}).front();
    const auto expect = metrics::score(binarizer(patch.input), patch.target, patch.origin);
    EXPECT_EQ(run.reports.front().f_measure, expect.f_measure);
    EXPECT_NE(run_csv(run).find(full_precision(expect.f_measure)), std::string::npos);
}

TEST(Report, EmptyRunSetIsAUsageError) {
    TempDir dir("empty");
    EXPECT_THROW(report({}, dir.path()), ArgumentError);
}

TEST(Report, UnwritableDirectoryIsIoError) {
    TempDir dir("unwritable");
    std::ofstream(dir.path() / "file") << "x";
    EvalRun run;
    run.method = "m";
    run.dataset = "d";
    EXPECT_THROW(report({run}, dir.path() / "file" / "sub"), IoError);
}

TEST(Ablation, TwoArmsGiveTwoRunsPerDatasetAndMissingArmsAreSkipped) {
    TempDir dir("ablation");
    synth::write_dataset(dir.path() / "a", 1, 40, 40, synth::DegradationStyle::seen(), 1);
    synth::write_dataset(dir.path() / "b", 1, 40, 40, synth::DegradationStyle::held_out(), 2);
    const auto proposed = write_binet(dir.path(), "proposed", binet::BiNetConfig::desk());
    const auto no_aug = write_binet(dir.path(), "noaug", binet::BiNetConfig::desk());
    const auto result = ablation_matrix({{"proposed", proposed.string()},
                                         {"no-aug", no_aug.string()},
                                         {"parent", (dir.path() / "missing.ckpt").string()}},
                                        {dir.path() / "a", dir.path() / "b"}, {32, 2, 0});
    EXPECT_EQ(result.runs.size(), 4u);
    ASSERT_EQ(result.skipped.size(), 1u);
    EXPECT_EQ(result.skipped.front().rfind("parent:", 0), 0u);
    EXPECT_EQ(result.runs[0].method, "proposed");
    EXPECT_EQ(result.runs[0].dataset, "a");
    EXPECT_EQ(result.runs[3].method, "no-aug");
    EXPECT_EQ(result.runs[3].dataset, "b");
}

TEST(Ablation, ParentArmMustBeTransposeWithoutResiduals) {
    TempDir dir("parent");
    synth::write_dataset(dir.path() / "a", 1, 40, 40, synth::DegradationStyle::seen(), 1);
    const auto wrong = write_binet(dir.path(), "wrong", binet::BiNetConfig::desk());
    const auto right = write_binet(dir.path(), "right", binet::BiNetConfig::parent(binet::BiNetConfig::desk()));
    EXPECT_THROW(ablation_matrix({{"parent", wrong.string()}}, {dir.path() / "a"}, {32, 1, 0}), ConfigError);
    const auto ok = ablation_matrix({{"parent", right.string()}}, {dir.path() / "a"}, {32, 1, 0});
    EXPECT_EQ(ok.runs.size(), 1u);
    EXPECT_EQ(train::load_binet(right).config.generator.upsampling, binet::Upsampling::Transpose);
}
