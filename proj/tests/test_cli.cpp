#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"
#include "support/synthdoc.hpp"

namespace fs = std::filesystem;
namespace synth = docbin::testing;
using nlohmann::json;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(DOCBIN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        root_ = fs::temp_directory_path() / ("docbin_cli_" + std::to_string(::getpid()) + "_" +
                                             ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(root_);
        synth::write_dataset(root_ / "data", 2, 64, 64, synth::DegradationStyle::seen(), 1);
    }
    void TearDown() override { fs::remove_all(root_); }

    std::string path(const std::string& rel) const { return (root_ / rel).string(); }

    void write_json(const std::string& rel, const json& j) const {
        std::ofstream(root_ / rel) << j.dump(2);
    }

    json tiny_training(const std::string& stage) const {
        return {{"stage", stage},
                {"preset", "desk"},
                {"epochs", 1},
                {"batch_size", 2},
                {"mix_ratio", 0.0},
                {"train_dirs", {path("data")}},
                {"patches", {{"extract_size", 32}, {"stride", 32}, {"jitter", 0}, {"out_size", 32}}},
                {"max_steps", 2}};
    }

    fs::path root_;
};

}  // namespace

TEST_F(Cli, HelpAndUsageErrors) {
    EXPECT_EQ(run("--help"), 0);
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("evaluate --method otsu"), 2);
    EXPECT_EQ(run("evaluate --method otsu:3 --dataset " + path("data") + " --out " + path("r")), 2);
    EXPECT_EQ(run("train-binet --config x.json --pretrain --adv"), 2);
}

TEST_F(Cli, BaselineWritesMask) {
    EXPECT_EQ(run("baseline --method sauvola --window 15 --input " + path("data/doc0.png") + " --out " +
                  path("m.png")),
              0);
    EXPECT_TRUE(fs::exists(root_ / "m.png"));
    EXPECT_EQ(run("baseline --method otsu --input " + path("missing.png") + " --out " + path("m2.png")), 3);
}

TEST_F(Cli, EvaluateWritesReport) {
    EXPECT_EQ(run("evaluate --method otsu --dataset " + path("data") + " --out " + path("r") + " --patch-size 32"), 0);
    EXPECT_TRUE(fs::exists(root_ / "r" / "table.md"));
    EXPECT_TRUE(fs::exists(root_ / "r" / "grid.png"));
    EXPECT_EQ(run("evaluate --method otsu --dataset " + path("nowhere") + " --out " + path("r2")), 3);
}

TEST_F(Cli, ReportCoversEveryCombination) {
    EXPECT_EQ(run("report --method otsu --method niblack --dataset " + path("data") + " --out " + path("r") +
                  " --patch-size 32 --patches 2"),
              0);
    int csvs = 0;
    for (const auto& e : fs::directory_iterator(root_ / "r")) csvs += e.path().extension() == ".csv";
    EXPECT_EQ(csvs, 2);
}

TEST_F(Cli, TrainingConfigErrorsExitWithTwo) {
    write_json("bad.json", {{"stage", "binet-pretrain"}, {"learning_rate", 1}});
    EXPECT_EQ(run("train-binet --config " + path("bad.json") + " --out " + path("o")), 2);
    EXPECT_EQ(run("train-augnet --config " + path("absent.json") + " --out " + path("o")), 2);
}

TEST_F(Cli, TrainBinarizeAndAblate) {
    write_json("pre.json", tiny_training("binet-adv"));
    ASSERT_EQ(run("train-binet --pretrain --config " + path("pre.json") + " --out " + path("pre") + " --seed 3"), 0);
    const auto ckpt = root_ / "pre" / "binet-pretrain.ckpt";
    ASSERT_TRUE(fs::exists(ckpt));

    EXPECT_EQ(run("binarize --weights " + ckpt.string() + " --input " + path("data/doc1.png") + " --out " +
                  path("b.png") + " --tile 32 --overlap 8"),
              0);
    EXPECT_TRUE(fs::exists(root_ / "b.png"));

    std::ofstream(root_ / "broken.ckpt") << "DOCBINCK garbage";
    EXPECT_EQ(run("binarize --weights " + path("broken.ckpt") + " --input " + path("data/doc1.png") + " --out " +
                  path("c.png")),
              3);

    write_json("ablate.json", {{"arms", {{{"name", "proposed"}, {"checkpoint", ckpt.string()}},
                                         {{"name", "no-aug"}, {"checkpoint", path("none.ckpt")}}}},
                               {"datasets", {path("data")}},
                               {"patch_size", 32},
                               {"patches_per_image", 1}});
    EXPECT_EQ(run("ablate --config " + path("ablate.json") + " --out " + path("ab")), 0);
    std::ifstream table(root_ / "ab" / "table.md");
    const std::string text((std::istreambuf_iterator<char>(table)), std::istreambuf_iterator<char>());
    EXPECT_NE(text.find("no-aug"), std::string::npos);

    write_json("dead.json", {{"arms", {{{"name", "x"}, {"checkpoint", path("none.ckpt")}}}},
                             {"datasets", {path("data")}}});
    EXPECT_EQ(run("ablate --config " + path("dead.json") + " --out " + path("ab2")), 3);
}
