#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "depthedge/image_io.hpp"
#include "depthedge/segment.hpp"

#ifndef DEPTHEDGE_CLI
#error "DEPTHEDGE_CLI must name the CLI binary"
#endif

namespace depthedge {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("depthedge_cli_" + std::string(info->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override {
        if (!HasFailure()) fs::remove_all(dir_);
    }

    // Runs the CLI inside the test directory; returns its exit code.
    int run(const std::string& args) const {
        const std::string cmd = "cd '" + dir_.string() + "' && '" DEPTHEDGE_CLI "' " + args + " >out.log 2>err.log";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
    std::string err() const { return read_file(dir_ / "err.log"); }
    void write(const std::string& name, const std::string& text) const { std::ofstream(dir_ / name) << text; }

    fs::path dir_;
};

// Quick settings for a small dataset.
const char* kTinyConfig =
    "train.epochs = 1\n"
    "train.patch_size = 32\n"
    "train.batch_size = 2\n"
    "train.patches_per_scene = 1\n"
    "arch.encoder_depth = 2\n"
    "arch.widths = 4,8\n";

std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file(e.path());
    return files;
}

TEST_F(Cli, PipelineEndToEnd) {
    write("tiny.txt", kTinyConfig);
    ASSERT_EQ(run("-q gen -o ds -n 8 --width 48 --height 48 --seed 5"), 0) << err();
    ASSERT_EQ(run("-q gt --dataset ds"), 0) << err();
    const auto inputs = snapshot(dir_ / "ds");
    ASSERT_EQ(run("-q -c tiny.txt train --dataset ds -o model.bin"), 0) << err();
    ASSERT_EQ(run("-q -c tiny.txt infer -m model.bin --dataset ds -o pred"), 0) << err();
    ASSERT_EQ(run("-q segment --predictions pred --dataset ds -o hier"), 0) << err();
    ASSERT_EQ(run("-q eval --hierarchies hier --dataset ds -o eval --baselines"), 0) << err();

    EXPECT_TRUE(fs::exists(dir_ / "model.loss.csv"));
    EXPECT_TRUE(fs::exists(dir_ / "hier/scene_0007/overlay.ppm"));
    EXPECT_TRUE(fs::exists(dir_ / "eval/fusion/scene_0000.csv"));
    const std::string table = read_file(dir_ / "eval/summary.txt");
    for (const char* m : {"fusion", "color", "disparity", "normals", "agnostic"})
        EXPECT_NE(table.find(m), std::string::npos) << table;
    EXPECT_EQ(snapshot(dir_ / "ds"), inputs) << "a stage modified the dataset";
}

TEST_F(Cli, ParallelJobsMatchSerial) {
    write("tiny.txt", kTinyConfig);
    for (const std::string jobs : {"1", "3"}) {
        const std::string j = "-q -j " + jobs + " ";
        ASSERT_EQ(run(j + "gen -o ds" + jobs + " -n 5 --width 40 --height 40 --seed 9"), 0) << err();
        ASSERT_EQ(run(j + "gt --dataset ds" + jobs), 0) << err();
        ASSERT_EQ(run(j + "-c tiny.txt train --dataset ds" + jobs + " -o m" + jobs + ".bin"), 0) << err();
        ASSERT_EQ(run(j + "infer -m m" + jobs + ".bin --dataset ds" + jobs + " -o p" + jobs), 0) << err();
        ASSERT_EQ(run(j + "segment --predictions p" + jobs + " -o h" + jobs), 0) << err();
    }
    EXPECT_EQ(snapshot(dir_ / "ds1"), snapshot(dir_ / "ds3"));
    EXPECT_EQ(read_file(dir_ / "m1.bin"), read_file(dir_ / "m3.bin"));
    EXPECT_EQ(snapshot(dir_ / "p1"), snapshot(dir_ / "p3"));
    EXPECT_EQ(snapshot(dir_ / "h1"), snapshot(dir_ / "h3"));
}

TEST_F(Cli, SegmentRecoversTwoObjects) {
    // Background at disparity 10, a rectangle at 30 and a disc at 50.
    const int w = 48, h = 48;
    Image d(w, h, 1, 10.0f);
    std::vector<int> truth(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int label = 0;
            if (x >= 5 && x < 20 && y >= 6 && y < 40) label = 1;
            if ((x - 33) * (x - 33) + (y - 24) * (y - 24) <= 64) label = 2;
            d.at(x, y) = label == 0 ? 10.0f : label == 1 ? 30.0f : 50.0f;
            truth[static_cast<std::size_t>(y) * w + x] = label;
        }
    write_pfm(dir_ / "disp.pfm", d);
    write("camera.txt", "focal 100\ncx 24\ncy 24\ndisparity_scale 100\n");
    ASSERT_EQ(run("gt --disparity disp.pfm --camera camera.txt -o gt"), 0) << err();
    ASSERT_EQ(run("segment --edges gt/edges.pfm -o seg"), 0) << err();
    const SegmentationHierarchy hier = read_hierarchy(dir_ / "seg/tree.txt", dir_ / "seg/labels.pgm");

    // An ideal step puts the contour ridge one pixel outside each side and
    // leaves a thin strip region along it, so compare only pixels more than two
    // pixels from a true boundary: at some threshold each object's interior is
    // one region and distinct objects get distinct regions.
    auto interior = [&](int x, int y) {
        for (int dy = -2; dy <= 2; ++dy)
            for (int dx = -2; dx <= 2; ++dx) {
                const int u = std::clamp(x + dx, 0, w - 1), v = std::clamp(y + dy, 0, h - 1);
                if (truth[static_cast<std::size_t>(v) * w + u] != truth[static_cast<std::size_t>(y) * w + x]) return false;
            }
        return true;
    };
    bool found = false;
    for (double t = 0.0; t <= 1.0 && !found; t += 0.01) {
        const std::vector<int> labels = threshold_segmentation(hier, t);
        std::map<int, std::set<int>> regions_of;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (interior(x, y))
                    regions_of[truth[static_cast<std::size_t>(y) * w + x]].insert(labels[static_cast<std::size_t>(y) * w + x]);
        std::set<int> used;
        bool ok = regions_of.size() == 3;
        for (const auto& [object, regions] : regions_of) ok = ok && regions.size() == 1 && used.insert(*regions.begin()).second;
        found = ok;
    }
    EXPECT_TRUE(found);
}

TEST_F(Cli, RefineWritesReport) {
    Image x0(16, 8, 1), contour(16, 8, 1), dirs(16, 8, 3);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 16; ++x) {
            x0.at(x, y) = x < 8 ? 1.0f : 5.0f;
            if (x == 7) contour.at(x, y) = 1.0f, dirs.at(x, y, 0) = 1.0f;
        }
    write_pfm(dir_ / "x0.pfm", x0);
    write_pfm(dir_ / "c.pfm", contour);
    write_pfm(dir_ / "d.pfm", dirs);
    ASSERT_EQ(run("refine --disparity x0.pfm --contour c.pfm --directions d.pfm -o r.pfm --report r.txt"), 0) << err();
    EXPECT_EQ(read_pfm(dir_ / "r.pfm").width(), 16);
    EXPECT_NE(read_file(dir_ / "r.txt").find("level 0 16x8"), std::string::npos);

    Image small(8, 8, 1);
    write_pfm(dir_ / "small.pfm", small);
    EXPECT_EQ(run("refine --disparity small.pfm --contour c.pfm --directions d.pfm -o r2.pfm"), 4) << err();
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("gen"), 2);
    EXPECT_EQ(run("--help"), 0);
    EXPECT_EQ(run("segment --help"), 0);
    EXPECT_NE(read_file(dir_ / "out.log").find("--predictions"), std::string::npos);

    write("bad.txt", "refine.mu = 1\nrefine.oops = 2\n");
    EXPECT_EQ(run("-c bad.txt config"), 3);
    EXPECT_NE(err().find("bad.txt:2"), std::string::npos) << err();

    write("junk.pfm", "P5\nnot a pfm\n");
    EXPECT_EQ(run("segment --edges junk.pfm -o s"), 3);
    EXPECT_NE(err().find("junk.pfm"), std::string::npos) << err();

    EXPECT_EQ(run("segment --edges missing.pfm -o s"), 8);
    EXPECT_EQ(run("segment -o s"), 5);
}

TEST_F(Cli, InferRejectsArchitectureMismatch) {
    write("tiny.txt", kTinyConfig);
    write("other.txt", "arch.encoder_depth = 3\narch.widths = 4,8,16\n");
    ASSERT_EQ(run("-q gen -o ds -n 2 --width 32 --height 32"), 0) << err();
    ASSERT_EQ(run("-q gt --dataset ds"), 0) << err();
    ASSERT_EQ(run("-q -c tiny.txt train --dataset ds -o m.bin"), 0) << err();
    EXPECT_EQ(run("-c other.txt infer -m m.bin --scene ds/scene_0000 -o p"), 7) << err();
    EXPECT_EQ(run("-c tiny.txt infer -m m.bin --scene ds/scene_0000 -o p"), 0) << err();

    write("m.bin", "XXXX" + read_file(dir_ / "m.bin").substr(4));
    EXPECT_EQ(run("infer -m m.bin --scene ds/scene_0000 -o p"), 3);
}

TEST_F(Cli, TrainNeedsTruth) {
    ASSERT_EQ(run("-q gen -o ds -n 2 --width 32 --height 32"), 0) << err();
    EXPECT_EQ(run("train --dataset ds -o m.bin"), 5);
    EXPECT_NE(err().find("ground truth"), std::string::npos) << err();
}

}  // namespace
}  // namespace depthedge
