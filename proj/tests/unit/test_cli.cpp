#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "quanvseg/formats.hpp"
#include "quanvseg/raster.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string output;
};

Run cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " \"" QUANVSEG_CLI_PATH "\" " + args + " 2>&1";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.output.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::path(::testing::TempDir()) / ("quanvseg_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string last_line(const std::string& text) {
    auto end = text.find_last_not_of('\n');
    auto start = text.rfind('\n', end);
    return text.substr(start == std::string::npos ? 0 : start + 1, end - (start == std::string::npos ? 0 : start + 1) + 1);
}

}  // namespace

TEST(Cli, NoArgumentsIsUsageError) { EXPECT_EQ(cli("").code, 2); }

TEST(Cli, HelpExitsZero) { EXPECT_EQ(cli("--help").code, 0); }

TEST(Cli, MissingInputFileIsUsageErrorNamingPath) {
    const auto dir = scratch("missing");
    const auto missing = (dir / "absent.pgm").string();
    const auto r = cli("quanvolve --input " + missing + " --output " + (dir / "o.qvt").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find(missing), std::string::npos) << r.output;
}

TEST(Cli, UnknownConfigKeyIsRuntimeError) {
    const auto r = cli("param-count --set no.such=1");
    EXPECT_EQ(r.code, 1) << r.output;
}

TEST(Cli, ParamCountReferences) {
    auto r = cli("param-count --reference baseline");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(last_line(r.output), "params=34876453 (34.9M)");
    r = cli("param-count --reference quantum");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(last_line(r.output).rfind("params=", 0), 0u);
}

TEST(Cli, EvalOfGroundTruthIsPerfect) {
    const auto dir = scratch("eval");
    quanvseg::nn::Tensor<float> masks({3, 1, 4, 4});
    for (std::size_t i = 0; i < masks.size(); ++i) masks[i] = (i % 3 == 0) ? 1.0f : 0.0f;
    quanvseg::io::write_tensor((dir / "m.qvt").string(), masks);
    const auto m = (dir / "m.qvt").string();
    const auto r = cli("eval --predictions " + m + " --masks " + m);
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(last_line(r.output), "OA=1.000000 IoU=1.000000");
}

TEST(Cli, GradcheckPasses) {
    const auto r = cli("gradcheck --seeds 2");
    EXPECT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(last_line(r.output), "gradcheck passed");
}

TEST(Cli, QuanvolveWithSavedCircuitIsBitIdentical) {
    const auto dir = scratch("quanv");
    quanvseg::Raster img(12, 10);
    for (std::size_t i = 0; i < img.values.size(); ++i) img.values[i] = static_cast<double>((i * 37) % 256) / 255.0;
    quanvseg::io::write_pgm((dir / "in.pgm").string(), quanvseg::io::raster_to_pgm(img));
    const auto in = (dir / "in.pgm").string();
    auto r = cli("quanvolve --input " + in + " --output " + (dir / "a.qvt").string() + " --circuit-out " +
                 (dir / "c.txt").string() + " --set circuit.template=random --set circuit.seed=17");
    ASSERT_EQ(r.code, 0) << r.output;
    r = cli("quanvolve --input " + in + " --output " + (dir / "b.qvt").string() + " --circuit-in " +
            (dir / "c.txt").string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(slurp(dir / "a.qvt"), slurp(dir / "b.qvt"));
    const auto t = quanvseg::io::read_tensor((dir / "a.qvt").string());
    EXPECT_EQ(t.dims(), (quanvseg::nn::Dims{9, 12, 10}));
}

TEST(Cli, EndToEndPipeline) {
    const auto dir = scratch("pipeline");
    const auto d = dir.string();
    auto r = cli("synth-data --output-dir " + d + "/scenes --scenes 2 --height 64 --width 64 --seed 3");
    ASSERT_EQ(r.code, 0) << r.output;
    r = cli("make-patches --image " + d + "/scenes/scene_0000.pgm --mask " + d + "/scenes/mask_0000.pgm --image " + d +
            "/scenes/scene_0001.pgm --mask " + d + "/scenes/mask_0001.pgm --output-dir " + d +
            "/patches --set data.patch=32 --set data.stride=16 --set data.test_fraction=0.25");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("patches=18 train=13 test=5"), std::string::npos) << r.output;
    r = cli("quanvolve --input " + d + "/patches/train_inputs.qvt --output " + d +
            "/train_q.qvt --set quanv.concat=true");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(quanvseg::io::read_tensor(d + "/train_q.qvt").dims(), (quanvseg::nn::Dims{13, 10, 32, 32}));
    r = cli("train --inputs " + d + "/train_q.qvt --masks " + d + "/patches/train_masks.qvt --checkpoint " + d +
            "/model.qvt --log " + d + "/log.tsv --set train.epochs=2 --set model.widths=4,8");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(slurp(dir / "log.tsv").rfind("epoch\tloss\ttrain_oa\n", 0), 0u);
    r = cli("predict --checkpoint " + d + "/model.qvt --inputs " + d + "/train_q.qvt --masks " + d +
            "/patches/train_masks.qvt --output-dir " + d + "/pred");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_TRUE(fs::exists(dir / "pred" / "pred_0012.pgm"));
    EXPECT_TRUE(fs::exists(dir / "pred" / "compare_0000.pgm"));
    r = cli("eval --checkpoint " + d + "/model.qvt --inputs " + d + "/train_q.qvt --masks " + d +
            "/patches/train_masks.qvt");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(last_line(r.output).rfind("OA=", 0), 0u);
}
