#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include "ganblend/blend.hpp"
#include "ganblend/cli.hpp"
#include "ganblend/grid.hpp"
#include "ganblend/png_io.hpp"
#include "ganblend/projector.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace ganblend;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ganblend");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<char> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    base = (dir / "b.gwt").string();
    transfer = (dir / "t.gwt").string();
    ASSERT_EQ(run_cli({"init-base", "--seed", "0", "-o", base}).code, 0);
    ASSERT_EQ(run_cli({"make-transfer", "--base", base, "--strength", "0.5", "--seed", "1", "-o", transfer}).code, 0);
  }
  testutil::TempDir dir;
  std::string base, transfer;
};

}  // namespace

TEST_F(CliTest, InitAndTransferMatchLibrary) {
  EXPECT_TRUE(bit_equal(load(base), testutil::base_fixture()));
  EXPECT_TRUE(bit_equal(load(transfer), testutil::transfer_fixture()));
}

TEST_F(CliTest, InitWithConfigJson) {
  const auto path = (dir / "s.gwt").string();
  const auto json = config_to_json(testutil::small_config());
  ASSERT_EQ(run_cli({"init-base", "--config", json, "--seed", "4", "-o", path}).code, 0);
  EXPECT_TRUE(bit_equal(load(path), init_random(testutil::small_config(), 4)));
  std::ofstream(dir / "cfg.json") << json;
  const auto path2 = (dir / "s2.gwt").string();
  ASSERT_EQ(run_cli({"init-base", "--config", (dir / "cfg.json").string(), "--seed", "4", "-o", path2}).code, 0);
  EXPECT_EQ(read_file(path), read_file(path2));
}

TEST_F(CliTest, BlendSwapMatchesLibraryAndDefaultsToBaseMapping) {
  const auto out = (dir / "x.gwt").string();
  const auto r = run_cli({"blend", "--base", base, "--transfer", transfer, "--swap-at", "16", "--low-from",
                      "transfer", "--mapping", "base", "-o", out});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto want = blend_checkpoints(testutil::base_fixture(), testutil::transfer_fixture(),
                                      SwapSchedule{16, Donor::Transfer}, MappingPolicy::base());
  EXPECT_TRUE(bit_equal(load(out), want));

  const auto out2 = (dir / "y.gwt").string();
  ASSERT_EQ(run_cli({"blend", "--base", base, "--transfer", transfer, "--swap-at", "16", "-o", out2}).code, 0);
  EXPECT_EQ(read_file(out), read_file(out2));
}

TEST_F(CliTest, BlendWithScheduleJson) {
  const auto out = (dir / "x.gwt").string();
  const std::string sched = R"({"kind":"linear_log","r_lo":4,"r_hi":64,"alpha_lo":0.0,"alpha_hi":1.0})";
  ASSERT_EQ(run_cli({"blend", "--base", base, "--transfer", transfer, "--schedule", sched, "--mapping", "0.5",
                 "-o", out}).code, 0);
  const auto want = blend_checkpoints(testutil::base_fixture(), testutil::transfer_fixture(),
                                      schedule_from_json(sched), MappingPolicy::mix(0.5f));
  EXPECT_TRUE(bit_equal(load(out), want));
}

TEST_F(CliTest, BlendErrors) {
  const auto out = (dir / "x.gwt").string();
  auto r = run_cli({"blend", "--base", base, "--transfer", transfer, "--swap-at", "3", "-o", out});
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(r.err.starts_with("error: ")) << r.err;
  EXPECT_NE(r.err.find("not a valid band"), std::string::npos);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
  EXPECT_FALSE(std::filesystem::exists(out));

  r = run_cli({"blend", "--base", base, "--transfer", (dir / "missing.gwt").string(), "-o", out});
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(r.err.starts_with("error: "));

  r = run_cli({"blend", "--base", base, "--transfer", transfer, "--low-from", "sideways", "-o", out});
  EXPECT_EQ(r.code, 1);
  r = run_cli({"blend", "--base", base, "--transfer", transfer, "--mapping", "2", "-o", out});
  EXPECT_EQ(r.code, 1);
  r = run_cli({"blend", "--base", base, "-o", out});
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(r.err.starts_with("error: "));
}

TEST_F(CliTest, InspectPrintsOneLinePerParameter) {
  const auto r = run_cli({"inspect", base});
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  std::string line;
  int rows = 0;
  bool saw = false;
  while (std::getline(in, line)) {
    if (line.starts_with("#")) continue;
    ++rows;
    if (line.starts_with("synthesis.b16.conv1.weight\t")) {
      EXPECT_EQ(line, "synthesis.b16.conv1.weight\tsynthesis\t16\tconv_weight\t[32,32,3,3]");
      saw = true;
    }
    if (line.starts_with("mapping.fc0.bias\t")) EXPECT_EQ(line, "mapping.fc0.bias\tmapping\t-\tmap_bias\t[64]");
  }
  EXPECT_EQ(rows, 70);
  EXPECT_TRUE(saw);
}

TEST_F(CliTest, SampleGridIsDeterministic) {
  const auto a = (dir / "a.png").string();
  const auto b = (dir / "b.png").string();
  ASSERT_EQ(run_cli({"sample", "--model", base, "--seed", "3", "--count", "24", "--columns", "6", "-o", a}).code, 0);
  ASSERT_EQ(run_cli({"sample", "--model", base, "--seed", "3", "--count", "24", "--columns", "6", "-o", b}).code, 0);
  EXPECT_EQ(read_file(a), read_file(b));
  const auto bytes = read_file(a);
  const auto raster = decode_png_bytes({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()});
  EXPECT_EQ(raster.width, 6u * 68);
  EXPECT_EQ(raster.height, 4u * 68);

  const auto one = (dir / "one.png").string();
  ASSERT_EQ(run_cli({"sample", "--model", base, "--count", "1", "-o", one}).code, 0);
  const auto b1 = read_file(one);
  const auto r1 = decode_png_bytes({reinterpret_cast<const std::uint8_t*>(b1.data()), b1.size()});
  EXPECT_EQ(r1.width, 68u);
  EXPECT_EQ(r1.height, 68u);

  EXPECT_EQ(run_cli({"sample", "--model", base, "--count", "0", "-o", one}).code, 1);
}

TEST_F(CliTest, ProjectAndToonify) {
  const auto target = dir / "target.png";
  encode_png(forward(testutil::base_fixture(), sample_latent(GeneratorConfig{}, 1, 0), NoiseSpec{0}), target);
  const auto latent = (dir / "latent.json").string();
  const auto recon = (dir / "recon.png").string();
  auto r = run_cli({"project", "--model", base, "--target", target.string(), "--steps", "2", "-o", latent,
                "--reconstruction", recon});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.starts_with("final_loss "));
  const auto j = nlohmann::json::parse(std::string(read_file(latent).data(), read_file(latent).size()));
  EXPECT_EQ(j.at("space"), "w");
  EXPECT_EQ(j.at("values").size(), 64u);
  EXPECT_EQ(j.at("model_id"), "b.gwt");
  EXPECT_TRUE(std::filesystem::exists(recon));

  const auto blended = (dir / "x.gwt").string();
  ASSERT_EQ(run_cli({"blend", "--base", base, "--transfer", transfer, "-o", blended}).code, 0);
  const auto toon = (dir / "toon.png").string();
  r = run_cli({"toonify", "--base", base, "--blended", blended, "--target", target.string(), "--steps", "2",
           "-o", toon, "--reconstruction", (dir / "recon2.png").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(recon), read_file(dir / "recon2.png"));
  EXPECT_NE(read_file(toon), read_file(recon));

  r = run_cli({"project", "--model", base, "--target", target.string(), "--space", "q", "-o", latent});
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(r.err.starts_with("error: "));
}

TEST(Cli, HelpOnEverySubcommand) {
  for (const char* sub : {"init-base", "make-transfer", "inspect", "blend", "sample", "project", "toonify", "serve"}) {
    const auto r = run_cli({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("Usage"), std::string::npos) << sub;
  }
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Cli, UsageErrors) {
  auto r = run_cli({});
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(r.err.starts_with("error: "));
  r = run_cli({"frobnicate"});
  EXPECT_EQ(r.code, 1);
  r = run_cli({"inspect", "/nonexistent.gwt"});
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(r.err.starts_with("error: "));
}
