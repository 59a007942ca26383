#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "mosaic/arch.hpp"
#include "mosaic/config_io.hpp"
#include "mosaic/cost.hpp"
#include "mosaic/image_io.hpp"
#include "mosaic/selftest.hpp"
#include "mosaic/weights.hpp"

using namespace mosaic;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(MOSAIC_SOURCE_DIR) / "configs";

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "mosaic");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("mosaic_cli_test_" + name);
}

fs::path write_text(const std::string& name, const std::string& text) {
  fs::path p = temp_file(name);
  std::ofstream(p) << text;
  return p;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) out.push_back(line);
  return out;
}

// Small config that keeps forward passes fast.
fs::path small_config() {
  ModelConfig cfg;
  cfg.m = 64;
  cfg.num_classes = 7;
  cfg.input_h = 64;
  cfg.input_w = 96;
  cfg.encoder.pyramid_bins = {1, 2, 4};
  return write_text("small.cfg", format_model_config(cfg));
}

}  // namespace

TEST(Describe, HeadlineListsTapsAndStages) {
  auto r = run({"describe", (kConfigs / "cityscapes.cfg").string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("os2\tbackbone/stem/relu\t512x1024x32"), std::string::npos);
  EXPECT_NE(r.out.find("os4\tbackbone/bneck03/add\t256x512x32"), std::string::npos);
  EXPECT_NE(r.out.find("os8\tbackbone/bneck07/add\t128x256x64"), std::string::npos);
  EXPECT_NE(r.out.find("os16\tbackbone/endpoint/relu\t64x128x480"), std::string::npos);
  EXPECT_NE(r.out.find("decoder/merge_os8/concat"), std::string::npos);
  EXPECT_NE(r.out.find("decoder/merge_os4/add"), std::string::npos);
}

TEST(Describe, SingleSkipHasOneMergeBlock) {
  auto cfg = write_text("one_skip.cfg", "skips=8-C\n");
  auto r = run({"describe", cfg.string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("decoder/merge_os8/"), std::string::npos);
  EXPECT_EQ(r.out.find("decoder/merge_os4/"), std::string::npos);
}

TEST(Describe, MalformedConfigExitsTwoNamingKey) {
  auto cfg = write_text("bad.cfg", "pyramid_bins=0\n");
  auto r = run({"describe", cfg.string()});
  EXPECT_EQ(r.code, cli::kUsageError);
  EXPECT_NE(r.err.find("pyramid_bins"), std::string::npos) << r.err;
}

TEST(Describe, MissingConfigFileIsUsageError) {
  EXPECT_EQ(run({"describe", "/nonexistent/x.cfg"}).code, cli::kUsageError);
}

TEST(Cost, CsvTotalMatchesLibrary) {
  auto r = run({"cost", "--csv", (kConfigs / "cityscapes.cfg").string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  auto rows = lines(r.out);
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows.front(), "label,madds,madds_B,params");
  const std::string last = rows.back();
  ASSERT_EQ(last.rfind("total,", 0), 0u) << last;
  std::uint64_t total = std::stoull(last.substr(6, last.find(',', 6) - 6));
  ModelConfig cfg;
  EXPECT_EQ(total, count_model(build_model(cfg), cfg.input_h, cfg.input_w).total_madds);
}

TEST(Cost, PolicyFlag) {
  auto standard = run({"cost", "--csv", "--policy", "standard"});
  auto everything = run({"cost", "--csv", "--policy", "everything"});
  ASSERT_EQ(standard.code, cli::kOk);
  ASSERT_EQ(everything.code, cli::kOk);
  EXPECT_NE(standard.out, everything.out);
  EXPECT_EQ(run({"cost", "--policy", "most"}).code, cli::kUsageError);
}

TEST(Ablate, SkipRowsInInputOrder) {
  const std::vector<std::string> variants{"0",       "4-S",     "4-C",     "8-C",
                                          "8-C,4-S", "8-S,4-S", "8-C,4-C", "8-C,4-S,2-S"};
  std::string joined;
  for (const auto& v : variants) joined += (joined.empty() ? "" : ";") + v;
  auto r = run({"ablate", "--csv", "--axis", "skips", "--variants", joined,
                (kConfigs / "cityscapes.cfg").string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), variants.size() + 1);
  for (std::size_t i = 0; i < variants.size(); ++i)
    EXPECT_EQ(rows[i + 1].rfind("\"" + variants[i] + "\",", 0), 0u) << rows[i + 1];
}

TEST(Ablate, PyramidSevenRows) {
  auto r = run({"ablate", "--axis", "pyramid", "--variants",
                "4,8,16;4,8;4,16;8,16;1,4,8,16;4,8,16:N;1,4,8,16:N"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(lines(r.out).size(), 8u);
}

TEST(Ablate, EmptyVariantListIsUsageError) {
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_ablate(std::nullopt, "skips", {}, false, CountingPolicy::Standard, out, err),
            cli::kUsageError);
  EXPECT_EQ(run({"ablate", "--axis", "skips"}).code, cli::kUsageError);
  EXPECT_EQ(run({"ablate", "--axis", "depth", "--variants", "1"}).code, cli::kUsageError);
}

TEST(Run, AdeForwardPassWritesValidLabels) {
  auto out_path = temp_file("ade.pgm");
  auto r = run({"run", (kConfigs / "ade20k.cfg").string(), "--seed", "7", "--output",
                out_path.string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  LabelMap labels = read_labelmap_pgm(out_path);
  EXPECT_EQ(labels.h, 512);
  EXPECT_EQ(labels.w, 512);
  for (auto v : labels.labels) {
    ASSERT_GE(v, 0);
    ASSERT_LT(v, 32);
  }
  EXPECT_NE(r.out.find("stage backbone"), std::string::npos);
  fs::remove(out_path);
}

TEST(Run, SeedRunsAreByteIdenticalAndMatchSavedWeights) {
  auto cfg = small_config();
  auto a = temp_file("a.pgm"), b = temp_file("b.pgm"), c = temp_file("c.pgm");
  ASSERT_EQ(run({"run", cfg.string(), "--seed", "3", "--output", a.string()}).code, cli::kOk);
  ASSERT_EQ(run({"run", cfg.string(), "--seed", "3", "--output", b.string()}).code, cli::kOk);
  EXPECT_EQ(read_file_bytes(a), read_file_bytes(b));

  // Same weights from a file, and the same input image, give the same labels.
  Model model = build_model(load_model_config(cfg));
  auto weights = temp_file("w.mosw");
  save_weights(init_weights(model.graph, 3), weights);
  std::vector<std::uint8_t> rgb(64 * 96 * 3);
  for (std::size_t i = 0; i < rgb.size(); ++i) rgb[i] = static_cast<std::uint8_t>((i * 37) % 256);
  auto image = temp_file("in.ppm");
  write_file_bytes(image, encode_ppm(64, 96, rgb));
  ASSERT_EQ(run({"run", cfg.string(), "--seed", "3", "--input", image.string(), "--output",
                 a.string()}).code,
            cli::kOk);
  ASSERT_EQ(run({"run", cfg.string(), "--weights", weights.string(), "--input", image.string(),
                 "--output", c.string()}).code,
            cli::kOk);
  EXPECT_EQ(read_file_bytes(a), read_file_bytes(c));
  for (const auto& p : {a, b, c, weights, image}) fs::remove(p);
}

TEST(Run, WrongImageSizeIsUsageError) {
  std::vector<std::uint8_t> rgb(513 * 512 * 3, 128);
  auto image = temp_file("wrong.ppm");
  write_file_bytes(image, encode_ppm(513, 512, rgb));
  auto r = run({"run", (kConfigs / "ade20k.cfg").string(), "--seed", "1", "--input",
                image.string(), "--output", temp_file("never.pgm").string()});
  EXPECT_EQ(r.code, cli::kUsageError);
  EXPECT_NE(r.err.find("513"), std::string::npos) << r.err;
  fs::remove(image);
}

TEST(Run, NeedsWeightsOrSeed) {
  EXPECT_EQ(run({"run", "--output", temp_file("x.pgm").string()}).code, cli::kUsageError);
}

TEST(Selftest, PassesAndInjectedFaultIsCaught) {
  auto r = run({"selftest"});
  EXPECT_EQ(r.code, cli::kOk) << r.out;
  EXPECT_NE(r.out.find("all checks passed"), std::string::npos);

  auto off_by_one = [](const TensorShape& in, const ConvParams& p) {
    TensorShape s = conv_output_shape(in, p);
    if (p.stride == 2 && in.h % 2 == 1) s.h -= 1;  // floor instead of ceil
    return s;
  };
  EXPECT_FALSE(check_same_shape_law(off_by_one).passed);
  EXPECT_TRUE(check_same_shape_law().passed);
}

TEST(Selftest, SkipOrderingSurvivesPolicyChange) {
  EXPECT_TRUE(check_policy_preserves_skip_ordering().passed);
}

TEST(Cli, UnknownFlagAndMissingVerb) {
  EXPECT_EQ(run({"cost", "--bogus"}).code, cli::kUsageError);
  EXPECT_EQ(run({}).code, cli::kUsageError);
  EXPECT_EQ(run({"--help"}).code, cli::kOk);
}
