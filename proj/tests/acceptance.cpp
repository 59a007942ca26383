// Acceptance suite: one PASS/FAIL line per criterion. Every tolerance used
// below is pinned as a named constant. Exit status is nonzero when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "mosaic/arch.hpp"
#include "mosaic/config_io.hpp"
#include "mosaic/cost.hpp"
#include "mosaic/image_io.hpp"
#include "mosaic/kernels.hpp"
#include "mosaic/metrics.hpp"
#include "mosaic/reference.hpp"

using namespace mosaic;
namespace fs = std::filesystem;

namespace {

constexpr double kMaddsRelTol = 0.06;          // criteria 1, 2
constexpr double kHeadlineRefB = 20.86;
constexpr double kAdeRefB = 2.98;
constexpr double kCostRuntimeLimitS = 1.0;     // criterion 1
constexpr double kDeltaRelTol = 0.30;          // criterion 3, 4-S delta
constexpr double kDeltaRefB = 20.270 - 20.108;
constexpr int kCostOracleCases = 200;          // criterion 4
constexpr double kCostOracleLimitS = 30.0;
constexpr int kKernelCases = 100;              // criterion 5
constexpr double kKernelRelTol = 1e-5;
constexpr double kRunLimitS = 120.0;           // criterion 7
constexpr int kMiouCases = 1000;               // criterion 8
constexpr double kMiouAbsTol = 1e-12;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double billions(std::uint64_t v) { return static_cast<double>(v) / 1e9; }

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

int failures = 0;

void report(int id, bool ok, const std::string& title, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << id << " " << title << ": " << detail << std::endl;
  if (!ok) ++failures;
}

std::uint64_t madds(const ModelConfig& cfg) {
  return count_model(build_model(cfg), cfg.input_h, cfg.input_w).total_madds;
}

ModelConfig headline(AggregationWidthMode mode) {
  ModelConfig cfg;  // m=480, k=19, 1024x2048, enc 32, dec 64, bins 4,8,16, GC, 8-C,4-S
  cfg.aggregation_width_mode = mode;
  return cfg;
}

ModelConfig ade(AggregationWidthMode mode) {
  ModelConfig cfg = load_model_config(fs::path(MOSAIC_SOURCE_DIR) / "configs/ade20k.cfg");
  cfg.aggregation_width_mode = mode;
  return cfg;
}

const char* mode_name(AggregationWidthMode m) {
  return m == AggregationWidthMode::EncoderWidth ? "encoder-width" : "decoder-width";
}

// --- criteria 1 and 2 -------------------------------------------------------

void criterion_reconcile(int id, const char* title, double ref_b,
                         const std::function<ModelConfig(AggregationWidthMode)>& make) {
  const auto t0 = Clock::now();
  std::string detail;
  double best_gap = 1e9;
  const char* best_mode = "";
  for (auto mode : {AggregationWidthMode::EncoderWidth, AggregationWidthMode::DecoderWidth}) {
    const double b = billions(madds(make(mode)));
    const double gap = (b - ref_b) / ref_b;
    detail += std::string(mode_name(mode)) + " " + fmt("%.3fB", b) + " (" +
              fmt("%+.2f%%", 100 * gap) + ") ";
    if (std::abs(gap) < std::abs(best_gap)) {
      best_gap = gap;
      best_mode = mode_name(mode);
    }
  }
  const double elapsed = seconds_since(t0);
  const bool ok = std::abs(best_gap) <= kMaddsRelTol && (id != 1 || elapsed < kCostRuntimeLimitS);
  detail += "| best " + std::string(best_mode) + " gap " + fmt("%+.2f%%", 100 * best_gap) +
            " vs ref " + fmt("%.2fB", ref_b) + ", tol " + fmt("%.0f%%", 100 * kMaddsRelTol);
  if (id == 1) detail += ", " + fmt("%.3f s", elapsed);
  report(id, ok, title, detail);
}

// --- criterion 3 ------------------------------------------------------------

struct OrderRow {
  std::string label;
  double ref;
  ModelConfig cfg;
};

// Every pair the reference orders strictly must be ordered the same way.
std::vector<std::string> ordering_violations(const std::vector<OrderRow>& rows,
                                             std::vector<std::uint64_t>& ours) {
  ours.clear();
  for (const auto& r : rows) ours.push_back(madds(r.cfg));
  std::vector<std::string> bad;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.size(); ++j)
      if (rows[i].ref < rows[j].ref && !(ours[i] < ours[j]))
        bad.push_back(rows[i].label + "<" + rows[j].label);
  return bad;
}

std::vector<OrderRow> filter_rows(AggregationWidthMode mode) {
  const std::vector<std::tuple<int, int, double>> rows{
      {32, 16, 20.31}, {32, 32, 20.60}, {32, 64, 20.86},  {64, 16, 21.01}, {64, 32, 21.19},
      {64, 64, 21.55}, {64, 128, 22.29}, {16, 64, 20.59}, {128, 64, 23.55}};
  std::vector<OrderRow> out;
  for (auto [enc, dec, ref] : rows) {
    ModelConfig cfg = headline(mode);
    cfg.encoder.enc_filters = enc;
    cfg.decoder.dec_filters = dec;
    out.push_back({"(" + std::to_string(enc) + "," + std::to_string(dec) + ")", ref, cfg});
  }
  return out;
}

std::vector<OrderRow> pyramid_rows(AggregationWidthMode mode) {
  const std::vector<std::tuple<std::vector<int>, bool, double>> rows{
      {{1, 4}, true, 20.79},  {{4, 8}, true, 20.81},      {{4, 16}, true, 20.81},
      {{8, 16}, true, 20.82}, {{4, 8, 16}, true, 20.86},  {{4, 8, 16}, false, 20.87},
      {{1, 4, 8, 16}, true, 20.88}};
  std::vector<OrderRow> out;
  for (const auto& [bins, gc, ref] : rows) {
    ModelConfig cfg = headline(mode);
    cfg.encoder.pyramid_bins = bins;
    cfg.encoder.use_group_conv = gc;
    std::string label = "[";
    for (std::size_t i = 0; i < bins.size(); ++i) label += (i ? "," : "") + std::to_string(bins[i]);
    out.push_back({label + "]" + (gc ? "Y" : "N"), ref, cfg});
  }
  return out;
}

std::vector<OrderRow> skip_rows(AggregationWidthMode mode) {
  const std::vector<std::pair<std::string, double>> rows{
      {"0", 20.108},      {"4-S", 20.270},     {"4-C", 21.465},     {"8-C", 20.708},
      {"8-C,4-S", 20.860}, {"8-S,4-S", 20.390}, {"8-C,4-C", 21.685}, {"8-C,4-S,2-S", 21.186}};
  std::vector<OrderRow> out;
  for (const auto& [skips, ref] : rows) {
    ModelConfig cfg = headline(mode);
    cfg.decoder.skips = parse_skip_list(skips);
    out.push_back({skips, ref, cfg});
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : " ") + x;
  return s.empty() ? "none" : s;
}

void criterion_orderings() {
  std::string detail;
  bool ok = true;
  std::string info;
  for (auto mode : {AggregationWidthMode::EncoderWidth, AggregationWidthMode::DecoderWidth}) {
    const bool evaluated = mode == AggregationWidthMode::EncoderWidth;  // the default mode
    std::string part;
    std::vector<std::uint64_t> ours;
    std::size_t total_bad = 0;
    for (const auto& [name, rows] :
         std::vector<std::pair<std::string, std::vector<OrderRow>>>{
             {"filter-width", filter_rows(mode)}, {"pyramid", pyramid_rows(mode)}, {"skip", skip_rows(mode)}}) {
      auto bad = ordering_violations(rows, ours);
      total_bad += bad.size();
      part += name + " violations: " + join(bad) + "; ";
    }
    const double base = billions(madds(skip_rows(mode)[0].cfg));
    const double with4s = billions(madds(skip_rows(mode)[1].cfg));
    const double delta = with4s - base;
    const double rel = (delta - kDeltaRefB) / kDeltaRefB;
    const bool delta_ok = std::abs(rel) <= kDeltaRelTol;
    part += "4-S delta " + fmt("%.4fB", delta) + " vs " + fmt("%.3fB", kDeltaRefB) + " (" +
            fmt("%+.1f%%", 100 * rel) + ", tol " + fmt("%.0f%%", 100 * kDeltaRelTol) + ")";
    if (evaluated) {
      ok = total_bad == 0 && delta_ok;
      detail = std::string("[") + mode_name(mode) + "] " + part;
    } else {
      info = std::string("[") + mode_name(mode) + ", informational] " + part;
    }
  }
  report(3, ok, "ordering reproduction", detail);
  std::cout << "INFO 3 " << info << std::endl;
}

// --- criteria 4, 5 ----------------------------------------------------------

ConvParams random_conv(std::mt19937& rng, bool depthwise, int in_c) {
  auto pick = [&](std::vector<int> v) { return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)]; };
  ConvParams p;
  p.kernel_h = p.kernel_w = pick({1, 3, 5});
  p.stride = pick({1, 2});
  p.dilation = pick({1, 2});
  p.in_c = in_c;
  if (depthwise) {
    p.groups = p.out_c = in_c;
  } else {
    std::vector<int> groups{1};
    if (in_c % 2 == 0) groups.push_back(2);
    groups.push_back(in_c);
    p.groups = pick(groups);
    p.out_c = p.groups * std::uniform_int_distribution<int>(1, std::max(1, 16 / p.groups))(rng);
  }
  return p;
}

Tensor random_tensor(std::mt19937& rng, TensorShape s) {
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  Tensor t(s);
  for (float& v : t.data()) v = d(rng);
  return t;
}

std::vector<float> random_values(std::mt19937& rng, std::size_t n) {
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (float& x : v) x = d(rng);
  return v;
}

void criterion_cost_oracle() {
  const auto t0 = Clock::now();
  std::mt19937 rng(4);
  std::uniform_int_distribution<int> size(1, 16);
  int mismatches = 0;
  for (int i = 0; i < kCostOracleCases; ++i) {
    const bool depthwise = i % 2 == 1;
    const int in_c = size(rng);
    ConvParams p = random_conv(rng, depthwise, in_c);
    Tensor x = random_tensor(rng, {size(rng), size(rng), in_c});
    std::vector<float> k = random_values(rng, p.kernel_elements());
    std::uint64_t mults = 0;
    Tensor y = depthwise ? reference::depthwise_conv2d(x, k, p, &mults)
                         : reference::conv2d(x, k, std::nullopt, p, &mults);
    NodeSpec spec = depthwise ? NodeSpec::depthwise("n", p) : NodeSpec::conv("n", p);
    std::vector<TensorShape> ins{x.shape()};
    if (count_node(spec, ins, y.shape()).madds != mults) ++mismatches;
  }
  const double elapsed = seconds_since(t0);
  report(4, mismatches == 0 && elapsed < kCostOracleLimitS, "cost-oracle exactness",
         std::to_string(kCostOracleCases - mismatches) + "/" + std::to_string(kCostOracleCases) +
             " exact, " + fmt("%.2f s", elapsed) + " (limit " + fmt("%.0f s", kCostOracleLimitS) + ")");
}

double rel_error(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a.data()[i], y = b.data()[i];
    worst = std::max(worst, std::abs(x - y) / std::max(1.0, std::abs(y)));
  }
  return worst;
}

void criterion_kernels() {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> size(1, 16), chans(1, 8);
  double worst_conv = 0, worst_dw = 0, worst_pool = 0, worst_resize = 0, worst_group = 0;
  for (int i = 0; i < kKernelCases; ++i) {
    {
      const int in_c = chans(rng);
      ConvParams p = random_conv(rng, false, in_c);
      Tensor x = random_tensor(rng, {size(rng), size(rng), in_c});
      auto k = random_values(rng, p.kernel_elements());
      auto bias = random_values(rng, static_cast<std::size_t>(p.out_c));
      Tensor fast = conv2d(x, k, std::span<const float>(bias), p);
      worst_conv = std::max(worst_conv, rel_error(fast, reference::conv2d(x, k, std::span<const float>(bias), p)));
      ConvParams dense = p;
      dense.groups = 1;
      worst_group = std::max(worst_group,
                             rel_error(conv2d(x, k, std::nullopt, p),
                                       reference::conv2d(x, reference::block_masked_kernel(k, p),
                                                         std::nullopt, dense)));
    }
    {
      const int c = chans(rng);
      ConvParams p = random_conv(rng, true, c);
      Tensor x = random_tensor(rng, {size(rng), size(rng), c});
      auto k = random_values(rng, p.kernel_elements());
      worst_dw = std::max(worst_dw, rel_error(depthwise_conv2d(x, k, p), reference::depthwise_conv2d(x, k, p)));
    }
    {
      Tensor x = random_tensor(rng, {size(rng), size(rng), chans(rng)});
      const int gh = std::uniform_int_distribution<int>(1, x.h())(rng);
      const int gw = std::uniform_int_distribution<int>(1, x.w())(rng);
      worst_pool = std::max(worst_pool, rel_error(avg_pool_grid(x, gh, gw), reference::avg_pool_grid(x, gh, gw)));
    }
    {
      Tensor x = random_tensor(rng, {size(rng), size(rng), chans(rng)});
      const int oh = std::uniform_int_distribution<int>(1, 32)(rng);
      const int ow = std::uniform_int_distribution<int>(1, 32)(rng);
      const auto mode = i % 2 ? ResizeMode::HalfPixel : ResizeMode::CornerAligned;
      worst_resize = std::max(worst_resize, rel_error(bilinear_resize(x, oh, ow, mode),
                                                      reference::bilinear_resize(x, oh, ow, mode)));
    }
  }
  const double worst = std::max({worst_conv, worst_dw, worst_pool, worst_resize, worst_group});
  report(5, worst <= kKernelRelTol, "kernel-oracle equivalence",
         std::to_string(kKernelCases) + " cases each; max rel err conv " + fmt("%.2e", worst_conv) +
             ", depthwise " + fmt("%.2e", worst_dw) + ", pool " + fmt("%.2e", worst_pool) +
             ", resize " + fmt("%.2e", worst_resize) + ", group-vs-masked " + fmt("%.2e", worst_group) +
             " (tol " + fmt("%.0e", kKernelRelTol) + ")");
}

// --- criterion 6 ------------------------------------------------------------

void criterion_shapes() {
  // "Input" column of architecture rows 2-18 at 224x224x3.
  const TensorShape expected[] = {
      {112, 112, 32}, {56, 56, 32},  {56, 56, 32},  {28, 28, 64},  {28, 28, 64},  {28, 28, 64},
      {28, 28, 64},   {14, 14, 128}, {14, 14, 128}, {14, 14, 128}, {14, 14, 128}, {14, 14, 160},
      {14, 14, 160},  {14, 14, 192}, {14, 14, 96},  {14, 14, 96},  {14, 14, 96}};
  Graph g;
  auto in = g.add_node(NodeSpec::input("input", 3), {});
  build_backbone(g, {in, 3}, 480);
  const auto shapes = infer_shapes(g, {224, 224, 3});
  int matched = 0;
  std::string bad;
  for (int row = 2; row <= 18; ++row) {
    const std::string first = row == 18 ? "backbone/endpoint"
                                        : std::string("backbone/bneck") + (row < 10 ? "0" : "") +
                                              std::to_string(row) + "/expand";
    const auto ref = g.find(first);
    const TensorShape got = ref ? shapes[g.node(*ref).inputs.at(0).id] : TensorShape{0, 0, 0};
    if (got == expected[row - 2]) {
      ++matched;
    } else {
      bad += " row" + std::to_string(row) + "=" + got.str();
    }
  }
  report(6, matched == 17, "backbone shape golden test",
         std::to_string(matched) + "/17 input shapes match" + (bad.empty() ? "" : ";" + bad));
}

// --- criterion 7 ------------------------------------------------------------

void criterion_end_to_end() {
  const fs::path cfg = fs::path(MOSAIC_SOURCE_DIR) / "configs/ade20k.cfg";
  const fs::path tmp = fs::temp_directory_path();
  const fs::path a = tmp / "mosaic_acceptance_a.pgm", b = tmp / "mosaic_acceptance_b.pgm";
  const int k = load_model_config(cfg).num_classes;
  std::ostringstream out, err;
  double slowest = 0;
  bool ran = true;
  for (const auto& path : {a, b}) {
    cli::RunOptions opts;
    opts.config = cfg;
    opts.seed = 7;
    opts.output = path;
    const auto t0 = Clock::now();
    ran = ran && cli::cmd_run(opts, out, err) == cli::kOk;
    slowest = std::max(slowest, seconds_since(t0));
  }
  bool in_range = false, identical = false, full_size = false;
  if (ran) {
    const LabelMap m = read_labelmap_pgm(a);
    full_size = m.h == 512 && m.w == 512;
    in_range = std::all_of(m.labels.begin(), m.labels.end(), [&](int v) { return v >= 0 && v < k; });
    identical = read_file_bytes(a) == read_file_bytes(b);
  }
  fs::remove(a);
  fs::remove(b);
  report(7, ran && full_size && in_range && identical && slowest < kRunLimitS,
         "end-to-end forward pass",
         std::string(ran ? "completed" : "failed: " + err.str()) + ", 512x512 " +
             (full_size ? "yes" : "no") + ", labels in [0," + std::to_string(k) + ") " +
             (in_range ? "yes" : "no") + ", byte-identical " + (identical ? "yes" : "no") +
             ", slowest run " + fmt("%.2f s", slowest) + " (limit " + fmt("%.0f s", kRunLimitS) + ")");
}

// --- criterion 8 ------------------------------------------------------------

void criterion_miou() {
  std::mt19937 rng(8);
  std::uniform_int_distribution<int> size(1, 32), classes(1, 8);
  double worst = 0;
  for (int i = 0; i < kMiouCases; ++i) {
    const int k = classes(rng), h = size(rng), w = size(rng);
    std::uniform_int_distribution<int> label(0, k - 1);
    LabelMap p(h, w), g(h, w);
    for (auto& v : p.labels) v = label(rng);
    for (auto& v : g.labels) v = label(rng);
    worst = std::max(worst, std::abs(compute_miou(p, g, k) - reference::confusion_miou(p, g, k)));
  }
  report(8, worst <= kMiouAbsTol, "mIOU oracle",
         std::to_string(kMiouCases) + " pairs, max abs diff " + fmt("%.2e", worst) + " (tol " +
             fmt("%.0e", kMiouAbsTol) + ")");
}

}  // namespace

int main() {
  try {
    criterion_reconcile(1, "MAdds reconciliation, Cityscapes headline", kHeadlineRefB, headline);
    criterion_reconcile(2, "MAdds reconciliation, ADE20K", kAdeRefB, ade);
    criterion_orderings();
    criterion_cost_oracle();
    criterion_kernels();
    criterion_shapes();
    criterion_end_to_end();
    criterion_miou();
  } catch (const std::exception& e) {
    std::cout << "FAIL acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << "INFO 9 not reproducible at desk scale: mIOU accuracy and on-device latency "
               "values need trained weights and physical devices; criteria 1-8 stand in for them"
            << std::endl;
  std::cout << (failures ? std::to_string(failures) + " criterion(s) failed" : "all criteria passed")
            << std::endl;
  return failures ? 1 : 0;
}
