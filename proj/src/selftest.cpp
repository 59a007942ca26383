#include "mosaic/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mosaic/arch.hpp"
#include "mosaic/cost.hpp"
#include "mosaic/error.hpp"
#include "mosaic/reference.hpp"
#include "mosaic/rng.hpp"

namespace mosaic {
namespace {

Tensor random_tensor(CounterRng& rng, TensorShape s) {
  Tensor t(s);
  for (float& v : t.data()) v = static_cast<float>(rng.next_unit() * 2.0 - 1.0);
  return t;
}

std::vector<float> random_values(CounterRng& rng, std::size_t n) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.next_unit() * 2.0 - 1.0);
  return v;
}

int pick(CounterRng& rng, std::initializer_list<int> options) {
  const auto i = rng.next_u64() % options.size();
  return *(options.begin() + i);
}

int range(CounterRng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
}

// Largest relative error, scaled by max(1, |expected|).
double max_rel_error(const Tensor& got, const Tensor& want) {
  if (got.shape() != want.shape()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double e = want.data()[i];
    worst = std::max(worst, std::abs(got.data()[i] - e) / std::max(1.0, std::abs(e)));
  }
  return worst;
}

ConvParams random_conv(CounterRng& rng, int max_c) {
  ConvParams p;
  p.kernel_h = p.kernel_w = pick(rng, {1, 3, 5});
  p.stride = pick(rng, {1, 2});
  p.dilation = pick(rng, {1, 2});
  const int groups = pick(rng, {1, 2});
  p.groups = groups;
  p.in_c = groups * range(rng, 1, max_c / groups);
  p.out_c = groups * range(rng, 1, max_c / groups);
  return p;
}

CheckResult tolerance_result(const std::string& name, double worst, double tol, int cases) {
  std::ostringstream os;
  os << cases << " cases, max relative error " << worst;
  return {name, worst <= tol, os.str()};
}

std::uint64_t total_madds(const ModelConfig& cfg, CountingPolicy policy) {
  const Model model = build_model(cfg);
  return count_model(model, cfg.input_h, cfg.input_w, policy).total_madds;
}

}  // namespace

CheckResult check_same_shape_law(const ConvShapeFn& shape_fn) {
  CounterRng rng(0x5a3e);
  for (int in = 1; in <= 24; ++in) {
    for (int stride : {1, 2}) {
      for (int dilation : {1, 2}) {
        for (int kernel : {1, 3, 5}) {
          const ConvParams p{kernel, kernel, stride, dilation, 1, 2, 3};
          const TensorShape src{in, in + 1, 2};
          const TensorShape want{(in + stride - 1) / stride, (in + stride) / stride, 3};
          TensorShape got;
          try {
            got = shape_fn(src, p);
          } catch (const Error& e) {
            return {"shape/same-law", false, e.what()};
          }
          if (got != want) {
            return {"shape/same-law", false,
                    "input " + src.str() + " stride " + std::to_string(stride) + " gave " +
                        got.str() + ", expected " + want.str()};
          }
          if (in <= 8) {
            const Tensor x = random_tensor(rng, src);
            const auto k = random_values(rng, p.kernel_elements());
            const Tensor y = conv2d(x, k, std::nullopt, p);
            if (y.shape() != want) {
              return {"shape/same-law", false, "conv2d produced " + y.shape().str()};
            }
          }
        }
      }
    }
  }
  return {"shape/same-law", true, "sizes 1..24, strides {1,2}, dilations {1,2}"};
}

CheckResult check_conv_oracle(int cases) {
  CounterRng rng(0xc0);
  double worst = 0.0;
  for (int n = 0; n < cases; ++n) {
    const ConvParams p = random_conv(rng, 8);
    const Tensor x = random_tensor(rng, {range(rng, 1, 9), range(rng, 1, 9), p.in_c});
    const auto k = random_values(rng, p.kernel_elements());
    const auto b = random_values(rng, p.out_c);
    worst = std::max(worst, max_rel_error(conv2d(x, k, std::span<const float>(b), p),
                                          reference::conv2d(x, k, std::span<const float>(b), p)));
  }
  return tolerance_result("kernel/conv2d", worst, 1e-5, cases);
}

CheckResult check_group_conv_equivalence(int cases) {
  CounterRng rng(0x62);
  double worst = 0.0;
  for (int n = 0; n < cases; ++n) {
    ConvParams p = random_conv(rng, 8);
    p.groups = pick(rng, {2, 4});
    p.in_c = p.groups * range(rng, 1, 3);
    p.out_c = p.groups * range(rng, 1, 3);
    const Tensor x = random_tensor(rng, {range(rng, 2, 7), range(rng, 2, 7), p.in_c});
    const auto k = random_values(rng, p.kernel_elements());
    ConvParams dense = p;
    dense.groups = 1;
    const auto masked = reference::block_masked_kernel(k, p);
    worst = std::max(worst, max_rel_error(conv2d(x, k, std::nullopt, p),
                                          conv2d(x, masked, std::nullopt, dense)));
  }
  return tolerance_result("kernel/group-conv-equivalence", worst, 1e-5, cases);
}

CheckResult check_depthwise_oracle(int cases) {
  CounterRng rng(0xd0);
  double worst = 0.0;
  for (int n = 0; n < cases; ++n) {
    const int c = range(rng, 1, 8);
    const int k = pick(rng, {1, 3, 5});
    const ConvParams p{k, k, pick(rng, {1, 2}), pick(rng, {1, 2}), c, c, c};
    const Tensor x = random_tensor(rng, {range(rng, 1, 10), range(rng, 1, 10), c});
    const auto kern = random_values(rng, static_cast<std::size_t>(k) * k * c);
    worst = std::max(worst, max_rel_error(depthwise_conv2d(x, kern, p),
                                          reference::depthwise_conv2d(x, kern, p)));
  }
  return tolerance_result("kernel/depthwise", worst, 1e-5, cases);
}

CheckResult check_pool_oracle(int cases) {
  CounterRng rng(0x90);
  double worst = 0.0;
  for (int n = 0; n < cases; ++n) {
    const Tensor x = random_tensor(rng, {range(rng, 1, 20), range(rng, 1, 20), range(rng, 1, 4)});
    const int gh = range(rng, 1, x.h());
    const int gw = range(rng, 1, x.w());
    worst = std::max(worst, max_rel_error(avg_pool_grid(x, gh, gw),
                                          reference::avg_pool_grid(x, gh, gw)));
  }
  return tolerance_result("kernel/avg-pool-grid", worst, 1e-5, cases);
}

CheckResult check_bilinear_oracle(int cases) {
  CounterRng rng(0xb1);
  double worst = 0.0;
  for (int n = 0; n < cases; ++n) {
    const Tensor x = random_tensor(rng, {range(rng, 1, 8), range(rng, 1, 8), range(rng, 1, 3)});
    const int oh = range(rng, 1, 20);
    const int ow = range(rng, 1, 20);
    const ResizeMode mode = n % 2 ? ResizeMode::HalfPixel : ResizeMode::CornerAligned;
    worst = std::max(worst, max_rel_error(bilinear_resize(x, oh, ow, mode),
                                          reference::bilinear_resize(x, oh, ow, mode)));
  }
  return tolerance_result("kernel/bilinear", worst, 1e-5, cases);
}

CheckResult check_cost_oracle(int cases) {
  CounterRng rng(0xc05);
  for (int n = 0; n < cases; ++n) {
    const bool depthwise = n % 3 == 2;
    ConvParams p = random_conv(rng, 8);
    if (depthwise) p.groups = p.out_c = p.in_c;
    const Tensor x = random_tensor(rng, {range(rng, 1, 12), range(rng, 1, 12), p.in_c});
    std::uint64_t mults = 0;
    TensorShape out;
    const auto k = random_values(rng, p.kernel_elements());
    if (depthwise) {
      out = reference::depthwise_conv2d(x, k, p, &mults).shape();
    } else {
      out = reference::conv2d(x, k, std::nullopt, p, &mults).shape();
    }
    const NodeSpec spec = depthwise ? NodeSpec::depthwise("n", p) : NodeSpec::conv("n", p);
    const TensorShape in = x.shape();
    const NodeCost c = count_node(spec, std::span<const TensorShape>(&in, 1), out);
    if (c.madds != mults) {
      return {"cost/oracle-equality", false,
              "count_node " + std::to_string(c.madds) + " vs " + std::to_string(mults) +
                  " multiplications"};
    }
  }
  return {"cost/oracle-equality", true, std::to_string(cases) + " random conv specs"};
}

CheckResult check_pyramid_ordering() {
  // Rows in increasing reference MAdds; the two 20.81 rows tie.
  const std::vector<std::pair<std::vector<int>, bool>> rows{
      {{1, 4}, true},     {{4, 8}, true},     {{4, 16}, true},       {{8, 16}, true},
      {{4, 8, 16}, true}, {{4, 8, 16}, false}, {{1, 4, 8, 16}, true}};
  std::vector<std::uint64_t> totals;
  for (const auto& [bins, gc] : rows) {
    ModelConfig cfg;
    cfg.encoder.pyramid_bins = bins;
    cfg.encoder.use_group_conv = gc;
    totals.push_back(total_madds(cfg, CountingPolicy::Standard));
  }
  for (std::size_t i = 0; i + 1 < totals.size(); ++i) {
    if (i == 1) continue;  // tie between [4,8] and [4,16]
    if (!(totals[i] < totals[i + 1])) {
      return {"order/pyramid", false, "row " + std::to_string(i + 1) + " not below row " +
                                          std::to_string(i + 2)};
    }
  }
  if (!(totals[0] < totals[1] && totals[0] < totals[2] && totals[2] < totals[3] &&
        totals[1] < totals[3])) {
    return {"order/pyramid", false, "two-level rows out of order"};
  }
  return {"order/pyramid", true, "7 pyramid variants in expected order"};
}

CheckResult check_filter_monotonicity() {
  auto madds = [](int enc, int dec) {
    ModelConfig cfg;
    cfg.encoder.enc_filters = enc;
    cfg.decoder.dec_filters = dec;
    return total_madds(cfg, CountingPolicy::Standard);
  };
  const std::uint64_t d16 = madds(32, 16), d32 = madds(32, 32), d64 = madds(32, 64);
  const std::uint64_t e16 = madds(16, 64), e64 = madds(64, 64), e128 = madds(128, 64);
  const bool ok = d16 < d32 && d32 < d64 && e16 < d64 && d64 < e64 && e64 < e128;
  return {"order/filter-monotonic", ok, "enlarging encoder or decoder filters raises MAdds"};
}

CheckResult check_skip_monotonicity() {
  auto total = [](std::vector<SkipSpec> skips) {
    ModelConfig cfg;
    cfg.decoder.skips = std::move(skips);
    return total_madds(cfg, CountingPolicy::Standard);
  };
  const SkipSpec c8{8, MergeStyle::Concat}, s4{4, MergeStyle::Sum}, s2{2, MergeStyle::Sum};
  const std::uint64_t none = total({}), one = total({s4}), two = total({c8, s4}),
                      three = total({c8, s4, s2});
  const bool ok = none < one && one < two && two < three && none < total({c8});
  return {"order/skip-monotonic", ok, "each added skip connection raises MAdds"};
}

CheckResult check_policy_preserves_skip_ordering() {
  const std::vector<std::string> variants{"0",       "4-S",     "4-C",        "8-C",
                                          "8-C,4-S", "8-S,4-S", "8-C,4-C",    "8-C,4-S,2-S"};
  const ModelConfig base;
  auto rank = [&](CountingPolicy policy) {
    const auto rows = ablation_report(base, AblationAxis::Skips, variants, policy);
    std::vector<std::size_t> idx(rows.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return rows[a].madds < rows[b].madds; });
    return idx;
  };
  const bool ok = rank(CountingPolicy::Standard) == rank(CountingPolicy::IncludeEverything);
  return {"order/policy-invariant", ok,
          "decoder skip variants rank identically under both counting policies"};
}

std::vector<CheckResult> run_selftest() {
  std::vector<CheckResult> results;
  auto run = [&](const std::string& name, auto&& fn) {
    try {
      results.push_back(fn());
    } catch (const std::exception& e) {
      results.push_back({name, false, std::string("threw: ") + e.what()});
    }
  };
  run("kernel/conv2d", [] { return check_conv_oracle(40); });
  run("kernel/group-conv-equivalence", [] { return check_group_conv_equivalence(20); });
  run("kernel/depthwise", [] { return check_depthwise_oracle(40); });
  run("kernel/avg-pool-grid", [] { return check_pool_oracle(40); });
  run("kernel/bilinear", [] { return check_bilinear_oracle(40); });
  run("shape/same-law", [] { return check_same_shape_law(); });
  run("cost/oracle-equality", [] { return check_cost_oracle(60); });
  run("order/pyramid", [] { return check_pyramid_ordering(); });
  run("order/filter-monotonic", [] { return check_filter_monotonicity(); });
  run("order/skip-monotonic", [] { return check_skip_monotonicity(); });
  run("order/policy-invariant", [] { return check_policy_preserves_skip_ordering(); });
  return results;
}

}  // namespace mosaic
