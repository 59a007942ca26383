#include "commands.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iomanip>
#include <iostream>
#include <map>

#include "mosaic/arch.hpp"
#include "mosaic/config_io.hpp"
#include "mosaic/error.hpp"
#include "mosaic/graph.hpp"
#include "mosaic/image_io.hpp"
#include "mosaic/rng.hpp"
#include "mosaic/selftest.hpp"
#include "mosaic/weights.hpp"

namespace mosaic::cli {
namespace {

ModelConfig config_from(const OptPath& path) {
  return path ? load_model_config(*path) : ModelConfig{};
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace

int cmd_describe(const OptPath& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ModelConfig cfg = config_from(config);
    const Model model = build_model(cfg);
    out << "# config\n" << format_model_config(cfg);
    out << "# nodes " << model.graph.size() << " at " << cfg.input_h << "x" << cfg.input_w
        << "x3\n";
    dump_graph(model.graph, model.shapes, out);
    out << "# taps\n";
    for (const auto& [name, ref] : model.graph.taps()) {
      out << name << '\t' << model.graph.node(ref).spec.name << '\t'
          << model.shapes[ref.id].str() << '\n';
    }
    const CostReport report = count_model(model, cfg.input_h, cfg.input_w);
    std::map<std::string, int> node_counts;
    for (const auto& e : report.per_node) ++node_counts[e.stage];
    out << "# stages\n";
    for (const auto& s : report.stages) {
      out << s.stage << "\tnodes=" << node_counts[s.stage] << "\tmadds=" << s.madds << " ("
          << format_billions(s.madds) << "B)\tparams=" << s.params << '\n';
    }
    out << "total\tmadds=" << report.total_madds << " (" << format_billions(report.total_madds)
        << "B)\tparams=" << report.total_params << '\n';
    return kOk;
  });
}

int cmd_cost(const OptPath& config, bool csv, CountingPolicy policy, std::ostream& out,
             std::ostream& err) {
  return guarded(err, [&] {
    const ModelConfig cfg = config_from(config);
    const Model model = build_model(cfg);
    const CostReport report = count_model(model, cfg.input_h, cfg.input_w, policy);
    if (csv) {
      render_report_csv(report, out);
    } else {
      render_report_text(report, out);
    }
    return kOk;
  });
}

int cmd_ablate(const OptPath& config, const std::string& axis,
               const std::vector<std::string>& variants, bool csv, CountingPolicy policy,
               std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (variants.empty()) throw ConfigError("--variants needs at least one variant");
    const ModelConfig cfg = config_from(config);
    const auto rows = ablation_report(cfg, parse_axis(axis), variants, policy);
    if (csv) {
      render_ablation_csv(rows, out);
    } else {
      render_ablation_text(rows, out);
    }
    return kOk;
  });
}

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!opts.weights && !opts.seed) throw ConfigError("run needs --weights or --seed");
    if (opts.output.empty()) throw ConfigError("run needs --output");
    const ModelConfig cfg = config_from(opts.config);
    if (cfg.num_classes > 256) {
      throw ConfigError("num_classes=" + std::to_string(cfg.num_classes) +
                        " does not fit an 8-bit label map");
    }
    const Model model = build_model(cfg);

    WeightStore weights;
    if (opts.weights) {
      weights = load_weights(*opts.weights);
    } else {
      weights = init_weights(model.graph, *opts.seed);
    }
    validate_weights(model.graph, weights);

    Tensor input;
    if (opts.input) {
      input = read_image_ppm(*opts.input);
      if (input.h() != cfg.input_h || input.w() != cfg.input_w) {
        throw ConfigError("input image is " + std::to_string(input.h()) + "x" +
                          std::to_string(input.w()) + " but the config expects " +
                          std::to_string(cfg.input_h) + "x" + std::to_string(cfg.input_w));
      }
    } else {
      input = Tensor({cfg.input_h, cfg.input_w, 3});
      CounterRng rng(stream_key(opts.seed.value_or(0), "input"));
      for (float& v : input.data()) v = static_cast<float>(rng.next_unit() * 2.0 - 1.0);
    }

    std::map<std::string, double> stage_seconds;
    const auto start = std::chrono::steady_clock::now();
    const ExecutionResult result =
        execute(model.graph, weights, input,
                [&](NodeRef, const Node& node, const Tensor&, double seconds) {
                  stage_seconds[stage_of(node.spec.name)] += seconds;
                });
    const double total =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const LabelMap labels = argmax_channels(result.outputs.at("logits"));
    write_labelmap_pgm(labels, opts.output);

    out << std::fixed << std::setprecision(3);
    for (const char* stage : {"backbone", "encoder", "decoder", "head"}) {
      out << "stage " << stage << ' ' << stage_seconds[stage] << " s\n";
    }
    out << "total " << total << " s, wrote " << labels.h << "x" << labels.w << " labels to "
        << opts.output.string() << '\n';
    return kOk;
  });
}

int cmd_selftest(std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    int failed = 0;
    for (const CheckResult& r : run_selftest()) {
      out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
      if (!r.passed) ++failed;
    }
    out << (failed ? std::to_string(failed) + " check(s) failed" : "all checks passed") << '\n';
    return failed ? kRuntimeError : kOk;
  });
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Build, cost-model and run MOSAIC segmentation networks"};
  app.require_subcommand(1, 1);

  std::string config;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("config", config, "Model config file (key=value); defaults apply if omitted")
        ->check(CLI::ExistingFile);
  };
  std::string policy_name = "standard";
  auto add_policy = [&](CLI::App* sub) {
    sub->add_option("--policy", policy_name, "MAdds counting policy")
        ->check(CLI::IsMember({"standard", "everything"}));
  };

  auto* describe = app.add_subcommand("describe", "List every node with its inferred shape");
  add_config(describe);

  bool csv = false;
  auto* cost = app.add_subcommand("cost", "Multiply-add and parameter report");
  add_config(cost);
  cost->add_flag("--csv", csv, "Emit CSV instead of aligned text");
  add_policy(cost);

  std::string axis;
  std::vector<std::string> variants;
  auto* ablate = app.add_subcommand("ablate", "MAdds table over one architectural axis");
  add_config(ablate);
  ablate->add_option("--axis", axis, "encoder_filters | decoder_filters | pyramid | skips")
      ->required();
  ablate->add_option("--variants", variants, "Variants, separated by ';' or given repeatedly")
      ->delimiter(';')
      ->allow_extra_args(false);
  ablate->add_flag("--csv", csv, "Emit CSV instead of aligned text");
  add_policy(ablate);

  RunOptions run_opts;
  std::string weights_path, input_path, output_path;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "Forward pass to a PGM label map");
  add_config(run);
  run->add_option("--weights", weights_path, "MOSW weight file")->check(CLI::ExistingFile);
  auto* seed_opt = run->add_option("--seed", seed, "Seed for weight (and random input) init");
  run->add_option("--input", input_path, "P6 PPM image; random input when omitted")
      ->check(CLI::ExistingFile);
  run->add_option("--output", output_path, "Output P5 PGM label map")->required();

  auto* selftest = app.add_subcommand("selftest", "Kernel, shape, cost and ordering checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }

  const OptPath cfg_path = config.empty() ? OptPath{} : OptPath{config};
  const CountingPolicy policy =
      policy_name == "everything" ? CountingPolicy::IncludeEverything : CountingPolicy::Standard;

  if (describe->parsed()) return cmd_describe(cfg_path, out, err);
  if (cost->parsed()) return cmd_cost(cfg_path, csv, policy, out, err);
  if (ablate->parsed()) return cmd_ablate(cfg_path, axis, variants, csv, policy, out, err);
  if (run->parsed()) {
    run_opts.config = cfg_path;
    if (!weights_path.empty()) run_opts.weights = weights_path;
    if (seed_opt->count()) run_opts.seed = seed;
    if (!input_path.empty()) run_opts.input = input_path;
    run_opts.output = output_path;
    return cmd_run(run_opts, out, err);
  }
  if (selftest->parsed()) return cmd_selftest(out, err);
  return kUsageError;
}

}  // namespace mosaic::cli
