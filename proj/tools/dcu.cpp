// dcu: experiment runner for decoupled uniformity training and diagnostics.

#include "dcu/commands.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>
#include <string>

namespace {

struct Args {
  std::string config;
  std::string out = ".";
  std::string checkpoint;
  std::optional<double> eps;
  std::optional<int> m;
};

dcu::CommandOptions to_options(const Args& a, const std::optional<int>& threads) {
  dcu::CommandOptions o;
  o.config = a.config;
  o.out_dir = a.out;
  o.threads = threads;
  if (!a.checkpoint.empty()) o.checkpoint = a.checkpoint;
  o.eps = a.eps;
  o.m = a.m;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decoupled uniformity: train, check gradients, analyze graphs, verify bounds, probe, sweep"};
  app.require_subcommand(1);
  std::optional<int> threads;
  app.add_option("--threads", threads, "Worker threads (overrides run.threads)")
      ->check(CLI::PositiveNumber);

  Args args;
  auto add_common = [&](CLI::App* sub, bool with_out) {
    sub->add_option("-c,--config", args.config, "Experiment config (.ini or .json)")
        ->required()
        ->check(CLI::ExistingFile);
    if (with_out) sub->add_option("-o,--out", args.out, "Output directory")->capture_default_str();
  };

  auto* train = app.add_subcommand("train", "Train an encoder; writes metrics.csv and checkpoint.txt");
  add_common(train, true);

  auto* grad = app.add_subcommand("grad-check", "Finite-difference check of the full-pipeline gradient");
  add_common(grad, false);

  auto* graph = app.add_subcommand("graph-analyze", "Augmentation/kernel graphs, connectivity, eps*, kernel quality");
  add_common(graph, true);
  graph->add_option("--eps", args.eps, "Kernel graph threshold (overrides eval.eps)");
  graph->add_option("--m", args.m, "Rank used for eps* (overrides eval.m)");

  auto* bounds = app.add_subcommand("bounds", "Evaluate the downstream-loss bounds for a checkpoint");
  add_common(bounds, true);
  bounds->add_option("--checkpoint", args.checkpoint, "Encoder checkpoint")->required();
  bounds->add_option("--eps", args.eps, "Kernel graph threshold (overrides eval.eps)");

  auto* probe = app.add_subcommand("probe", "Linear probe on the frozen checkpoint");
  add_common(probe, true);
  probe->add_option("--checkpoint", args.checkpoint, "Encoder checkpoint")->required();

  auto* sweep = app.add_subcommand("sweep", "Prior-noise sweep: kernel quality, eps* and probe accuracy");
  add_common(sweep, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dcu::kExitConfig;
  }

  const dcu::CommandOptions o = to_options(args, threads);
  if (*train) return dcu::cmd_train(o, std::cout, std::cerr);
  if (*grad) return dcu::cmd_grad_check(o, std::cout, std::cerr);
  if (*graph) return dcu::cmd_graph_analyze(o, std::cout, std::cerr);
  if (*bounds) return dcu::cmd_bounds(o, std::cout, std::cerr);
  if (*probe) return dcu::cmd_probe(o, std::cout, std::cerr);
  return dcu::cmd_sweep(o, std::cout, std::cerr);
}
