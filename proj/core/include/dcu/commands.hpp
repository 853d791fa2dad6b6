#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

namespace dcu {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,     // invalid config; the message names the field
  kExitNumerical = 2,  // NaN/degenerate abort, failed gradient check
  kExitIo = 3,
};

struct CommandOptions {
  std::filesystem::path config;
  std::filesystem::path out_dir = ".";
  std::optional<int> threads;  // overrides run.threads
  std::optional<std::filesystem::path> checkpoint;
  std::optional<double> eps;  // graph-analyze / bounds: overrides eval.eps
  std::optional<int> m;       // graph-analyze: overrides eval.m
};

/// Each command reports progress on `out`, errors on `err`, and returns an
/// exit code instead of throwing.
int cmd_train(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_grad_check(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_graph_analyze(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_bounds(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_probe(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_sweep(const CommandOptions& options, std::ostream& out, std::ostream& err);

}  // namespace dcu
