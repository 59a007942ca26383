#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mosaic/cost.hpp"

namespace mosaic::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kRuntimeError = 1;
inline constexpr int kUsageError = 2;

using OptPath = std::optional<std::filesystem::path>;

int cmd_describe(const OptPath& config, std::ostream& out, std::ostream& err);
int cmd_cost(const OptPath& config, bool csv, CountingPolicy policy, std::ostream& out,
             std::ostream& err);
int cmd_ablate(const OptPath& config, const std::string& axis,
               const std::vector<std::string>& variants, bool csv, CountingPolicy policy,
               std::ostream& out, std::ostream& err);

struct RunOptions {
  OptPath config;
  OptPath weights;
  std::optional<std::uint64_t> seed;
  OptPath input;
  std::filesystem::path output;
};
int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err);

int cmd_selftest(std::ostream& out, std::ostream& err);

// Parses argv and dispatches to one verb.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mosaic::cli
