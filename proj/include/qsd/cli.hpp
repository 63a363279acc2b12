#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsd/chain.hpp"

namespace qsd::cli {

/// Bad command line; maps to exit code 2.
class UsageError : public std::invalid_argument {
 public:
  explicit UsageError(const std::string& what, bool help = false)
      : std::invalid_argument(what), help_(help) {}
  /// --help was requested; the message is the help text.
  bool help() const { return help_; }

 private:
  bool help_;
};

enum class Command { qsd, certify, criterion, bd, decay, simulate, fv };

std::string to_string(Command c);

struct GridSpec {
  double ratio;
  std::size_t count;
};

struct RunConfig {
  Command command = Command::qsd;
  std::optional<std::filesystem::path> chain_file;
  std::optional<LogisticParams> logistic;
  /// Explicit window size; empty means the file's size, or auto for logistic.
  std::optional<std::size_t> states;
  std::optional<Boundary> boundary;
  double tol = 1e-10;
  std::optional<double> tmax;
  std::optional<GridSpec> grid;
  std::uint64_t seed = 1;
  std::filesystem::path out = ".";
  std::optional<StateSet> K;
  State x0 = 1;
  /// Second starting state for `decay`; defaults to min(40, top).
  std::optional<State> nu;
  std::optional<double> lambda0;
  unsigned threads = 1;
  std::size_t paths = 100000;
  std::size_t particles = 10000;
};

std::string usage();

/// args excludes the program name. Throws UsageError.
RunConfig parse_args(const std::vector<std::string>& args);

/// Runs the command, writing its files under config.out and a short summary to
/// `out`. Returns 0 on success and 1 on a computation failure (reported on `err`).
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// parse_args + run, with usage errors reported on `err` as exit code 2.
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qsd::cli
