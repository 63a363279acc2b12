#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qsd/chain.hpp"

namespace qsd {

/// Parsed chain definition file.
///
/// Grammar, one directive per line, blank lines and lines starting with '#'
/// ignored, tokens separated by whitespace:
///
///     states N            window {0..N-1}; N >= 2, or `auto` (logistic only)
///     boundary reflect    (default) or `boundary kill`
///     rate FROM TO VALUE  off-diagonal rate; repeated pairs are summed
///     logistic B D C      logistic birth-death rates; excludes `rate`
///
/// Each directive other than `rate` may appear at most once.
struct ChainDefinition {
  std::optional<std::size_t> n_states;  ///< empty means `auto`
  Boundary boundary = Boundary::reflect_at_top;
  std::optional<LogisticParams> logistic;
  std::vector<RateEntry> entries;

  /// Materializes the chain; n_states overrides the file's window when given.
  AbsorbedChain build(std::optional<std::size_t> n_states = std::nullopt) const;
  /// Only logistic definitions can be rebuilt at other window sizes.
  std::optional<ChainBuilder> builder() const;
};

/// Throws ValidationError citing "<source>:<line>: ..." on bad input.
ChainDefinition parse_chain_definition(std::istream& in, const std::string& source = "<input>");
ChainDefinition load_chain_file(const std::filesystem::path& path);

}  // namespace qsd
