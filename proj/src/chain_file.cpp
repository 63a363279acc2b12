#include "qsd/chain_file.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "qsd/error.hpp"

namespace qsd {

namespace {

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
  throw ValidationError(source + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> tokenize(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

template <typename T>
bool parse_number(const std::string& tok, T& out) {
  const char* first = tok.data();
  const char* last = first + tok.size();
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars for double is unavailable on older libstdc++.
    try {
      std::size_t used = 0;
      out = std::stod(tok, &used);
      return used == tok.size();
    } catch (const std::exception&) {
      return false;
    }
  } else {
    auto [p, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && p == last;
  }
}

}  // namespace

ChainDefinition parse_chain_definition(std::istream& in, const std::string& source) {
  ChainDefinition def;
  bool seen_states = false;
  bool seen_boundary = false;
  std::size_t line_no = 0;
  std::size_t first_rate_line = 0;

  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto toks = tokenize(line);
    if (toks.empty() || toks[0].front() == '#') continue;
    const auto& kw = toks[0];

    if (kw == "states") {
      if (seen_states) fail(source, line_no, "duplicate 'states' directive");
      if (toks.size() != 2) fail(source, line_no, "expected 'states N'");
      seen_states = true;
      if (toks[1] == "auto") continue;
      std::size_t n = 0;
      if (!parse_number(toks[1], n) || n < 2)
        fail(source, line_no, "state count must be an integer >= 2, got '" + toks[1] + "'");
      def.n_states = n;
    } else if (kw == "boundary") {
      if (seen_boundary) fail(source, line_no, "duplicate 'boundary' directive");
      if (toks.size() != 2) fail(source, line_no, "expected 'boundary reflect|kill'");
      seen_boundary = true;
      if (toks[1] == "reflect")
        def.boundary = Boundary::reflect_at_top;
      else if (toks[1] == "kill")
        def.boundary = Boundary::kill_at_top;
      else
        fail(source, line_no, "unknown boundary '" + toks[1] + "'");
    } else if (kw == "rate") {
      if (toks.size() != 4) fail(source, line_no, "expected 'rate FROM TO VALUE'");
      RateEntry e{};
      if (!parse_number(toks[1], e.from) || !parse_number(toks[2], e.to))
        fail(source, line_no, "states must be non-negative integers");
      if (!parse_number(toks[3], e.rate)) fail(source, line_no, "bad rate '" + toks[3] + "'");
      if (def.logistic) fail(source, line_no, "'rate' cannot be combined with 'logistic'");
      if (!std::isfinite(e.rate) || e.rate < 0)
        fail(source, line_no, "rate must be finite and >= 0");
      if (e.from == 0 && e.rate > 0) fail(source, line_no, "state 0 must be absorbing");
      if (e.from == e.to) fail(source, line_no, "diagonal rates are implied, not given");
      if (def.n_states && (e.from >= *def.n_states || e.to >= *def.n_states))
        fail(source, line_no, "state outside the window of " + std::to_string(*def.n_states) +
                                  " states");
      if (first_rate_line == 0) first_rate_line = line_no;
      def.entries.push_back(e);
    } else if (kw == "logistic") {
      if (def.logistic) fail(source, line_no, "duplicate 'logistic' directive");
      if (!def.entries.empty()) fail(source, line_no, "'logistic' cannot be combined with 'rate'");
      if (toks.size() != 4) fail(source, line_no, "expected 'logistic B D C'");
      LogisticParams p{};
      if (!parse_number(toks[1], p.b) || !parse_number(toks[2], p.d) ||
          !parse_number(toks[3], p.c))
        fail(source, line_no, "logistic parameters must be numbers");
      if (!(p.b > 0 && p.d > 0 && p.c > 0))
        fail(source, line_no, "logistic parameters must all be > 0");
      def.logistic = p;
    } else {
      fail(source, line_no, "unknown directive '" + kw + "'");
    }
  }

  if (!def.logistic && def.entries.empty())
    fail(source, line_no, "no 'rate' or 'logistic' directive found");
  if (!def.logistic && !def.n_states)
    fail(source, line_no, "rate-based chains need an explicit 'states N'");
  if (def.n_states) {
    for (const auto& e : def.entries)
      if (e.from >= *def.n_states || e.to >= *def.n_states)
        fail(source, first_rate_line,
             "rate (" + std::to_string(e.from) + ", " + std::to_string(e.to) +
                 ") lies outside the window of " + std::to_string(*def.n_states) + " states");
  }
  try {
    if (def.n_states) (void)def.build();
  } catch (const ValidationError& e) {
    fail(source, first_rate_line ? first_rate_line : line_no, e.what());
  }
  return def;
}

ChainDefinition load_chain_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open chain file '" + path.string() + "'");
  return parse_chain_definition(in, path.string());
}

AbsorbedChain ChainDefinition::build(std::optional<std::size_t> n) const {
  const auto size = n ? n : n_states;
  if (!size) throw ValidationError("chain window size is 'auto'; pass an explicit size");
  if (logistic) return build_logistic(logistic->b, logistic->d, logistic->c, *size, boundary);
  return build_from_entries(entries, *size, boundary);
}

std::optional<ChainBuilder> ChainDefinition::builder() const {
  if (!logistic) return std::nullopt;
  return builder_for(BirthDeathSpec::make_logistic(logistic->b, logistic->d, logistic->c),
                     boundary);
}

}  // namespace qsd
