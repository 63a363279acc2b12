#include "qsd/chain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qsd/error.hpp"

namespace qsd {

std::string to_string(Boundary b) {
  return b == Boundary::reflect_at_top ? "reflect" : "kill";
}

StateSet::StateSet(std::initializer_list<State> states)
    : StateSet(std::vector<State>(states)) {}

StateSet::StateSet(std::vector<State> states) : states_(std::move(states)) {
  std::sort(states_.begin(), states_.end());
  states_.erase(std::unique(states_.begin(), states_.end()), states_.end());
  if (!states_.empty() && states_.front() == 0)
    throw ValidationError("state set must not contain the absorbing state 0");
}

StateSet StateSet::prefix(State k) {
  std::vector<State> s(k);
  for (State i = 0; i < k; ++i) s[i] = i + 1;
  return StateSet(std::move(s));
}

bool StateSet::contains(State x) const {
  return std::binary_search(states_.begin(), states_.end(), x);
}

std::string StateSet::to_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (i) os << ',';
    os << states_[i];
  }
  return os.str();
}

BirthDeathSpec BirthDeathSpec::make_logistic(double b, double d, double c) {
  if (!(b > 0) || !(d > 0) || !(c > 0) || !std::isfinite(b) || !std::isfinite(d) ||
      !std::isfinite(c))
    throw ValidationError("logistic parameters b, d, c must be finite and > 0");
  BirthDeathSpec spec;
  spec.birth = [b](State x) { return b * static_cast<double>(x); };
  spec.death = [d, c](State x) {
    const auto xf = static_cast<double>(x);
    return d * xf + c * xf * (xf - 1.0);
  };
  spec.logistic = LogisticParams{b, d, c};
  return spec;
}

BirthDeathSpec BirthDeathSpec::make(std::function<double(State)> birth,
                                    std::function<double(State)> death) {
  if (!birth || !death) throw ValidationError("birth-death spec needs both rate functions");
  return BirthDeathSpec{std::move(birth), std::move(death), std::nullopt};
}

namespace {

std::string describe(const RateEntry& e) {
  std::ostringstream os;
  os << "(" << e.from << ", " << e.to << ", " << e.rate << ")";
  return os.str();
}

}  // namespace

AbsorbedChain::AbsorbedChain(std::size_t n_states, Boundary boundary,
                             std::vector<RateEntry> entries, std::vector<double> kill)
    : boundary_(boundary), kill_(std::move(kill)) {
  if (n_states < 2) throw ValidationError("a chain needs at least 2 states (0 and 1)");
  for (const auto& e : entries) {
    if (!std::isfinite(e.rate)) throw ValidationError("non-finite rate " + describe(e));
    if (e.rate < 0) throw ValidationError("negative rate " + describe(e));
    if (e.from >= n_states || e.to >= n_states)
      throw ValidationError("state outside the window {0.." + std::to_string(n_states - 1) +
                            "} in entry " + describe(e));
    if (e.from == e.to) throw ValidationError("diagonal entry given explicitly " + describe(e));
    if (e.from == 0 && e.rate > 0)
      throw ValidationError("state 0 must be absorbing, got entry " + describe(e));
  }
  std::erase_if(entries, [](const RateEntry& e) { return e.rate == 0.0; });
  std::sort(entries.begin(), entries.end(), [](const RateEntry& a, const RateEntry& b) {
    return a.from != b.from ? a.from < b.from : a.to < b.to;
  });

  row_start_.assign(n_states + 1, 0);
  diagonal_.assign(n_states, 0.0);
  for (std::size_t i = 0; i < entries.size();) {
    const auto& e = entries[i];
    double r = 0;
    std::size_t j = i;
    for (; j < entries.size() && entries[j].from == e.from && entries[j].to == e.to; ++j)
      r += entries[j].rate;
    transitions_.push_back({e.to, r});
    ++row_start_[e.from + 1];
    i = j;
  }
  for (std::size_t x = 0; x < n_states; ++x) row_start_[x + 1] += row_start_[x];

  for (State x = 1; x < n_states; ++x) {
    double out = kill_[x];
    for (const auto& t : transitions(x)) out += t.rate;
    diagonal_[x] = -out;
  }
}

std::span<const AbsorbedChain::Transition> AbsorbedChain::transitions(State x) const {
  return {transitions_.data() + row_start_[x], row_start_[x + 1] - row_start_[x]};
}

double AbsorbedChain::rate(State from, State to) const {
  if (from >= n_states() || to >= n_states()) throw DomainError("state outside the window");
  if (from == to) return diagonal_[from];
  const auto row = transitions(from);
  const auto it = std::lower_bound(row.begin(), row.end(), to,
                                   [](const Transition& t, State s) { return t.to < s; });
  return it != row.end() && it->to == to ? it->rate : 0.0;
}

double AbsorbedChain::max_exit_rate() const {
  double m = 0;
  for (double d : diagonal_) m = std::max(m, -d);
  return m;
}

bool AbsorbedChain::nearest_neighbour() const {
  for (State x = 1; x < n_states(); ++x)
    for (const auto& t : transitions(x))
      if (t.to + 1 != x && t.to != x + 1) return false;
  return true;
}

AbsorbedChain build_from_entries(std::span<const RateEntry> entries, std::size_t n_states,
                                 Boundary boundary) {
  return AbsorbedChain(n_states, boundary, {entries.begin(), entries.end()},
                       std::vector<double>(std::max<std::size_t>(n_states, 2), 0.0));
}

AbsorbedChain truncate(const BirthDeathSpec& spec, std::size_t n_states, Boundary boundary) {
  if (n_states < 2) throw ValidationError("n_states must be at least 2");
  const State top = n_states - 1;
  std::vector<RateEntry> entries;
  entries.reserve(2 * top);
  std::vector<double> kill(n_states, 0.0);
  for (State x = 1; x <= top; ++x) {
    const double b = spec.birth(x);
    const double delta = spec.death(x);
    if (!(delta > 0) || !std::isfinite(delta))
      throw ValidationError("death rate at state " + std::to_string(x) + " must be finite and > 0");
    if (!(b >= 0) || !std::isfinite(b))
      throw ValidationError("birth rate at state " + std::to_string(x) + " must be finite and >= 0");
    entries.push_back({x, x - 1, delta});
    if (x < top)
      entries.push_back({x, x + 1, b});
    else if (boundary == Boundary::kill_at_top)
      kill[x] = b;
  }
  return AbsorbedChain(n_states, boundary, std::move(entries), std::move(kill));
}

AbsorbedChain build_logistic(double b, double d, double c, std::size_t n_states,
                             Boundary boundary) {
  return truncate(BirthDeathSpec::make_logistic(b, d, c), n_states, boundary);
}

ChainBuilder builder_for(BirthDeathSpec spec, Boundary boundary) {
  return [spec = std::move(spec), boundary](std::size_t n) { return truncate(spec, n, boundary); };
}

}  // namespace qsd
