#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qsd {

/// A state of the chain. State 0 is the absorbing point.
using State = std::size_t;

/// How a finite window {0..N} treats mass that would leave through the top.
enum class Boundary {
  reflect_at_top,  ///< births out of N are dropped; rows stay conservative
  kill_at_top,     ///< births out of N are kept as a killing rate
};

std::string to_string(Boundary b);

/// A finite, sorted, duplicate-free set of non-absorbed states.
class StateSet {
 public:
  StateSet() = default;
  StateSet(std::initializer_list<State> states);
  explicit StateSet(std::vector<State> states);

  /// {1, ..., k}
  static StateSet prefix(State k);

  bool contains(State x) const;
  bool empty() const { return states_.empty(); }
  std::size_t size() const { return states_.size(); }
  State max() const { return states_.back(); }
  const std::vector<State>& states() const { return states_; }
  auto begin() const { return states_.begin(); }
  auto end() const { return states_.end(); }

  /// "1,2,3"
  std::string to_string() const;

  friend bool operator==(const StateSet&, const StateSet&) = default;

 private:
  std::vector<State> states_;
};

struct RateEntry {
  State from;
  State to;
  double rate;
};

struct LogisticParams {
  double b;
  double d;
  double c;
};

/// Nearest-neighbour rates on all of N*: births b_x, deaths delta_x.
struct BirthDeathSpec {
  std::function<double(State)> birth;
  std::function<double(State)> death;
  std::optional<LogisticParams> logistic;

  /// b_x = b x, delta_x = d x + c x (x - 1). Throws ValidationError unless b, d, c > 0.
  static BirthDeathSpec make_logistic(double b, double d, double c);
  static BirthDeathSpec make(std::function<double(State)> birth,
                             std::function<double(State)> death);
};

/// Rate matrix Q of a chain absorbed at 0, materialized on the window {0..top()}.
///
/// Off-diagonal rates are held row-major in compressed form; the diagonal is
/// the negative row sum, including the killing rate at the top in kill mode.
/// Values are immutable once built and may be shared across threads.
class AbsorbedChain {
 public:
  struct Transition {
    State to;
    double rate;
  };

  std::size_t n_states() const { return diagonal_.size(); }
  State top() const { return n_states() - 1; }
  Boundary boundary() const { return boundary_; }

  /// Off-diagonal transitions out of x, sorted by destination.
  std::span<const Transition> transitions(State x) const;
  /// Q(from, to), diagonal included.
  double rate(State from, State to) const;
  double diagonal(State x) const { return diagonal_[x]; }
  double exit_rate(State x) const { return -diagonal_[x]; }
  double absorption_rate(State x) const { return rate(x, 0); }
  /// Rate of escape past the top (non-zero only in kill mode).
  double kill_rate(State x) const { return kill_[x]; }
  double max_exit_rate() const;
  /// True when every transition moves to a neighbouring state.
  bool nearest_neighbour() const;

 private:
  friend AbsorbedChain build_from_entries(std::span<const RateEntry>, std::size_t,
                                          Boundary);
  friend AbsorbedChain truncate(const BirthDeathSpec&, std::size_t, Boundary);

  AbsorbedChain(std::size_t n_states, Boundary boundary,
                std::vector<RateEntry> entries, std::vector<double> kill);

  Boundary boundary_ = Boundary::reflect_at_top;
  std::vector<std::size_t> row_start_;
  std::vector<Transition> transitions_;
  std::vector<double> diagonal_;
  std::vector<double> kill_;
};

/// Window {0..n_states-1}. Duplicate (from, to) entries are summed.
AbsorbedChain build_from_entries(std::span<const RateEntry> entries, std::size_t n_states,
                                 Boundary boundary = Boundary::reflect_at_top);

AbsorbedChain truncate(const BirthDeathSpec& spec, std::size_t n_states,
                       Boundary boundary = Boundary::reflect_at_top);

AbsorbedChain build_logistic(double b, double d, double c, std::size_t n_states,
                             Boundary boundary = Boundary::reflect_at_top);

/// Rebuilds the same model on a window of any size.
using ChainBuilder = std::function<AbsorbedChain(std::size_t n_states)>;

ChainBuilder builder_for(BirthDeathSpec spec, Boundary boundary = Boundary::reflect_at_top);

}  // namespace qsd
