#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qsd/chain.hpp"

namespace qsd {

/// Probability measure on the non-absorbed states {1..top}.
///
/// Stored indexed by state; slot 0 exists for indexing convenience and is
/// always zero.
class Distribution {
 public:
  /// `weights` is indexed by state (weights[0] must be 0); it is normalized to
  /// mass 1. Throws ValidationError on negative or non-finite weights or zero mass.
  explicit Distribution(std::vector<double> weights);

  static Distribution dirac(State x, std::size_t n_states);
  static Distribution uniform(std::size_t n_states);

  std::size_t n_states() const { return weights_.size(); }
  State top() const { return weights_.size() - 1; }
  double operator[](State x) const { return weights_[x]; }
  std::span<const double> weights() const { return weights_; }

  /// Same measure on a larger window, zero beyond the old top.
  Distribution padded(std::size_t n_states) const;

 private:
  std::vector<double> weights_;
};

/// Sum over states of |mu(x) - nu(x)|, in [0, 2]. Windows must match.
double tv_distance(const Distribution& mu, const Distribution& nu);
double tv_distance(std::span<const double> mu, std::span<const double> nu);

}  // namespace qsd
