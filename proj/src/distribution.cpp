#include "qsd/distribution.hpp"

#include <cmath>
#include <string>

#include "qsd/error.hpp"

namespace qsd {

Distribution::Distribution(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.size() < 2) throw ValidationError("distribution needs at least one state");
  if (weights_[0] != 0.0) throw ValidationError("distribution puts weight on state 0");
  double total = 0;
  for (std::size_t x = 1; x < weights_.size(); ++x) {
    const double w = weights_[x];
    if (!std::isfinite(w) || w < 0)
      throw ValidationError("invalid weight at state " + std::to_string(x));
    total += w;
  }
  if (!(total > 0)) throw ValidationError("distribution has zero mass");
  for (auto& w : weights_) w /= total;
}

Distribution Distribution::dirac(State x, std::size_t n_states) {
  if (x == 0 || x >= n_states)
    throw DomainError("dirac state " + std::to_string(x) + " outside {1.." +
                      std::to_string(n_states - 1) + "}");
  std::vector<double> w(n_states, 0.0);
  w[x] = 1.0;
  return Distribution(std::move(w));
}

Distribution Distribution::uniform(std::size_t n_states) {
  if (n_states < 2) throw DomainError("uniform distribution needs at least one state");
  std::vector<double> w(n_states, 1.0);
  w[0] = 0.0;
  return Distribution(std::move(w));
}

Distribution Distribution::padded(std::size_t n_states) const {
  if (n_states < weights_.size()) throw DomainError("cannot pad to a smaller window");
  auto w = weights_;
  w.resize(n_states, 0.0);
  return Distribution(std::move(w));
}

double tv_distance(std::span<const double> mu, std::span<const double> nu) {
  if (mu.size() != nu.size())
    throw DomainError("total variation between different windows (" + std::to_string(mu.size()) +
                      " vs " + std::to_string(nu.size()) + " states)");
  double s = 0;
  for (std::size_t i = 0; i < mu.size(); ++i) s += std::abs(mu[i] - nu[i]);
  return s;
}

double tv_distance(const Distribution& mu, const Distribution& nu) {
  return tv_distance(mu.weights(), nu.weights());
}

}  // namespace qsd
