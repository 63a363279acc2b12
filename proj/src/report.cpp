#include "qsd/report.hpp"

#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

namespace qsd {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

namespace {

void kv(std::ostream& os, const std::string& key, const std::string& value) {
  os << key << " = " << value << '\n';
}

void kv(std::ostream& os, const std::string& key, double value) {
  kv(os, key, format_number(value));
}

void kv(std::ostream& os, const std::string& key, bool value) {
  kv(os, key, std::string(value ? "true" : "false"));
}

}  // namespace

void write_distribution_csv(std::ostream& os, const Distribution& mu) {
  os << "state,weight\n";
  for (State x = 1; x < mu.n_states(); ++x) os << x << ',' << format_number(mu[x]) << '\n';
}

void write_qsd_summary(std::ostream& os, const QsdResult& r) {
  kv(os, "truncation_n", std::to_string(r.truncation_n));
  kv(os, "absorption_rate", r.absorption_rate);
  kv(os, "decay_rate", r.decay_rate);
  kv(os, "eigen_residual", r.eigen_residual);
  kv(os, "tv_increment", r.tv_increment);
  kv(os, "iterations", std::to_string(r.iterations));
}

void write_certificate(std::ostream& os, const HypothesisCertificate& cert) {
  kv(os, "K", cert.K.to_string());
  kv(os, "x0", std::to_string(cert.x0));
  kv(os, "c1", cert.c1.value);
  kv(os, "c2", cert.c2.value);
  kv(os, "c3", cert.c3.value);
  kv(os, "c4", cert.c4.value);
  kv(os, "lambda0", cert.lambda0.value);
  kv(os, "gamma", cert.gamma);
  kv(os, "provenance.c1", to_string(cert.c1.provenance));
  kv(os, "provenance.c2", to_string(cert.c2.provenance));
  kv(os, "provenance.c3", to_string(cert.c3.provenance));
  kv(os, "provenance.c4", to_string(cert.c4.provenance));
  kv(os, "provenance.lambda0", to_string(cert.lambda0.provenance));
  kv(os, "provenance", to_string(cert.provenance()));
  kv(os, "window_limited", cert.window_limited);
  os << "# bound(t) = 2*(1-gamma)^floor(t)\n";
  for (const auto& note : cert.notes) os << "# " << note << '\n';
}

void write_criterion(std::ostream& os, const CriterionReport& r) {
  kv(os, "C", r.C);
  kv(os, "never_absorbed", r.never_absorbed);
  kv(os, "q_bar", r.q_bar);
  kv(os, "q_bar_window_edge", r.q_bar_edge);
  kv(os, "alpha_fm", r.alpha_fm);
  kv(os, "fm_holds", r.fm_holds);
  kv(os, "K", r.K ? r.K->to_string() : std::string("none"));
  if (r.K) {
    kv(os, "alpha_K", r.alpha_K);
    kv(os, "alpha_K_window_edge", r.alpha_K_edge);
  }
  kv(os, "theorem31_holds", r.theorem31_holds);
  if (r.c4_bound) kv(os, "c4_bound", *r.c4_bound);
  if (r.lambda0) kv(os, "lambda0", *r.lambda0);
}

void write_bd_report(std::ostream& os, const BdHittingReport& r) {
  kv(os, "tail_series_S", r.tail_series_S);
  kv(os, "lambda0", r.lambda0);
  kv(os, "z0", r.z0 ? std::to_string(*r.z0) : std::string("none"));
  kv(os, "K", r.z0 ? StateSet::prefix(*r.z0).to_string() : std::string("none"));
  kv(os, "exp_moment_sup", r.exp_moment_sup ? format_number(*r.exp_moment_sup) : "inf");
  for (std::size_t j = 1; j < r.alpha.size(); ++j)
    kv(os, "alpha." + std::to_string(j), r.alpha[j]);
}

void write_alpha_csv(std::ostream& os, const BdHittingReport& r) {
  os << "j,alpha\n";
  for (std::size_t j = 1; j < r.alpha.size(); ++j) os << j << ',' << format_number(r.alpha[j]) << '\n';
}

void write_hitting_csv(std::ostream& os, const BdHittingReport& r) {
  os << "x,expected_hitting,exp_moment\n";
  for (const auto& row : r.table)
    os << row.x << ',' << format_number(row.expected_hitting) << ','
       << format_number(row.exp_moment) << '\n';
}

void write_decay_csv(std::ostream& os, std::span<const DecayRow> rows,
                     const HypothesisCertificate* cert) {
  os << "t,tv_mu,tv_nu,tv_pair" << (cert ? ",certified_bound" : "") << '\n';
  for (const auto& row : rows) {
    os << format_number(row.t) << ',' << format_number(row.tv_mu) << ','
       << format_number(row.tv_nu) << ',' << format_number(row.tv_pair);
    if (cert) os << ',' << format_number(cert->bound(row.t));
    os << '\n';
  }
}

void write_trace_csv(std::ostream& os, const ConvergenceTrace& trace) {
  const bool pair = !trace.tv_between_pair.empty();
  os << "t,tv_to_limit" << (pair ? ",tv_pair" : "") << '\n';
  for (std::size_t i = 0; i < trace.times.size(); ++i) {
    os << format_number(trace.times[i]) << ',' << format_number(trace.tv_to_limit[i]);
    if (pair) os << ',' << format_number(trace.tv_between_pair[i]);
    os << '\n';
  }
}

void write_batch_csv(std::ostream& os, const TrajectoryBatch& batch) {
  os << "path,end_state,absorption_time\n";
  for (std::size_t i = 0; i < batch.n_paths; ++i) {
    os << i << ',' << batch.end_states[i] << ',';
    if (batch.stop_times[i]) os << format_number(*batch.stop_times[i]);
    os << '\n';
  }
}

void write_fv_csv(std::ostream& os, std::span<const ParticleEnsemble> snapshots) {
  os << "t,state,count\n";
  for (const auto& snap : snapshots) {
    std::map<State, std::size_t> counts;
    for (State x : snap.positions) ++counts[x];
    for (const auto& [x, n] : counts) os << format_number(snap.time) << ',' << x << ',' << n << '\n';
  }
}

}  // namespace qsd
