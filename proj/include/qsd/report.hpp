#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsd/birth_death.hpp"
#include "qsd/certifier.hpp"
#include "qsd/criterion.hpp"
#include "qsd/distribution.hpp"
#include "qsd/engine.hpp"
#include "qsd/monte_carlo.hpp"

namespace qsd {

/// 17 significant digits; "inf", "-inf" and "nan" for non-finite values.
std::string format_number(double v);

/// `state,weight`
void write_distribution_csv(std::ostream& os, const Distribution& mu);

/// `key = value` lines.
void write_qsd_summary(std::ostream& os, const QsdResult& r);
void write_certificate(std::ostream& os, const HypothesisCertificate& cert);
void write_criterion(std::ostream& os, const CriterionReport& r);
void write_bd_report(std::ostream& os, const BdHittingReport& r);

/// `j,alpha`
void write_alpha_csv(std::ostream& os, const BdHittingReport& r);
/// `x,expected_hitting,exp_moment`
void write_hitting_csv(std::ostream& os, const BdHittingReport& r);

/// `t,tv_mu,tv_nu,tv_pair,certified_bound`; the last column is left out when
/// no certificate is given.
void write_decay_csv(std::ostream& os, std::span<const DecayRow> rows,
                     const HypothesisCertificate* cert);

/// `t,tv_to_limit[,tv_pair]`
void write_trace_csv(std::ostream& os, const ConvergenceTrace& trace);

/// `path,end_state,absorption_time`, the time left empty for survivors.
void write_batch_csv(std::ostream& os, const TrajectoryBatch& batch);

/// `t,state,count` over occupied states.
void write_fv_csv(std::ostream& os, std::span<const ParticleEnsemble> snapshots);

}  // namespace qsd
