#include "qsd/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qsd/birth_death.hpp"
#include "qsd/chain_file.hpp"
#include "qsd/certifier.hpp"
#include "qsd/criterion.hpp"
#include "qsd/engine.hpp"
#include "qsd/monte_carlo.hpp"
#include "qsd/report.hpp"

namespace qsd::cli {

std::string to_string(Command c) {
  switch (c) {
    case Command::qsd: return "qsd";
    case Command::certify: return "certify";
    case Command::criterion: return "criterion";
    case Command::bd: return "bd";
    case Command::decay: return "decay";
    case Command::simulate: return "simulate";
    case Command::fv: return "fv";
  }
  return "?";
}

namespace {

const std::vector<std::pair<std::string, Command>> commands = {
    {"qsd", Command::qsd},       {"certify", Command::certify},   {"criterion", Command::criterion},
    {"bd", Command::bd},         {"decay", Command::decay},       {"simulate", Command::simulate},
    {"fv", Command::fv}};

[[noreturn]] void bad(const std::string& flag, const std::string& value, const std::string& why) {
  throw UsageError(flag + ": invalid value '" + value + "' (" + why + ")");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string part;
  std::istringstream is(s);
  while (std::getline(is, part, sep)) out.push_back(part);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& flag, const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) bad(flag, s, "not a finite number");
    return v;
  } catch (const std::logic_error&) {
    bad(flag, s, "not a number");
  }
}

std::uint64_t to_unsigned(const std::string& flag, const std::string& s) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
    bad(flag, s, "not a non-negative integer");
  try {
    return std::stoull(s);
  } catch (const std::out_of_range&) {
    bad(flag, s, "out of range");
  }
}

LogisticParams parse_logistic(const std::string& s) {
  const auto parts = split(s, ',');
  if (parts.size() != 3) bad("--logistic", s, "expected B,D,C");
  LogisticParams p{to_double("--logistic", parts[0]), to_double("--logistic", parts[1]),
                   to_double("--logistic", parts[2])};
  if (!(p.b > 0 && p.d > 0 && p.c > 0)) bad("--logistic", s, "rates must be positive");
  return p;
}

GridSpec parse_grid(const std::string& s) {
  const auto parts = split(s, ':');
  if (parts.size() != 3 || parts[0] != "geometric") bad("--grid", s, "expected geometric:RATIO:COUNT");
  GridSpec g{to_double("--grid", parts[1]), to_unsigned("--grid", parts[2])};
  if (!(g.ratio > 1)) bad("--grid", s, "ratio must exceed 1 for a strictly increasing grid");
  if (g.count < 1) bad("--grid", s, "count must be >= 1");
  return g;
}

StateSet parse_K(const std::string& s) {
  const auto dots = s.find("..");
  try {
    if (dots != std::string::npos) {
      const auto lo = to_unsigned("--K", s.substr(0, dots));
      const auto hi = to_unsigned("--K", s.substr(dots + 2));
      if (lo != 1) bad("--K", s, "ranges must start at 1");
      if (hi < 1) bad("--K", s, "empty range");
      return StateSet::prefix(hi);
    }
    std::vector<State> states;
    for (const auto& part : split(s, ',')) states.push_back(to_unsigned("--K", part));
    return StateSet(std::move(states));
  } catch (const ValidationError& e) {
    bad("--K", s, e.what());
  }
}

double default_tmax(Command c) {
  switch (c) {
    case Command::simulate: return 10.0;
    case Command::fv: return 20.0;
    default: return 12.0;
  }
}

struct Model {
  ChainDefinition def;
  std::optional<ChainBuilder> builder;
  bool auto_window;
};

Model resolve_model(const RunConfig& config) {
  Model m;
  if (config.chain_file) {
    m.def = load_chain_file(*config.chain_file);
  } else {
    m.def.logistic = config.logistic;
  }
  if (config.boundary) m.def.boundary = *config.boundary;
  if (config.states) m.def.n_states = config.states;
  m.builder = m.def.builder();
  m.auto_window = !m.def.n_states;
  if (m.auto_window && !m.builder)
    throw ValidationError("an automatic window needs a logistic model");
  return m;
}

struct Window {
  AbsorbedChain chain;
  std::optional<QsdResult> qsd;
};

Window materialize(const Model& m, const RunConfig& config) {
  if (m.auto_window) {
    QsdOptions opts;
    opts.tol = std::min(config.tol, 1e-10);
    auto aw = auto_window(*m.builder, config.tol, 16, 4096, opts);
    return {std::move(aw.chain), std::move(aw.result)};
  }
  return {m.def.build(), std::nullopt};
}

std::vector<double> sample_grid(const RunConfig& config, double tmax) {
  if (config.grid) return geometric_grid(tmax, config.grid->ratio, config.grid->count);
  std::vector<double> out;
  for (double t = 1; t <= tmax; t += 1) out.push_back(t);
  if (out.empty()) out.push_back(tmax);
  return out;
}

std::ofstream open_output(const RunConfig& config, const std::string& name) {
  std::ofstream os(config.out / name);
  if (!os) throw std::runtime_error("cannot write " + (config.out / name).string());
  return os;
}

int run_qsd(const RunConfig& config, std::ostream& out) {
  const auto m = resolve_model(config);
  auto w = materialize(m, config);
  QsdOptions opts;
  opts.tol = config.tol;
  const QsdResult r = w.qsd ? *w.qsd : compute_qsd(w.chain, opts);
  auto os = open_output(config, "qsd.csv");
  write_distribution_csv(os, r.qsd);
  write_qsd_summary(out, r);
  return 0;
}

struct Certified {
  HypothesisCertificate cert;
  AbsorbedChain chain;
  std::optional<QsdResult> qsd;
};

Certified certify_model(const RunConfig& config) {
  const auto m = resolve_model(config);
  if (m.def.logistic && m.auto_window && !config.K && config.x0 == 1) {
    LogisticCertificateOptions opts;
    opts.window_tol = config.tol;
    const auto& p = *m.def.logistic;
    auto lc = logistic_certificate(p.b, p.d, p.c, opts);
    return {std::move(lc.certificate), std::move(lc.chain), std::move(lc.qsd)};
  }
  auto w = materialize(m, config);
  const StateSet K = config.K ? *config.K : StateSet{config.x0};
  std::optional<AbsorbedChain> doubled;
  if (m.builder) doubled = (*m.builder)(2 * w.chain.n_states());
  CertifyOptions opts;
  opts.doubled = doubled ? &*doubled : nullptr;
  auto cert = certify(w.chain, K, config.x0, opts);
  return {std::move(cert), std::move(w.chain), std::move(w.qsd)};
}

int run_certify(const RunConfig& config, std::ostream& out) {
  const auto c = certify_model(config);
  auto os = open_output(config, "certificate.txt");
  write_certificate(os, c.cert);
  write_certificate(out, c.cert);
  return 0;
}

int run_criterion(const RunConfig& config, std::ostream& out) {
  const auto m = resolve_model(config);
  const auto w = materialize(m, config);
  auto report = check_ferrari_maric(w.chain);
  std::optional<StateSet> K = config.K;
  if (!K && w.chain.top() >= 2) K = find_minimal_K(w.chain, w.chain.top() - 1);
  if (K) {
    const auto t31 = check_theorem31(w.chain, *K);
    report.K = t31.K;
    report.alpha_K = t31.alpha_K;
    report.alpha_K_edge = t31.alpha_K_edge;
    report.theorem31_holds = t31.theorem31_holds;
    report.c4_bound = t31.c4_bound;
    report.lambda0 = t31.lambda0;
  }
  auto os = open_output(config, "criterion.txt");
  write_criterion(os, report);
  write_criterion(out, report);
  return 0;
}

int run_bd(const RunConfig& config, std::ostream& out) {
  const auto m = resolve_model(config);
  if (!m.def.logistic) throw ValidationError("bd needs a logistic birth-death model");
  const auto& p = *m.def.logistic;
  const auto spec = BirthDeathSpec::make_logistic(p.b, p.d, p.c);
  const double lambda0 = config.lambda0 ? *config.lambda0 : p.b + p.d;
  const auto r = bd_report(spec, lambda0);
  {
    auto os = open_output(config, "bd_report.txt");
    write_bd_report(os, r);
  }
  {
    auto os = open_output(config, "bd_alpha.csv");
    write_alpha_csv(os, r);
  }
  {
    auto os = open_output(config, "bd_hitting.csv");
    write_hitting_csv(os, r);
  }
  write_bd_report(out, r);
  if (!r.z0) throw NumericalError("moment diverges at lambda0 for every z <= 50");
  return 0;
}

int run_decay(const RunConfig& config, std::ostream& out, std::ostream& err) {
  std::optional<HypothesisCertificate> cert;
  std::optional<AbsorbedChain> chain;
  std::optional<QsdResult> qsd;
  try {
    auto c = certify_model(config);
    cert = std::move(c.cert);
    chain = std::move(c.chain);
    qsd = std::move(c.qsd);
  } catch (const CertificationError& e) {
    err << "warning: no certificate, bound column omitted: " << e.what() << '\n';
    auto w = materialize(resolve_model(config), config);
    chain = std::move(w.chain);
    qsd = std::move(w.qsd);
  }
  QsdOptions opts;
  opts.tol = std::min(config.tol, 1e-10);
  if (!qsd) qsd = compute_qsd(*chain, opts);
  const State nu_state = config.nu ? *config.nu : std::min<State>(40, chain->top());
  const auto mu = Distribution::dirac(config.x0, chain->n_states());
  const auto nu = Distribution::dirac(nu_state, chain->n_states());
  const auto times = sample_grid(config, config.tmax ? *config.tmax : default_tmax(config.command));
  const auto rows = decay_table(*chain, mu, nu, qsd->qsd, times);
  auto os = open_output(config, "decay.csv");
  write_decay_csv(os, rows, cert ? &*cert : nullptr);
  out << "rows = " << rows.size() << '\n';
  if (cert) out << "gamma = " << format_number(cert->gamma) << '\n';
  return 0;
}

int run_simulate(const RunConfig& config, std::ostream& out) {
  const auto m = resolve_model(config);
  const auto w = materialize(m, config);
  const auto mu = Distribution::dirac(config.x0, w.chain.n_states());
  const double horizon = config.tmax ? *config.tmax : default_tmax(config.command);
  McOptions opts;
  opts.threads = config.threads;
  const auto batch = simulate_batch(w.chain, mu, horizon, config.paths, config.seed, std::nullopt, opts);
  {
    auto os = open_output(config, "batch.csv");
    write_batch_csv(os, batch);
  }
  const auto est = conditional_estimate(batch, w.chain.n_states());
  auto os = open_output(config, "conditional.csv");
  write_distribution_csv(os, est.law);
  out << "survival_fraction = " << format_number(est.survival_fraction) << '\n';
  out << "survivors = " << est.survivors << '\n';
  return 0;
}

int run_fv(const RunConfig& config, std::ostream& out) {
  const auto m = resolve_model(config);
  const auto w = materialize(m, config);
  const auto mu = Distribution::dirac(config.x0, w.chain.n_states());
  const double horizon = config.tmax ? *config.tmax : default_tmax(config.command);
  const auto times = sample_grid(config, horizon);
  const auto snaps = fleming_viot(w.chain, mu, config.particles, horizon, config.seed, times);
  auto os = open_output(config, "fv.csv");
  write_fv_csv(os, snaps);
  out << "redraws = " << (snaps.empty() ? 0 : snaps.back().redraw_count) << '\n';
  return 0;
}

}  // namespace

std::string usage() {
  return "usage: qsdcert COMMAND (--chain FILE | --logistic B,D,C) [options]\n"
         "commands: qsd certify criterion bd decay simulate fv\n"
         "run `qsdcert --help` for the option list\n";
}

RunConfig parse_args(const std::vector<std::string>& args) {
  if (args.empty()) throw UsageError("missing command");

  CLI::App app{"Quasi-stationary distributions of absorbed Markov chains", "qsdcert"};
  std::string command, chain, logistic, states, boundary, grid, K, tol, tmax, seed, out, x0, nu,
      lambda0, threads, paths, particles;
  app.add_option("command", command, "qsd | certify | criterion | bd | decay | simulate | fv")
      ->required();
  app.add_option("--chain", chain, "chain definition file");
  app.add_option("--logistic", logistic, "logistic rates B,D,C");
  app.add_option("--states", states, "window size N (states 0..N-1) or auto");
  app.add_option("--boundary", boundary, "reflect | kill");
  app.add_option("--tol", tol, "tolerance (default 1e-10)");
  app.add_option("--tmax", tmax, "time horizon");
  app.add_option("--grid", grid, "geometric:RATIO:COUNT");
  app.add_option("--seed", seed, "random seed (default 1)");
  app.add_option("--out", out, "output directory (default .)");
  app.add_option("--K", K, "set K as 1..k or a comma list");
  app.add_option("--x0", x0, "reference / starting state (default 1)");
  app.add_option("--nu", nu, "second starting state for decay");
  app.add_option("--lambda0", lambda0, "exponential rate for bd (default b+d)");
  app.add_option("--threads", threads, "worker threads (default 1)");
  app.add_option("--paths", paths, "paths for simulate (default 100000)");
  app.add_option("--particles", particles, "particles for fv (default 10000)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw UsageError(app.help(), true);
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  RunConfig c;
  const auto it = std::find_if(commands.begin(), commands.end(),
                               [&](const auto& p) { return p.first == command; });
  if (it == commands.end()) throw UsageError("unknown command '" + command + "'");
  c.command = it->second;

  const bool has_chain = app.count("--chain") > 0, has_logistic = app.count("--logistic") > 0;
  if (has_chain == has_logistic) throw UsageError("give exactly one of --chain and --logistic");
  if (has_chain) c.chain_file = chain;
  if (has_logistic) c.logistic = parse_logistic(logistic);

  if (app.count("--states") && states != "auto") {
    c.states = to_unsigned("--states", states);
    if (*c.states < 2) bad("--states", states, "need at least 2 states");
  }
  if (app.count("--boundary")) {
    if (boundary == "reflect")
      c.boundary = Boundary::reflect_at_top;
    else if (boundary == "kill")
      c.boundary = Boundary::kill_at_top;
    else
      bad("--boundary", boundary, "expected reflect or kill");
  }
  if (app.count("--tol")) {
    c.tol = to_double("--tol", tol);
    if (!(c.tol > 0)) bad("--tol", tol, "must be positive");
  }
  if (app.count("--tmax")) {
    c.tmax = to_double("--tmax", tmax);
    if (!(*c.tmax > 0)) bad("--tmax", tmax, "must be positive");
  }
  if (app.count("--grid")) c.grid = parse_grid(grid);
  if (app.count("--seed")) c.seed = to_unsigned("--seed", seed);
  if (app.count("--out")) c.out = out;
  if (app.count("--K")) c.K = parse_K(K);
  if (app.count("--x0")) {
    c.x0 = to_unsigned("--x0", x0);
    if (c.x0 < 1) bad("--x0", x0, "must be >= 1");
  }
  if (app.count("--nu")) {
    c.nu = to_unsigned("--nu", nu);
    if (*c.nu < 1) bad("--nu", nu, "must be >= 1");
  }
  if (app.count("--lambda0")) {
    c.lambda0 = to_double("--lambda0", lambda0);
    if (!(*c.lambda0 > 0)) bad("--lambda0", lambda0, "must be positive");
  }
  if (app.count("--threads")) {
    c.threads = static_cast<unsigned>(to_unsigned("--threads", threads));
    if (c.threads < 1) bad("--threads", threads, "must be >= 1");
  }
  if (app.count("--paths")) {
    c.paths = to_unsigned("--paths", paths);
    if (c.paths < 1) bad("--paths", paths, "must be >= 1");
  }
  if (app.count("--particles")) {
    c.particles = to_unsigned("--particles", particles);
    if (c.particles < 2) bad("--particles", particles, "must be >= 2");
  }
  if (c.K && !c.K->contains(c.x0)) throw UsageError("--K must contain --x0");
  return c;
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    std::filesystem::create_directories(config.out);
    switch (config.command) {
      case Command::qsd: return run_qsd(config, out);
      case Command::certify: return run_certify(config, out);
      case Command::criterion: return run_criterion(config, out);
      case Command::bd: return run_bd(config, out);
      case Command::decay: return run_decay(config, out, err);
      case Command::simulate: return run_simulate(config, out);
      case Command::fv: return run_fv(config, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig config;
  try {
    config = parse_args(args);
  } catch (const UsageError& e) {
    if (e.help()) {
      out << e.what();
      return 0;
    }
    err << "usage error: " << e.what() << '\n' << usage();
    return 2;
  }
  return run(config, out, err);
}

}  // namespace qsd::cli
