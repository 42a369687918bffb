// qfm: simulate, fit, qcor, compare, diagnose.

#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "qfm/error.hpp"
#include "qfm/io.hpp"

namespace fs = std::filesystem;
using namespace qfm;

namespace {

// Stream reserved for posterior-predictive replicates; chains use 0..chains-1.
constexpr std::uint64_t kPredictiveStream = 1024;

struct Flags {
  std::optional<std::string> config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> iters, burnin, thin, chains, k, n;
  std::optional<double> tau;
  bool store_latent = false;
  bool paper_protocol = false;
  std::optional<std::string> scenario;
  std::vector<double> taus;
  std::vector<int> pair;
  std::vector<std::string> inputs;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--out", f.out, "output directory")->capture_default_str();
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--iters", f.iters, "MCMC iterations");
  cmd->add_option("--burnin", f.burnin, "burn-in iterations");
  cmd->add_option("--thin", f.thin, "thinning interval");
  cmd->add_option("--chains", f.chains, "number of chains");
  cmd->add_flag("--paper-protocol", f.paper_protocol,
                "160000 iterations, 10000 burn-in, thin 50, 2 chains");
}

RunConfig resolve(const Flags& f) {
  RunConfig cfg;
  if (f.config) cfg = load_config_file(*f.config, cfg);
  if (f.paper_protocol) {
    const auto p = McmcConfig::paper_protocol();
    cfg.mcmc.iterations = p.iterations;
    cfg.mcmc.burn_in = p.burn_in;
    cfg.mcmc.thin = p.thin;
    cfg.mcmc.chains = p.chains;
  }
  if (f.seed) cfg.mcmc.seed = *f.seed;
  if (f.iters) cfg.mcmc.iterations = *f.iters;
  if (f.burnin) cfg.mcmc.burn_in = *f.burnin;
  if (f.thin) cfg.mcmc.thin = *f.thin;
  if (f.chains) cfg.mcmc.chains = *f.chains;
  if (f.tau) cfg.tau = *f.tau;
  if (f.k) cfg.k = *f.k;
  if (f.n) cfg.n = *f.n;
  if (f.scenario) cfg.scenario = *f.scenario;
  if (f.store_latent) cfg.store_latent = true;
  if (!f.taus.empty()) cfg.taus = f.taus;
  if (!f.pair.empty()) {
    if (f.pair.size() != 2) fail(ErrorKind::config, "--pair takes two column numbers");
    cfg.pair = std::make_pair(f.pair[0], f.pair[1]);
  }
  if (const auto v = validate_config(cfg.mcmc); !v.empty()) {
    fail(ErrorKind::config, "invalid MCMC settings: " + v.front());
  }
  return cfg;
}

std::string output_path(const std::string& dir, const std::string& name) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create output directory " + dir + ": " + ec.message());
  return (fs::path(dir) / name).string();
}

void cmd_simulate(const Flags& f) {
  const RunConfig cfg = resolve(f);
  Matrix y;
  if (cfg.scenario == "case1") {
    y = gen_case1(cfg.n, cfg.mcmc.seed, cfg.case1);
  } else if (cfg.scenario == "case2") {
    y = gen_case2(cfg.n, cfg.mcmc.seed, cfg.dof);
  } else if (cfg.scenario == "qfm") {
    if (cfg.beta.size() == 0 || cfg.sigma.size() == 0) {
      fail(ErrorKind::config, "scenario qfm needs beta and sigma in --config");
    }
    ModelSpec spec{cfg.n, static_cast<int>(cfg.beta.rows()),
                   static_cast<int>(cfg.beta.cols()), cfg.tau, cfg.priors};
    y = gen_qfm(spec, cfg.beta, cfg.sigma, cfg.mcmc.seed).y;
  } else {
    fail(ErrorKind::config, "unknown scenario '" + cfg.scenario + "'");
  }
  write_text_file(output_path(f.out, "data.csv"), data_csv(y));
}

void cmd_fit(const Flags& f) {
  const RunConfig cfg = resolve(f);
  if (f.inputs.size() != 1) fail(ErrorKind::config, "fit takes one data file");
  const DataTable data = read_csv(f.inputs[0]);
  const Matrix& y = data.values;
  ModelSpec spec{static_cast<int>(y.rows()), static_cast<int>(y.cols()), cfg.k,
                 cfg.tau, cfg.priors};
  if (cfg.p && *cfg.p != spec.p) {
    fail(ErrorKind::data, "data have " + std::to_string(spec.p) +
                              " columns but the config sets p = " + std::to_string(*cfg.p));
  }
  require_valid(spec);
  const int kept = (cfg.mcmc.iterations - cfg.mcmc.burn_in) / cfg.mcmc.thin;
  if (kept < 8) fail(ErrorKind::config, "fewer than 8 stored draws per chain");

  const PosteriorSample sample = run_parallel_chains(y, spec, cfg.mcmc);
  for (std::size_t c = 0; c < sample.chains.size(); ++c) {
    if (!sample.chains[c].error.empty()) {
      fail(ErrorKind::numerical,
           "chain " + std::to_string(c + 1) + ": " + sample.chains[c].error);
    }
    if (!sample.chains[c].tuned) {
      std::cerr << "qfm: warning: chain " << c + 1
                << " proposal tuning ended outside the target band\n";
    }
  }
  const DiagnosticsReport diag = diagnose(sample);
  RngStream rng(cfg.mcmc.seed, kPredictiveStream);
  const CriteriaReport crit = evaluate_criteria(sample, y, rng, cfg.replicates);
  for (const auto& w : crit.info.warnings) std::cerr << "qfm: warning: " << w << "\n";

  write_text_file(output_path(f.out, "draws.csv"), draws_csv(sample, cfg.store_latent));
  write_text_file(output_path(f.out, "summary.json"),
                  fit_summary(sample, cfg.mcmc, crit, diag).dump(2) + "\n");
}

void cmd_qcor(const Flags& f) {
  const RunConfig cfg = resolve(f);
  if (f.inputs.size() != 1) fail(ErrorKind::config, "qcor takes one data file");
  const DataTable data = read_csv(f.inputs[0]);
  const Matrix& y = data.values;
  const int p = static_cast<int>(y.cols());
  if (p < 2) fail(ErrorKind::data, "qcor needs at least two columns");

  std::vector<std::pair<int, int>> pairs;
  if (cfg.pair) {
    const auto [a, b] = *cfg.pair;
    if (a < 1 || b < 1 || a > p || b > p || a == b) {
      fail(ErrorKind::config, "--pair must name two distinct columns in 1.." +
                                  std::to_string(p));
    }
    pairs.push_back(*cfg.pair);
  } else {
    for (int a = 1; a <= p; ++a)
      for (int b = a + 1; b <= p; ++b) pairs.emplace_back(a, b);
  }

  QuantRegConfig qc;
  qc.iterations = cfg.mcmc.iterations;
  qc.burn_in = cfg.mcmc.burn_in;
  qc.thin = cfg.mcmc.thin;
  qc.priors = cfg.priors;
  std::vector<QCorRow> rows;
  for (std::size_t q = 0; q < pairs.size(); ++q) {
    const auto [a, b] = pairs[q];
    const auto curve = qcor_curve(y.col(a - 1), y.col(b - 1), cfg.taus, qc,
                                  cfg.mcmc.seed, q * cfg.taus.size());
    for (const auto& e : curve) rows.push_back({a, b, e});
  }
  write_text_file(output_path(f.out, "qcor.json"),
                  qcor_summary(rows, cfg.mcmc).dump(2) + "\n");
}

void cmd_compare(const Flags& f) {
  std::vector<Json> summaries;
  for (const auto& path : f.inputs) {
    try {
      summaries.push_back(Json::parse(read_text_file(path)));
    } catch (const Json::parse_error& e) {
      fail(ErrorKind::data, path + ": invalid JSON: " + e.what());
    }
  }
  const CompareTable t = compare_summaries(summaries, f.inputs);
  if (t.warning) std::cerr << "qfm: warning: " << *t.warning << "\n";
  write_text_file(output_path(f.out, "compare.csv"), t.csv);
}

void cmd_diagnose(const Flags& f) {
  if (f.inputs.size() != 1) fail(ErrorKind::config, "diagnose takes one draws file");
  const auto traces = read_draws_csv(f.inputs[0]);
  write_text_file(output_path(f.out, "diagnostics.json"),
                  diagnostics_summary(traces).dump(2) + "\n");
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::config:
    case ErrorKind::domain:
      return 2;
    case ErrorKind::data:
    case ErrorKind::degenerate:
      return 3;
    case ErrorKind::numerical:
      return 4;
    case ErrorKind::io:
      return 5;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian quantile factor models"};
  app.require_subcommand(1);
  Flags f;

  auto* sim = app.add_subcommand("simulate", "write a synthetic data set");
  add_common(sim, f);
  sim->add_option("--scenario", f.scenario, "case1, case2 or qfm");
  sim->add_option("--n", f.n, "observations");
  sim->add_option("--tau", f.tau, "quantile level (qfm scenario)");

  auto* fit = app.add_subcommand("fit", "fit a quantile factor model");
  add_common(fit, f);
  fit->add_option("data", f.inputs, "data CSV")->required();
  fit->add_option("--tau", f.tau, "quantile level");
  fit->add_option("--k", f.k, "number of factors");
  fit->add_flag("--store-latent", f.store_latent, "also write f and w draws");

  auto* qc = app.add_subcommand("qcor", "Bayesian quantile correlations");
  add_common(qc, f);
  qc->add_option("data", f.inputs, "data CSV")->required();
  qc->add_option("--tau", f.taus, "quantile grid, comma separated")->delimiter(',');
  qc->add_option("--pair", f.pair, "two 1-based columns, e.g. 1,2")->delimiter(',');

  auto* cmp = app.add_subcommand("compare", "tabulate criteria of several fits");
  cmp->add_option("--out", f.out, "output directory")->capture_default_str();
  cmp->add_option("summaries", f.inputs, "summary JSON files")->required();

  auto* dia = app.add_subcommand("diagnose", "convergence diagnostics of a draws file");
  dia->add_option("--out", f.out, "output directory")->capture_default_str();
  dia->add_option("draws", f.inputs, "draws CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) cmd_simulate(f);
    else if (fit->parsed()) cmd_fit(f);
    else if (qc->parsed()) cmd_qcor(f);
    else if (cmp->parsed()) cmd_compare(f);
    else if (dia->parsed()) cmd_diagnose(f);
  } catch (const Error& e) {
    std::cerr << "qfm: error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "qfm: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
