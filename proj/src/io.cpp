#include "qfm/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "qfm/error.hpp"

namespace qfm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& where) {
  if (s.empty()) fail(ErrorKind::data, where + ": empty value");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
    fail(ErrorKind::data, where + ": not a finite number '" + s + "'");
  }
  return v;
}

Json number_or_null(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

Json matrix_rows(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(number_or_null(m(i, j)));
    rows.push_back(std::move(r));
  }
  return rows;
}

Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number_or_null(v[i]));
  return a;
}

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  fail(ErrorKind::config, "config key '" + key + "': " + why);
}

int get_int(const Json& v, const std::string& key) {
  if (!v.is_number_integer()) bad_key(key, "expected an integer");
  return v.get<int>();
}

double get_real(const Json& v, const std::string& key) {
  if (!v.is_number()) bad_key(key, "expected a number");
  return v.get<double>();
}

bool get_bool(const Json& v, const std::string& key) {
  if (!v.is_boolean()) bad_key(key, "expected true or false");
  return v.get<bool>();
}

std::string get_string(const Json& v, const std::string& key) {
  if (!v.is_string()) bad_key(key, "expected a string");
  return v.get<std::string>();
}

Vector get_vector(const Json& v, const std::string& key) {
  if (!v.is_array()) bad_key(key, "expected an array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = get_real(v[i], key);
  return out;
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

DataTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  DataTable t;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::data, path + ": empty file");
  t.names = split(line);
  if (t.names.empty() || t.names[0].empty()) {
    fail(ErrorKind::data, path + ": missing header row");
  }
  const std::size_t width = t.names.size();
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (cells.size() != width) {
      fail(ErrorKind::data, where + ": expected " + std::to_string(width) +
                                " values, found " + std::to_string(cells.size()));
    }
    std::vector<double> r;
    for (const auto& c : cells) r.push_back(parse_number(c, where));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) fail(ErrorKind::data, path + ": no data rows");
  t.values.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) t.values(i, j) = rows[i][j];
  return t;
}

std::string data_csv(const Matrix& y) {
  std::string out;
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    out += (j ? ",y" : "y") + std::to_string(j + 1);
  }
  out += '\n';
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      if (j) out += ',';
      out += format_double(y(i, j));
    }
    out += '\n';
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  out << text;
  out.close();
  if (!out) fail(ErrorKind::io, "write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string draws_csv(const PosteriorSample& sample, bool latent) {
  std::string out = "chain,iter,param,value\n";
  const int k = sample.spec.k;
  for (std::size_t c = 0; c < sample.chains.size(); ++c) {
    const auto& chain = sample.chains[c];
    for (std::size_t d = 0; d < chain.draws.size(); ++d) {
      const ChainState& s = chain.draws[d];
      const std::string prefix =
          std::to_string(c + 1) + "," + std::to_string(chain.iteration[d]) + ",";
      auto emit = [&](const std::string& name, double v) {
        out += prefix;
        out += name;
        out += ',';
        out += format_double(v);
        out += '\n';
      };
      for (Eigen::Index j = 0; j < s.beta.rows(); ++j) {
        for (Eigen::Index l = 0; l < std::min<Eigen::Index>(j + 1, k); ++l) {
          emit("\"beta[" + std::to_string(j + 1) + "," + std::to_string(l + 1) + "]\"",
               s.beta(j, l));
        }
      }
      for (Eigen::Index j = 0; j < s.sigma.size(); ++j) {
        emit("sigma[" + std::to_string(j + 1) + "]", s.sigma[j]);
      }
      if (latent) {
        for (Eigen::Index i = 0; i < s.f.rows(); ++i) {
          for (Eigen::Index l = 0; l < s.f.cols(); ++l) {
            emit("\"f[" + std::to_string(i + 1) + "," + std::to_string(l + 1) + "]\"",
                 s.f(i, l));
          }
        }
        for (Eigen::Index i = 0; i < s.w.size(); ++i) {
          emit("w[" + std::to_string(i + 1) + "]", s.w[i]);
        }
      }
    }
  }
  return out;
}

std::vector<std::pair<std::string, std::vector<Trace>>> read_draws_csv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "chain,iter,param,value") {
    fail(ErrorKind::data, path + ": expected header chain,iter,param,value");
  }
  std::vector<std::pair<std::string, std::vector<Trace>>> out;
  std::map<std::string, std::size_t> index;
  std::map<int, std::size_t> chain_slot;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    // The parameter name may be quoted and contain a comma.
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    const auto c3 = line.rfind(',');
    if (c2 == std::string::npos || c3 <= c2) {
      fail(ErrorKind::data, where + ": malformed draws row");
    }
    const double chain_v = parse_number(trim(line.substr(0, c1)), where);
    std::string name = trim(line.substr(c2 + 1, c3 - c2 - 1));
    if (name.size() >= 2 && name.front() == '"' && name.back() == '"') {
      name = name.substr(1, name.size() - 2);
    }
    const double value = parse_number(trim(line.substr(c3 + 1)), where);
    const int chain = static_cast<int>(chain_v);
    auto [cit, new_chain] = chain_slot.try_emplace(chain, chain_slot.size());
    (void)new_chain;
    auto [pit, new_param] = index.try_emplace(name, out.size());
    if (new_param) out.emplace_back(name, std::vector<Trace>{});
    auto& traces = out[pit->second].second;
    if (traces.size() <= cit->second) traces.resize(cit->second + 1);
    traces[cit->second].push_back(value);
  }
  if (out.empty()) fail(ErrorKind::data, path + ": no draws");
  return out;
}

void apply_config_json(const Json& j, RunConfig& cfg) {
  if (!j.is_object()) fail(ErrorKind::config, "config must be a JSON object");
  // The protocol preset goes first so explicit keys can refine it.
  if (j.contains("paper_protocol") && get_bool(j["paper_protocol"], "paper_protocol")) {
    const auto preset = McmcConfig::paper_protocol();
    cfg.mcmc.iterations = preset.iterations;
    cfg.mcmc.burn_in = preset.burn_in;
    cfg.mcmc.thin = preset.thin;
    cfg.mcmc.chains = preset.chains;
  }
  for (const auto& [key, v] : j.items()) {
    if (key == "paper_protocol") {
      continue;
    } else if (key == "tau") {
      cfg.tau = get_real(v, key);
    } else if (key == "k") {
      cfg.k = get_int(v, key);
    } else if (key == "p") {
      cfg.p = get_int(v, key);
    } else if (key == "priors") {
      if (!v.is_object()) bad_key(key, "expected an object");
      for (const auto& [pk, pv] : v.items()) {
        if (pk == "c0") cfg.priors.c0 = get_real(pv, "priors." + pk);
        else if (pk == "nu") cfg.priors.nu = get_real(pv, "priors." + pk);
        else if (pk == "s2") cfg.priors.s2 = get_real(pv, "priors." + pk);
        else bad_key("priors." + pk, "unknown key");
      }
    } else if (key == "iterations") {
      cfg.mcmc.iterations = get_int(v, key);
    } else if (key == "burn_in") {
      cfg.mcmc.burn_in = get_int(v, key);
    } else if (key == "thin") {
      cfg.mcmc.thin = get_int(v, key);
    } else if (key == "chains") {
      cfg.mcmc.chains = get_int(v, key);
    } else if (key == "seed") {
      if (!v.is_number_unsigned()) bad_key(key, "expected a non-negative integer");
      cfg.mcmc.seed = v.get<std::uint64_t>();
    } else if (key == "proposal_sd") {
      cfg.mcmc.proposal_sd =
          v.is_number() ? Vector::Constant(1, v.get<double>()) : get_vector(v, key);
    } else if (key == "target_low") {
      cfg.mcmc.target_low = get_real(v, key);
    } else if (key == "target_high") {
      cfg.mcmc.target_high = get_real(v, key);
    } else if (key == "rotation_step") {
      cfg.mcmc.rotation_step = get_real(v, key);
    } else if (key == "adapt_window") {
      cfg.mcmc.adapt_window = get_int(v, key);
    } else if (key == "sigma_update") {
      const auto s = get_string(v, key);
      if (s == "auto") cfg.mcmc.sigma_update = SigmaUpdate::automatic;
      else if (s == "gibbs") cfg.mcmc.sigma_update = SigmaUpdate::gibbs;
      else if (s == "mh") cfg.mcmc.sigma_update = SigmaUpdate::mh;
      else bad_key(key, "expected auto, gibbs or mh");
    } else if (key == "store_latent") {
      cfg.store_latent = get_bool(v, key);
    } else if (key == "replicates") {
      cfg.replicates = get_int(v, key);
    } else if (key == "scenario") {
      cfg.scenario = get_string(v, key);
    } else if (key == "n") {
      cfg.n = get_int(v, key);
    } else if (key == "threshold") {
      cfg.case1.threshold = get_real(v, key);
    } else if (key == "contamination_var") {
      cfg.case1.contamination_var = get_real(v, key);
    } else if (key == "dof") {
      cfg.dof = get_real(v, key);
    } else if (key == "beta") {
      if (!v.is_array() || v.empty() || !v[0].is_array()) {
        bad_key(key, "expected an array of rows");
      }
      Matrix b(static_cast<Eigen::Index>(v.size()),
               static_cast<Eigen::Index>(v[0].size()));
      for (std::size_t r = 0; r < v.size(); ++r) {
        const Vector row = get_vector(v[r], key);
        if (row.size() != b.cols()) bad_key(key, "rows differ in length");
        b.row(r) = row.transpose();
      }
      cfg.beta = b;
    } else if (key == "sigma") {
      cfg.sigma = get_vector(v, key);
    } else if (key == "taus") {
      const Vector t = get_vector(v, key);
      cfg.taus.assign(t.data(), t.data() + t.size());
    } else if (key == "pair") {
      if (!v.is_array() || v.size() != 2) bad_key(key, "expected [a, b]");
      cfg.pair = std::make_pair(get_int(v[0], key), get_int(v[1], key));
    } else {
      bad_key(key, "unknown key");
    }
  }
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  const std::string text = read_text_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::config, path + ": invalid JSON: " + e.what());
  }
  apply_config_json(j, base);
  return base;
}

Json mcmc_to_json(const McmcConfig& c) {
  Json j;
  j["iterations"] = c.iterations;
  j["burn_in"] = c.burn_in;
  j["thin"] = c.thin;
  j["chains"] = c.chains;
  j["seed"] = c.seed;
  j["adapt_window"] = c.adapt_window;
  j["rotation_step"] = c.rotation_step;
  j["target_band"] = {c.target_low, c.target_high};
  j["sigma_update_requested"] = to_string(c.sigma_update);
  return j;
}

Json fit_summary(const PosteriorSample& sample, const McmcConfig& config,
                 const CriteriaReport& criteria,
                 const DiagnosticsReport& diagnostics) {
  const ModelSpec& spec = sample.spec;
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["family"] = kFamily;
  j["spec"] = {{"n", spec.n},
               {"p", spec.p},
               {"k", spec.k},
               {"tau", spec.tau},
               {"priors",
                {{"c0", spec.priors.c0}, {"nu", spec.priors.nu}, {"s2", spec.priors.s2}}}};
  j["mcmc"] = mcmc_to_json(config);
  j["sigma_update"] = to_string(sample.sigma_update);
  j["draws"] = sample.draw_count();

  Json post = Json::array();
  for (const auto& d : diagnostics.params) {
    post.push_back({{"param", d.name},
                    {"mean", number_or_null(d.pooled.mean)},
                    {"sd", number_or_null(d.pooled.sd)},
                    {"lower", number_or_null(d.pooled.q025)},
                    {"median", number_or_null(d.pooled.q50)},
                    {"upper", number_or_null(d.pooled.q975)},
                    {"psrf", number_or_null(d.psrf)},
                    {"ess", number_or_null(d.ess)}});
  }
  j["posterior"] = std::move(post);

  const PlugIn& pi = criteria.plug_in;
  Json columns = Json::array();
  for (int l = 0; l < spec.k; ++l) columns.push_back("factor" + std::to_string(l + 1));
  columns.push_back("total");
  // Posterior means of the per-draw decompositions.
  Matrix dv = Matrix::Zero(spec.p, spec.k + 1), dv_mod = dv;
  const auto draws = sample.all_draws();
  for (const ChainState* d : draws) {
    dv += variance_decomposition(d->beta, d->sigma, spec.tau, false);
    dv_mod += variance_decomposition(d->beta, d->sigma, spec.tau, true);
  }
  if (!draws.empty()) {
    dv /= static_cast<double>(draws.size());
    dv_mod /= static_cast<double>(draws.size());
  }
  j["variance_decomposition"] = {
      {"columns", columns}, {"dv", matrix_rows(dv)}, {"dv_mod", matrix_rows(dv_mod)}};
  j["plug_in"] = {{"beta", matrix_rows(pi.beta)},
                  {"common", matrix_rows(pi.common)},
                  {"sigma", vector_json(pi.sigma)}};

  Json chains = Json::array();
  for (std::size_t c = 0; c < sample.chains.size(); ++c) {
    const auto& ch = sample.chains[c];
    chains.push_back({{"chain", c + 1},
                      {"seed", ch.seed},
                      {"stream", ch.stream},
                      {"draws", ch.draws.size()},
                      {"acceptance", vector_json(ch.acceptance)},
                      {"proposal_sd", vector_json(ch.proposal_sd)},
                      {"tuned", ch.tuned},
                      {"nonfinite_rejections", ch.nonfinite_rejections},
                      {"rotation_acceptance", ch.rotation_acceptance}});
  }
  j["chains"] = std::move(chains);

  j["diagnostics"] = {{"max_psrf", number_or_null(diagnostics.max_psrf)},
                      {"min_ess", number_or_null(diagnostics.min_ess)},
                      {"note", diagnostics.latent_note}};

  const auto& ic = criteria.info;
  const auto& pr = criteria.predictive;
  j["criteria"] = {{"l", number_or_null(ic.l)},
                   {"ICOMP", number_or_null(ic.icomp)},
                   {"AIC", number_or_null(ic.aic)},
                   {"BIC", number_or_null(ic.bic)},
                   {"BIC*", number_or_null(ic.bic_star)},
                   {"RPS", number_or_null(pr.rps)},
                   {"MAE", number_or_null(pr.mae)},
                   {"MSE", number_or_null(pr.mse)},
                   {"p_k", ic.p_k},
                   {"n_tilde", ic.n_tilde},
                   {"replicates", pr.replicates},
                   {"warnings", ic.warnings}};
  return j;
}

Json qcor_summary(const std::vector<QCorRow>& rows, const McmcConfig& config) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["family"] = kFamily;
  j["bands"] = {{"weak_below", kWeakBand}, {"strong_above", kStrongBand}};
  j["mcmc"] = mcmc_to_json(config);
  Json out = Json::array();
  for (const auto& r : rows) {
    const auto& e = r.estimate;
    out.push_back({{"pair", {r.a, r.b}},
                   {"tau", e.tau},
                   {"mean", number_or_null(e.mean)},
                   {"lower", number_or_null(e.lower)},
                   {"upper", number_or_null(e.upper)},
                   {"band", correlation_band(e.mean)},
                   {"negative_fraction", e.negative_fraction},
                   {"draws", e.draws.size()}});
  }
  j["results"] = std::move(out);
  return j;
}

void check_schema(const Json& summary, const std::string& source) {
  if (!summary.is_object() || !summary.contains("schema_version") ||
      !summary["schema_version"].is_string()) {
    fail(ErrorKind::data, source + ": missing schema_version");
  }
  const std::string v = summary["schema_version"].get<std::string>();
  const int major = std::atoi(v.substr(0, v.find('.')).c_str());
  if (major != kSchemaMajor) {
    fail(ErrorKind::data, source + ": unsupported schema version " + v);
  }
}

CompareTable compare_summaries(const std::vector<Json>& summaries,
                               const std::vector<std::string>& labels) {
  if (summaries.size() < 2) {
    fail(ErrorKind::config, "compare needs at least two summaries");
  }
  if (labels.size() != summaries.size()) {
    fail(ErrorKind::config, "compare: one label per summary required");
  }
  static const std::vector<std::string> cols{"ICOMP", "AIC", "BIC", "BIC*",
                                             "RPS",   "MAE", "MSE"};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> vals;
  std::vector<std::string> families;
  for (std::size_t r = 0; r < summaries.size(); ++r) {
    const Json& s = summaries[r];
    check_schema(s, labels[r]);
    if (!s.contains("criteria") || !s.contains("spec")) {
      fail(ErrorKind::data, labels[r] + ": not a fit summary");
    }
    families.push_back(s.value("family", std::string("unknown")));
    std::vector<double> row;
    for (const auto& c : cols) {
      const Json& v = s["criteria"].contains(c) ? s["criteria"][c] : Json();
      row.push_back(v.is_number() ? v.get<double>() : nan);
    }
    vals.push_back(std::move(row));
  }
  std::vector<double> best(cols.size(), std::numeric_limits<double>::infinity());
  for (const auto& row : vals)
    for (std::size_t c = 0; c < cols.size(); ++c)
      if (std::isfinite(row[c])) best[c] = std::min(best[c], row[c]);

  CompareTable out;
  out.csv = "fit,family,tau,k";
  for (const auto& c : cols) out.csv += "," + c;
  out.csv += ",minima\n";
  for (std::size_t r = 0; r < vals.size(); ++r) {
    const Json& spec = summaries[r]["spec"];
    out.csv += labels[r] + "," + families[r] + "," +
               format_double(spec.value("tau", nan)) + "," +
               std::to_string(spec.value("k", 0));
    std::string minima;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out.csv += ",";
      if (std::isfinite(vals[r][c])) {
        out.csv += format_double(vals[r][c]);
        if (vals[r][c] == best[c]) minima += (minima.empty() ? "" : ";") + cols[c];
      }
    }
    out.csv += "," + minima + "\n";
  }
  out.warning = cross_family_warning(families);
  return out;
}

Json diagnostics_summary(
    const std::vector<std::pair<std::string, std::vector<Trace>>>& traces) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  Json params = Json::array();
  double max_psrf = 0.0;
  double min_ess = std::numeric_limits<double>::infinity();
  for (const auto& [name, chains] : traces) {
    const double r = psrf(chains);
    const double e = ess(chains);
    Trace pooled;
    for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
    const auto s = summarize(pooled);
    max_psrf = std::max(max_psrf, r);
    min_ess = std::min(min_ess, e);
    params.push_back({{"param", name},
                      {"chains", chains.size()},
                      {"draws", pooled.size()},
                      {"psrf", number_or_null(r)},
                      {"ess", number_or_null(e)},
                      {"mean", s.mean},
                      {"sd", s.sd},
                      {"lower", s.q025},
                      {"upper", s.q975}});
  }
  j["params"] = std::move(params);
  j["max_psrf"] = number_or_null(max_psrf);
  j["min_ess"] = number_or_null(min_ess);
  return j;
}

}  // namespace qfm
