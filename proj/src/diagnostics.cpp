#include "qfm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qfm/error.hpp"

namespace qfm {

namespace {

double mean_of(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s / n;
}

double var_of(const double* x, std::size_t n, double m) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += (x[i] - m) * (x[i] - m);
  return s / (n - 1);
}

double sorted_quantile(const std::vector<double>& v, double q) {
  const double pos = q * (v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

}  // namespace

double psrf(const std::vector<Trace>& chains) {
  if (chains.empty()) fail(ErrorKind::data, "psrf: no chains");
  std::size_t len = chains[0].size();
  for (const auto& c : chains) len = std::min(len, c.size());
  if (len < 8) fail(ErrorKind::data, "psrf: need at least 8 draws per chain");
  const std::size_t half = len / 2;

  std::vector<double> means, vars;
  for (const auto& c : chains) {
    // First and last halves; the middle draw of an odd chain is dropped.
    for (const double* seg : {c.data(), c.data() + (len - half)}) {
      const double m = mean_of(seg, half);
      means.push_back(m);
      vars.push_back(var_of(seg, half, m));
    }
  }
  const double m_count = static_cast<double>(means.size());
  double within = 0.0;
  for (double v : vars) within += v;
  within /= m_count;
  double grand = 0.0;
  for (double m : means) grand += m;
  grand /= m_count;
  double between = 0.0;
  for (double m : means) between += (m - grand) * (m - grand);
  between *= static_cast<double>(half) / (m_count - 1.0);

  if (!(within > 0.0)) return std::numeric_limits<double>::infinity();
  const double nd = static_cast<double>(half);
  const double pooled = (nd - 1.0) / nd * within + between / nd;
  return std::sqrt(pooled / within);
}

double ess(const Trace& x) {
  const std::size_t n = x.size();
  if (n < 10) fail(ErrorKind::data, "ess: need at least 10 draws");
  const double m = mean_of(x.data(), n);
  double c0 = 0.0;
  for (double v : x) c0 += (v - m) * (v - m);
  c0 /= n;
  if (!(c0 > 0.0)) return 0.0;

  auto rho = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - m) * (x[i + lag] - m);
    return s / n / c0;
  };

  // Geyer: sum pairs Gamma_k = rho(2k) + rho(2k+1) while positive, keeping
  // the sequence monotone.
  double sum_pairs = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double gamma = rho(2 * k) + rho(2 * k + 1);
    if (!(gamma > 0.0)) break;
    gamma = std::min(gamma, prev);
    sum_pairs += gamma;
    prev = gamma;
  }
  // tau = -1 + 2 * sum_k Gamma_k  (rho(0) = 1 is inside Gamma_0).
  const double tau_int = -1.0 + 2.0 * sum_pairs;
  if (!(tau_int > 0.0)) return static_cast<double>(n);
  return std::min(static_cast<double>(n), n / tau_int);
}

double ess(const std::vector<Trace>& chains) {
  double total = 0.0;
  for (const auto& c : chains) total += ess(c);
  return total;
}

TraceSummary summarize(const Trace& draws) {
  if (draws.empty()) fail(ErrorKind::data, "summarize: no draws");
  TraceSummary s;
  s.mean = mean_of(draws.data(), draws.size());
  s.sd = draws.size() > 1 ? std::sqrt(var_of(draws.data(), draws.size(), s.mean))
                          : 0.0;
  std::vector<double> sorted = draws;
  std::sort(sorted.begin(), sorted.end());
  s.q025 = sorted_quantile(sorted, 0.025);
  s.q50 = sorted_quantile(sorted, 0.5);
  s.q975 = sorted_quantile(sorted, 0.975);
  return s;
}

DiagnosticsReport diagnose(const PosteriorSample& sample) {
  DiagnosticsReport out;
  out.latent_note =
      "factor scores f and weights w are high-dimensional and not diagnosed "
      "individually";
  const int p = sample.spec.p;
  const int k = sample.spec.k;
  const double tau = sample.spec.tau;

  auto add = [&](std::string name, std::vector<Trace> chains) {
    ParamDiagnostics d;
    d.name = std::move(name);
    d.psrf = psrf(chains);
    d.ess = ess(chains);
    Trace pooled;
    for (const auto& c : chains) {
      d.per_chain.push_back(summarize(c));
      pooled.insert(pooled.end(), c.begin(), c.end());
    }
    d.pooled = summarize(pooled);
    out.params.push_back(std::move(d));
  };

  for (int j = 0; j < p; ++j) {
    for (int l = 0; l < std::min(j + 1, k); ++l) {
      add("beta[" + std::to_string(j + 1) + "," + std::to_string(l + 1) + "]",
          extract(sample, [&](const ChainState& s) { return s.beta(j, l); }));
    }
  }
  for (int j = 0; j < p; ++j) {
    add("sigma[" + std::to_string(j + 1) + "]",
        extract(sample, [&](const ChainState& s) { return s.sigma[j]; }));
  }
  for (int j = 0; j < p; ++j) {
    add("dv[" + std::to_string(j + 1) + "]",
        extract(sample, [&](const ChainState& s) {
          const double common = s.beta.row(j).squaredNorm();
          return 100.0 * common /
                 (common + s.sigma[j] * s.sigma[j] * uniqueness_inflation(tau));
        }));
  }

  out.max_psrf = 0.0;
  out.min_ess = std::numeric_limits<double>::infinity();
  for (const auto& d : out.params) {
    out.max_psrf = std::max(out.max_psrf, d.psrf);
    out.min_ess = std::min(out.min_ess, d.ess);
  }
  return out;
}

}  // namespace qfm
