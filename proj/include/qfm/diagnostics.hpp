#pragma once

#include <string>
#include <vector>

#include "qfm/sampler.hpp"

namespace qfm {

using Trace = std::vector<double>;

/// Split-chain potential scale reduction. Chains are truncated to the
/// shortest; each needs at least 8 draws. Zero within-chain variance gives
/// +infinity.
double psrf(const std::vector<Trace>& chains);

/// Autocorrelation-sum effective sample size with Geyer's initial positive
/// sequence truncation, capped at the number of draws. A constant sequence
/// gives 0. Needs at least 10 draws.
double ess(const Trace& draws);

/// Sum of per-chain effective sample sizes.
double ess(const std::vector<Trace>& chains);

struct TraceSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
};

TraceSummary summarize(const Trace& draws);

struct ParamDiagnostics {
  std::string name;
  double psrf = 0.0;
  double ess = 0.0;
  TraceSummary pooled;
  std::vector<TraceSummary> per_chain;
};

struct DiagnosticsReport {
  std::vector<ParamDiagnostics> params;
  /// Factor scores and mixture weights are not diagnosed one by one.
  std::string latent_note;
  double max_psrf = 0.0;
  double min_ess = 0.0;
};

/// Per-chain traces of a scalar function of the state.
template <class F>
std::vector<Trace> extract(const PosteriorSample& sample, F&& f) {
  std::vector<Trace> out;
  for (const auto& c : sample.chains) {
    Trace t;
    t.reserve(c.draws.size());
    for (const auto& d : c.draws) t.push_back(f(d));
    out.push_back(std::move(t));
  }
  return out;
}

/// Diagnoses free loadings beta[j,l], scales sigma[j] and the variance
/// shares dv[j] (1-based names).
DiagnosticsReport diagnose(const PosteriorSample& sample);

}  // namespace qfm
