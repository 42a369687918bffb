#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qfm/sampler.hpp"

namespace qfm {

/// Posterior means used as the evaluation point of the likelihood. The
/// common part is the mean of beta beta', which rotations and sign flips of
/// the factors leave alone; the mean of beta itself does not.
struct PlugIn {
  Matrix beta;
  Matrix common;  // E[beta beta']
  Vector sigma;
  Vector w;
};

PlugIn plug_in_means(const PosteriorSample& sample);

/// -2 sum_i log N_p(y_i; m w_i, common + w_i Delta).
double loglik_common(const Matrix& y, const Matrix& common, const Vector& sigma,
                     const Vector& w, double tau);
/// -2 sum_i log N_p(y_i; m w_i, beta beta' + w_i Delta).
double loglik_at(const Matrix& y, const Matrix& beta, const Vector& sigma,
                 const Vector& w, double tau);

/// loglik_at evaluated at the posterior means.
double marginal_loglik(const PosteriorSample& sample, const Matrix& y);

/// p(k+1) - k(k-1)/2.
int free_parameters(int p, int k);
/// n - (2p+11)/6 - 2k/3.
double effective_n(int n, int p, int k);
/// 2(k+1)[(p/2) log(tr(Delta)/p) - log|Delta|/2] for diagonal Delta.
double icomp_penalty(const Vector& delta_diag, int k);

struct InfoCriteria {
  double l = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  double bic_star = 0.0;  // NaN when the effective n is not positive
  double icomp = 0.0;
  int p_k = 0;
  double n_tilde = 0.0;
  std::vector<std::string> warnings;
};

InfoCriteria information_criteria(double l, const ModelSpec& spec,
                                  const Vector& delta_diag);

/// Double-expectation CRPS estimate from two independent replicate sets
/// (each T entries of n x p), averaged over all cells.
double crps_estimate(const std::vector<Matrix>& rep_a,
                     const std::vector<Matrix>& rep_b, const Matrix& y);

struct ErrorScores {
  double mae = 0.0;
  double mse = 0.0;
};

ErrorScores mae_mse(const Matrix& yhat, const Matrix& y);

struct PredictiveScores {
  double rps = 0.0;
  double mae = 0.0;
  double mse = 0.0;
  int replicates = 0;
};

/// Posterior-predictive scores. Replicates keep each draw's factor scores
/// and draw fresh mixture weights and noise. replicates = 0 uses every
/// stored draw once; larger counts cycle through the draws.
PredictiveScores predictive_scores(const PosteriorSample& sample,
                                   const Matrix& y, RngStream& rng,
                                   int replicates = 0);

struct CriteriaReport {
  InfoCriteria info;
  PredictiveScores predictive;
  PlugIn plug_in;
};

CriteriaReport evaluate_criteria(const PosteriorSample& sample,
                                 const Matrix& y, RngStream& rng,
                                 int replicates = 0);

extern const char* const kCrossFamilyWarning;

/// Warning text when the tabulated fits come from more than one family.
std::optional<std::string> cross_family_warning(
    const std::vector<std::string>& families);

}  // namespace qfm
