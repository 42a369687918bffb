#pragma once

#include <string>
#include <vector>

#include "qfm/dists.hpp"

namespace qfm {

/// Loading prior variance C0, scale prior degrees of freedom nu, and the
/// scale prior mode s2 (sigma^2 ~ IG(nu/2, nu*s2/2)).
struct PriorHyper {
  double c0 = 100.0;
  double nu = 0.02;
  double s2 = 1.0;
};

struct ModelSpec {
  int n = 1;
  int p = 1;
  int k = 1;
  double tau = 0.5;
  PriorHyper priors;
};

/// One state of the Markov chain. `sigma` holds scales, not variances.
struct ChainState {
  Matrix beta;   // p x k, block lower triangular with positive diagonal
  Matrix f;      // n x k latent factors, one row per observation
  Vector sigma;  // p
  Vector w;      // n mixture weights
};

struct MomentPair {
  Matrix marginal;
  Matrix conditional;
};

/// Largest k with p(p+1)/2 - p(k+1) + k(k-1)/2 >= 0.
int max_factors(int p);

/// Multiplier on sigma_l^2 in the marginal variance,
/// (1-2tau+2tau^2)/(tau^2(1-tau)^2).
double uniqueness_inflation(double tau);

/// Marginal and factor-conditional covariance implied by (beta, sigma, tau).
MomentPair implied_moments(const Matrix& beta, const Vector& sigma,
                           double tau);

/// Per-variable percentage of variance explained, one column per factor and
/// a final column with the total. With `modified` the uniqueness is not
/// inflated by the quantile-dependent factor.
Matrix variance_decomposition(const Matrix& beta, const Vector& sigma,
                              double tau, bool modified);

/// Returns every violated constraint; empty means the spec is valid.
std::vector<std::string> validate_spec(const ModelSpec& spec);

/// Throws an Error of kind `config` listing all violations.
void require_valid(const ModelSpec& spec);

/// Checks the block lower triangular pattern and positive diagonal.
bool loadings_identified(const Matrix& beta);

/// Location vector m (m_l = sigma_l a_tau) and diagonal of Delta
/// (delta_ll = sigma_l^2 b_tau^2).
struct ErrorLaw {
  Vector m;
  Vector delta;
};
ErrorLaw error_law(const Vector& sigma, double tau);

}  // namespace qfm
