#include "qfm/model.hpp"

#include <cmath>

#include "qfm/error.hpp"

namespace qfm {

int max_factors(int p) {
  int best = 0;
  for (int k = 1; k <= p; ++k) {
    const long long twice =
        static_cast<long long>(p) * (p + 1) - 2LL * p * (k + 1) +
        static_cast<long long>(k) * (k - 1);
    if (twice >= 0) best = k;
  }
  return best;
}

double uniqueness_inflation(double tau) {
  require_quantile(tau, "uniqueness_inflation");
  const double v = tau * (1.0 - tau);
  return (1.0 - 2.0 * tau + 2.0 * tau * tau) / (v * v);
}

ErrorLaw error_law(const Vector& sigma, double tau) {
  const auto [a, b2] = tau_constants(tau);
  return {sigma * a, sigma.array().square() * b2};
}

MomentPair implied_moments(const Matrix& beta, const Vector& sigma,
                           double tau) {
  const auto law = error_law(sigma, tau);
  Matrix conditional = law.m * law.m.transpose();
  conditional.diagonal() += law.delta;
  Matrix marginal = beta * beta.transpose() + conditional;
  return {std::move(marginal), std::move(conditional)};
}

Matrix variance_decomposition(const Matrix& beta, const Vector& sigma,
                              double tau, bool modified) {
  const auto p = beta.rows();
  const auto k = beta.cols();
  const double inflation = modified ? 1.0 : uniqueness_inflation(tau);
  Matrix out(p, k + 1);
  for (Eigen::Index l = 0; l < p; ++l) {
    const double common = beta.row(l).squaredNorm();
    const double denom = common + sigma[l] * sigma[l] * inflation;
    if (!(denom > 0.0)) {
      fail(ErrorKind::degenerate,
           "variance_decomposition: zero variance for variable " +
               std::to_string(l + 1));
    }
    for (Eigen::Index j = 0; j < k; ++j) {
      out(l, j) = 100.0 * beta(l, j) * beta(l, j) / denom;
    }
    out(l, k) = 100.0 * common / denom;
  }
  return out;
}

std::vector<std::string> validate_spec(const ModelSpec& spec) {
  std::vector<std::string> v;
  if (spec.n < 1) v.push_back("n must be at least 1");
  if (spec.p < 1) v.push_back("p must be at least 1");
  if (!(spec.tau > 0.0 && spec.tau < 1.0)) {
    v.push_back("tau must lie in the open interval (0,1)");
  }
  if (spec.k < 1) {
    v.push_back("k must be at least 1");
  } else if (spec.p >= 1) {
    const int bound = max_factors(spec.p);
    if (spec.k > bound) {
      v.push_back("k exceeds bound " + std::to_string(bound));
    }
  }
  if (!(spec.priors.c0 > 0.0)) v.push_back("prior C0 must be positive");
  if (!(spec.priors.nu > 0.0)) v.push_back("prior nu must be positive");
  if (!(spec.priors.s2 > 0.0)) v.push_back("prior s2 must be positive");
  return v;
}

void require_valid(const ModelSpec& spec) {
  const auto v = validate_spec(spec);
  if (v.empty()) return;
  std::string msg = "invalid model spec:";
  for (const auto& s : v) msg += " " + s + ";";
  fail(ErrorKind::config, msg);
}

bool loadings_identified(const Matrix& beta) {
  const auto k = beta.cols();
  if (beta.rows() < k) return false;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (!(beta(j, j) > 0.0)) return false;
    for (Eigen::Index l = j + 1; l < k; ++l) {
      if (beta(j, l) != 0.0) return false;
    }
  }
  return true;
}

}  // namespace qfm
