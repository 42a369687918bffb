#include "qfm/criteria.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "qfm/error.hpp"

namespace qfm {

const char* const kCrossFamilyWarning =
    "criteria tabulated across different model families; these comparison "
    "criteria are meant for models in the same distribution class";

PlugIn plug_in_means(const PosteriorSample& sample) {
  const auto draws = sample.all_draws();
  if (draws.empty()) fail(ErrorKind::data, "plug_in_means: empty sample");
  PlugIn out;
  out.beta = Matrix::Zero(draws[0]->beta.rows(), draws[0]->beta.cols());
  out.common = Matrix::Zero(out.beta.rows(), out.beta.rows());
  out.sigma = Vector::Zero(draws[0]->sigma.size());
  out.w = Vector::Zero(draws[0]->w.size());
  for (const ChainState* d : draws) {
    out.beta += d->beta;
    out.common.noalias() += d->beta * d->beta.transpose();
    out.sigma += d->sigma;
    out.w += d->w;
  }
  const double inv = 1.0 / draws.size();
  out.beta *= inv;
  out.common *= inv;
  out.sigma *= inv;
  out.w *= inv;
  return out;
}

double loglik_at(const Matrix& y, const Matrix& beta, const Vector& sigma,
                 const Vector& w, double tau) {
  if (beta.rows() != y.cols()) fail(ErrorKind::data, "loglik_at: dimension mismatch");
  return loglik_common(y, beta * beta.transpose(), sigma, w, tau);
}

double loglik_common(const Matrix& y, const Matrix& common, const Vector& sigma,
                     const Vector& w, double tau) {
  const auto n = y.rows();
  const auto p = y.cols();
  if (common.rows() != p || common.cols() != p || sigma.size() != p || w.size() != n) {
    fail(ErrorKind::data, "loglik_at: dimension mismatch");
  }
  const ErrorLaw law = error_law(sigma, tau);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double l = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Matrix lambda = common;
    lambda.diagonal() += w[i] * law.delta;
    Eigen::LLT<Matrix> llt(lambda);
    if (llt.info() != Eigen::Success) {
      fail(ErrorKind::numerical, "loglik_at: singular covariance at row " +
                                     std::to_string(i + 1));
    }
    const Vector r = y.row(i).transpose() - law.m * w[i];
    const Vector z = llt.matrixL().solve(r);
    const double logdet =
        2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    l += p * log2pi + logdet + z.squaredNorm();
  }
  return l;
}

double marginal_loglik(const PosteriorSample& sample, const Matrix& y) {
  const PlugIn pi = plug_in_means(sample);
  return loglik_common(y, pi.common, pi.sigma, pi.w, sample.spec.tau);
}

int free_parameters(int p, int k) { return p * (k + 1) - k * (k - 1) / 2; }

double effective_n(int n, int p, int k) {
  return n - (2.0 * p + 11.0) / 6.0 - 2.0 * k / 3.0;
}

double icomp_penalty(const Vector& delta_diag, int k) {
  const double p = static_cast<double>(delta_diag.size());
  if (!(delta_diag.array() > 0.0).all()) {
    fail(ErrorKind::numerical, "icomp_penalty: non-positive uniqueness");
  }
  const double log_mean = std::log(delta_diag.sum() / p);
  const double log_det = delta_diag.array().log().sum();
  return 2.0 * (k + 1) * (0.5 * p * log_mean - 0.5 * log_det);
}

InfoCriteria information_criteria(double l, const ModelSpec& spec,
                                  const Vector& delta_diag) {
  InfoCriteria out;
  out.l = l;
  out.p_k = free_parameters(spec.p, spec.k);
  out.n_tilde = effective_n(spec.n, spec.p, spec.k);
  out.aic = l + 2.0 * out.p_k;
  out.bic = l + std::log(static_cast<double>(spec.n)) * out.p_k;
  if (out.n_tilde > 0.0) {
    out.bic_star = l + std::log(out.n_tilde) * out.p_k;
  } else {
    out.bic_star = std::nan("");
    out.warnings.push_back("BIC* undefined: effective sample size " +
                           std::to_string(out.n_tilde) + " is not positive");
  }
  out.icomp = l + icomp_penalty(delta_diag, spec.k);
  return out;
}

double crps_estimate(const std::vector<Matrix>& rep_a,
                     const std::vector<Matrix>& rep_b, const Matrix& y) {
  if (rep_a.empty() || rep_a.size() != rep_b.size()) {
    fail(ErrorKind::data, "crps_estimate: need two equal, non-empty replicate sets");
  }
  double fit = 0.0, spread = 0.0;
  for (std::size_t t = 0; t < rep_a.size(); ++t) {
    fit += (rep_a[t] - y).cwiseAbs().sum();
    spread += (rep_a[t] - rep_b[t]).cwiseAbs().sum();
  }
  const double cells = static_cast<double>(y.size()) * rep_a.size();
  return (fit - 0.5 * spread) / cells;
}

ErrorScores mae_mse(const Matrix& yhat, const Matrix& y) {
  if (yhat.rows() != y.rows() || yhat.cols() != y.cols()) {
    fail(ErrorKind::data, "mae_mse: dimension mismatch");
  }
  const Matrix d = yhat - y;
  return {d.cwiseAbs().mean(), d.squaredNorm() / d.size()};
}

PredictiveScores predictive_scores(const PosteriorSample& sample,
                                   const Matrix& y, RngStream& rng,
                                   int replicates) {
  const auto draws = sample.all_draws();
  if (draws.empty()) fail(ErrorKind::data, "predictive_scores: empty sample");
  if (replicates < 0 || replicates == 1) {
    fail(ErrorKind::config, "predictive_scores: need at least 2 replicates");
  }
  const int t_count =
      replicates == 0 ? static_cast<int>(draws.size()) : replicates;
  if (t_count < 2) fail(ErrorKind::config, "predictive_scores: need at least 2 draws");
  const auto n = y.rows();
  const auto p = y.cols();
  if (draws[0]->f.rows() != n || draws[0]->beta.rows() != p) {
    fail(ErrorKind::data, "predictive_scores: data do not match the fit");
  }

  Matrix mean_sum = Matrix::Zero(n, p);
  double fit = 0.0, spread = 0.0;
  Vector a(p), b(p);
  for (int t = 0; t < t_count; ++t) {
    const ChainState& d = *draws[t % draws.size()];
    const ErrorLaw law = error_law(d.sigma, sample.spec.tau);
    const Vector sd = law.delta.cwiseSqrt();
    const Matrix mu = d.f * d.beta.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double wa = rng.exponential();
      const double wb = rng.exponential();
      for (Eigen::Index j = 0; j < p; ++j) {
        a[j] = mu(i, j) + law.m[j] * wa + std::sqrt(wa) * sd[j] * rng.normal();
      }
      for (Eigen::Index j = 0; j < p; ++j) {
        b[j] = mu(i, j) + law.m[j] * wb + std::sqrt(wb) * sd[j] * rng.normal();
      }
      const Vector yi = y.row(i).transpose();
      fit += (a - yi).cwiseAbs().sum();
      spread += (a - b).cwiseAbs().sum();
      mean_sum.row(i) += 0.5 * (a + b).transpose();
    }
  }
  PredictiveScores out;
  out.replicates = t_count;
  const double cells = static_cast<double>(n * p) * t_count;
  out.rps = (fit - 0.5 * spread) / cells;
  const ErrorScores e = mae_mse(mean_sum / t_count, y);
  out.mae = e.mae;
  out.mse = e.mse;
  return out;
}

CriteriaReport evaluate_criteria(const PosteriorSample& sample,
                                 const Matrix& y, RngStream& rng,
                                 int replicates) {
  CriteriaReport out;
  out.plug_in = plug_in_means(sample);
  const double l = loglik_common(y, out.plug_in.common, out.plug_in.sigma,
                                 out.plug_in.w, sample.spec.tau);
  const Vector delta = error_law(out.plug_in.sigma, sample.spec.tau).delta;
  out.info = information_criteria(l, sample.spec, delta);
  out.predictive = predictive_scores(sample, y, rng, replicates);
  return out;
}

std::optional<std::string> cross_family_warning(
    const std::vector<std::string>& families) {
  const std::set<std::string> distinct(families.begin(), families.end());
  if (distinct.size() > 1) return std::string(kCrossFamilyWarning);
  return std::nullopt;
}

}  // namespace qfm
