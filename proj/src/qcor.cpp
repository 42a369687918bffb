#include "qfm/qcor.hpp"

#include <algorithm>
#include <cmath>

#include "qfm/error.hpp"
#include "qfm/sampler.hpp"

namespace qfm {

namespace {

double quantile_of_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return std::nan("");
  const double pos = q * (v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

}  // namespace

QuantRegPosterior fit_quantreg(const Vector& y, const Vector& x, double tau,
                               const QuantRegConfig& config, RngStream& rng) {
  require_quantile(tau, "fit_quantreg");
  const Eigen::Index n = y.size();
  if (x.size() != n) fail(ErrorKind::data, "fit_quantreg: x and y differ in length");
  if (n < 3) fail(ErrorKind::data, "fit_quantreg: need at least 3 observations");
  if (x.maxCoeff() == x.minCoeff()) {
    fail(ErrorKind::degenerate, "fit_quantreg: regressor is constant");
  }
  if (!(config.iterations > config.burn_in && config.burn_in >= 0 &&
        config.thin >= 1)) {
    fail(ErrorKind::config, "fit_quantreg: invalid iteration settings");
  }

  ModelSpec spec;
  spec.n = static_cast<int>(n);
  spec.p = 1;
  spec.k = 1;
  spec.tau = tau;
  spec.priors = config.priors;
  const auto [a, b2] = tau_constants(tau);
  const bool gibbs = tau == 0.5;

  Matrix design(n, 2);
  design.col(0).setOnes();
  design.col(1) = x;

  // Least-squares start.
  Vector coef = design.colPivHouseholderQr().solve(y);
  const Vector r0 = y - design * coef;
  double sigma = std::max(1e-6, std::sqrt(r0.squaredNorm() / n /
                                          uniqueness_inflation(tau)));
  Vector w = Vector::Ones(n);

  // Reuse the multivariate sigma kernel through a p=1 state.
  ChainState s;
  s.beta = Matrix::Ones(1, 1);
  s.f.resize(n, 1);
  s.sigma = Vector::Constant(1, sigma);
  s.w = w;
  Matrix ymat = y;

  QuantRegPosterior out;
  out.tau = tau;
  McmcConfig tune_cfg;
  Vector sd = Vector::Constant(1, 0.5);
  double window = 0.0;
  int fill = 0, round = 0;
  long accepted = 0;

  for (int t = 1; t <= config.iterations; ++t) {
    const Vector resid = y - design * coef;
    const double delta = sigma * sigma * b2;
    const double loc = a * a / b2;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double q = resid[i] * resid[i] / delta;
      w[i] = sample_gig({0.5, 2.0 + loc, q}, rng);
    }

    const Vector u = (w * delta).cwiseInverse();
    Matrix precision = design.transpose() * u.asDiagonal() * design;
    precision.diagonal().array() += 1.0 / config.priors.c0;
    const Vector linear =
        design.transpose() * u.cwiseProduct(y - sigma * a * w);
    coef = sample_normal_canonical(precision, linear, rng);

    // f carries the fitted values so that y - beta*f is the residual.
    s.f.col(0) = design * coef;
    s.w = w;
    s.sigma[0] = sigma;
    if (gibbs) {
      update_sigma_gibbs(s, ymat, spec, rng);
    } else {
      const auto acc = update_sigma_mh(s, ymat, spec, sd, rng);
      if (t <= config.burn_in) {
        window += acc[0];
        if (++fill == tune_cfg.adapt_window) {
          sd = tune_proposals(Vector::Constant(1, window / fill), sd, round++,
                              tune_cfg);
          window = 0.0;
          fill = 0;
        }
      } else {
        accepted += acc[0];
      }
    }
    sigma = s.sigma[0];

    if (t > config.burn_in && (t - config.burn_in) % config.thin == 0) {
      out.intercept.push_back(coef[0]);
      out.slope.push_back(coef[1]);
      out.sigma.push_back(sigma);
    }
  }
  out.acceptance =
      gibbs ? 1.0
            : static_cast<double>(accepted) / (config.iterations - config.burn_in);
  return out;
}

double paired_correlation(double slope_yx, double slope_xy) {
  const double prod = slope_yx * slope_xy;
  if (prod < 0.0) return 0.0;
  const double mag = std::sqrt(prod);
  return slope_yx < 0.0 ? -mag : mag;
}

std::string correlation_band(double rho) {
  const double r = std::abs(rho);
  if (r < kWeakBand) return "weak";
  if (r > kStrongBand) return "strong";
  return "moderate";
}

QCorEstimate quantile_correlation(const Vector& x, const Vector& y, double tau,
                                  const QuantRegConfig& config,
                                  std::uint64_t seed, std::uint64_t stream) {
  RngStream rng_yx(seed, 2 * stream);
  RngStream rng_xy(seed, 2 * stream + 1);
  const auto yx = fit_quantreg(y, x, tau, config, rng_yx);
  const auto xy = fit_quantreg(x, y, tau, config, rng_xy);

  QCorEstimate out;
  out.tau = tau;
  const std::size_t t_count = std::min(yx.slope.size(), xy.slope.size());
  out.draws.reserve(t_count);
  std::size_t negative = 0;
  for (std::size_t t = 0; t < t_count; ++t) {
    if (yx.slope[t] * xy.slope[t] < 0.0) ++negative;
    out.draws.push_back(paired_correlation(yx.slope[t], xy.slope[t]));
  }
  double sum = 0.0;
  for (double r : out.draws) sum += r;
  out.mean = t_count ? sum / t_count : std::nan("");
  out.negative_fraction = t_count ? double(negative) / t_count : 0.0;
  std::vector<double> sorted = out.draws;
  std::sort(sorted.begin(), sorted.end());
  out.lower = quantile_of_sorted(sorted, 0.025);
  out.upper = quantile_of_sorted(sorted, 0.975);
  return out;
}

std::vector<QCorEstimate> qcor_curve(const Vector& x, const Vector& y,
                                     const std::vector<double>& taus,
                                     const QuantRegConfig& config,
                                     std::uint64_t seed,
                                     std::uint64_t stream_offset) {
  for (double tau : taus) require_quantile(tau, "qcor_curve");
  std::vector<QCorEstimate> out;
  out.reserve(taus.size());
  for (std::size_t g = 0; g < taus.size(); ++g) {
    out.push_back(
        quantile_correlation(x, y, taus[g], config, seed, stream_offset + g));
  }
  return out;
}

}  // namespace qfm
