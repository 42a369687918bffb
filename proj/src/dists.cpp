#include "qfm/dists.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/special_functions/erf.hpp>

#include "qfm/error.hpp"

namespace qfm {

double check_loss(double u, double tau) {
  require_quantile(tau, "check_loss");
  return u >= 0.0 ? u * tau : u * (tau - 1.0);
}

double al_univ_logpdf(double x, const ALUnivParams& params) {
  require_quantile(params.tau, "al_univ_logpdf");
  if (!(params.scale > 0.0)) {
    fail(ErrorKind::domain, "al_univ_logpdf: scale must be positive");
  }
  const double tau = params.tau;
  return std::log(tau * (1.0 - tau) / params.scale) -
         check_loss(x - params.location, tau) / params.scale;
}

TauConstants tau_constants(double tau) {
  require_quantile(tau, "tau_constants");
  const double v = tau * (1.0 - tau);
  return {(1.0 - 2.0 * tau) / v, 2.0 / v};
}

double sample_al_univ(const ALUnivParams& params, RngStream& rng) {
  if (!(params.scale > 0.0)) {
    fail(ErrorKind::domain, "sample_al_univ: scale must be positive");
  }
  const auto [a, b2] = tau_constants(params.tau);
  const double w = rng.exponential();
  return params.location +
         params.scale * (a * w + std::sqrt(b2 * w) * rng.normal());
}

Vector sample_al_mult(const ALMultParams& params, RngStream& rng) {
  const auto p = params.location.size();
  const Matrix& d = params.scatter;
  if (d.rows() != p || d.cols() != p) {
    fail(ErrorKind::domain, "sample_al_mult: scatter has wrong shape");
  }
  bool diagonal = true;
  for (Eigen::Index l = 0; l < p; ++l) {
    if (!(d(l, l) >= 0.0)) {
      fail(ErrorKind::domain, "sample_al_mult: scatter is not PSD");
    }
    for (Eigen::Index h = 0; h < l; ++h) {
      if (d(l, h) != d(h, l)) {
        fail(ErrorKind::domain, "sample_al_mult: scatter is not symmetric");
      }
      diagonal = diagonal && d(l, h) == 0.0;
    }
  }
  const double w = rng.exponential();
  const double sw = std::sqrt(w);
  Vector x(p);
  if (diagonal) {
    for (Eigen::Index l = 0; l < p; ++l) {
      x[l] = params.location[l] * w + sw * std::sqrt(d(l, l)) * rng.normal();
    }
    return x;
  }
  Eigen::LLT<Matrix> llt(d);
  if (llt.info() != Eigen::Success) {
    fail(ErrorKind::domain, "sample_al_mult: scatter is not positive definite");
  }
  for (Eigen::Index l = 0; l < p; ++l) x[l] = rng.normal();
  const Vector z = llt.matrixL() * x;
  return params.location * w + sw * z;
}

// --- GIG -------------------------------------------------------------------
//
// Hoermann & Leydold (2014) generator for the standardized two-parameter
// GIG(lambda, omega) with density ~ x^(lambda-1) exp(-omega/2 (x + 1/x)),
// lambda >= 0. The full law is recovered with x * sqrt(b/a) and the
// reciprocal for negative orders.

namespace {

double gig_mode(double lambda, double omega) {
  if (lambda >= 1.0) {
    return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) +
            (lambda - 1.0)) /
           omega;
  }
  return omega /
         (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) +
          (1.0 - lambda));
}

double gig_rou_noshift(double lambda, double omega, RngStream& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  const double ym =
      ((lambda + 1.0) +
       std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) /
      omega;
  const double um =
      std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);
  for (;;) {
    const double u = um * rng.uniform();
    const double v = rng.uniform();
    const double x = u / v;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

double gig_rou_shift(double lambda, double omega, RngStream& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);

  // Roots of the cubic bounding the shifted region.
  const double a = -(2.0 * (lambda + 1.0) / omega + xm);
  const double b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
  const double c = xm;
  const double p = b - a * a / 3.0;
  const double q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
  const double fi = std::acos(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)));
  const double fak = 2.0 * std::sqrt(-p / 3.0);
  const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
  const double y2 =
      fak * std::cos(fi / 3.0 + 4.0 / 3.0 * std::numbers::pi) - a / 3.0;
  const double uplus =
      (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
  const double uminus =
      (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);

  for (;;) {
    const double u = uminus + rng.uniform() * (uplus - uminus);
    const double v = rng.uniform();
    const double x = u / v + xm;
    if (x > 0.0 && std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) {
      return x;
    }
  }
}

// Non-T-concave region: 0 <= lambda < 1 and small omega.
double gig_small_omega(double lambda, double omega, RngStream& rng) {
  const double mode = gig_mode(lambda, omega);
  const double x0 = omega / (1.0 - lambda);
  const double k0 =
      std::exp((lambda - 1.0) * std::log(mode) - 0.5 * omega * (mode + 1.0 / mode));
  double area[3];
  double k1;
  double k2;
  area[0] = k0 * x0;
  if (x0 >= 2.0 / omega) {
    k1 = 0.0;
    area[1] = 0.0;
    k2 = std::pow(x0, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-omega * x0 / 2.0) / omega;
  } else {
    k1 = std::exp(-omega);
    area[1] = lambda == 0.0
                  ? k1 * std::log(2.0 / (omega * omega))
                  : k1 / lambda *
                        (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda));
    k2 = std::pow(2.0 / omega, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-1.0) / omega;
  }
  const double total = area[0] + area[1] + area[2];

  for (;;) {
    double v = total * rng.uniform();
    double x;
    double hx;
    if (v <= area[0]) {
      x = x0 * v / area[0];
      hx = k0;
    } else if ((v -= area[0]) <= area[1]) {
      if (lambda == 0.0) {
        x = omega * std::exp(std::exp(omega) * v);
        hx = k1 / x;
      } else {
        x = std::pow(std::pow(x0, lambda) + lambda / k1 * v, 1.0 / lambda);
        hx = k1 * std::pow(x, lambda - 1.0);
      }
    } else {
      v -= area[1];
      const double lo = x0 > 2.0 / omega ? x0 : 2.0 / omega;
      x = -2.0 / omega *
          std::log(std::exp(-omega / 2.0 * lo) - omega / (2.0 * k2) * v);
      hx = k2 * std::exp(-omega / 2.0 * x);
    }
    const double u = rng.uniform() * hx;
    if (std::log(u) <=
        (lambda - 1.0) * std::log(x) - omega / 2.0 * (x + 1.0 / x)) {
      return x;
    }
  }
}

}  // namespace

double gig_log_kernel(double x, const GIGParams& params) {
  return (params.order - 1.0) * std::log(x) -
         0.5 * (params.rate * x + params.inv_rate / x);
}

double sample_gig(const GIGParams& params, RngStream& rng) {
  const double lambda = params.order;
  const double a = params.rate;
  const double b = params.inv_rate;
  if (!(a > 0.0) || !(b >= 0.0) || !std::isfinite(lambda) ||
      !std::isfinite(a) || !std::isfinite(b)) {
    fail(ErrorKind::domain, "sample_gig: need rate > 0 and inv_rate >= 0");
  }
  if (b == 0.0) {
    if (!(lambda > 0.0)) {
      fail(ErrorKind::domain,
           "sample_gig: inv_rate = 0 requires a positive order");
    }
    return rng.gamma(lambda, a / 2.0);
  }

  const double abs_lambda = std::abs(lambda);
  const double alpha = std::sqrt(b / a);
  const double omega = std::sqrt(a * b);

  double x;
  if (abs_lambda > 2.0 || omega > 3.0) {
    x = gig_rou_shift(abs_lambda, omega, rng);
  } else if (abs_lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2) {
    x = gig_rou_noshift(abs_lambda, omega, rng);
  } else {
    x = gig_small_omega(abs_lambda, omega, rng);
  }
  return lambda < 0.0 ? alpha / x : alpha * x;
}

// --- Normal helpers -------------------------------------------------------

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    fail(ErrorKind::domain, "normal_quantile: p must lie in (0,1)");
  }
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double sample_truncnorm_pos(double mean, double variance, RngStream& rng) {
  if (!(variance > 0.0) || !std::isfinite(mean)) {
    fail(ErrorKind::domain, "sample_truncnorm_pos: variance must be positive");
  }
  const double sd = std::sqrt(variance);
  // Standardized lower bound of the support.
  const double lower = -mean / sd;
  double z;
  if (lower < 2.0) {
    // Inverse CDF on the upper tail P(Z > lower) keeps precision when the
    // retained mass is small.
    const double upper_mass = normal_cdf(-lower);
    for (;;) {
      z = -normal_quantile(rng.uniform() * upper_mass);
      if (z > lower) break;
    }
  } else {
    // Robert (1995) exponential proposal with optimal rate.
    const double rate = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
    for (;;) {
      z = lower + rng.exponential() / rate;
      const double d = z - rate;
      if (rng.uniform() <= std::exp(-0.5 * d * d)) break;
    }
  }
  const double x = mean + sd * z;
  // Rounding can land exactly on zero for extreme means.
  return x > 0.0 ? x : std::nextafter(0.0, 1.0);
}

Vector sample_normal_canonical(const Matrix& precision, const Vector& linear,
                               RngStream& rng) {
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) {
    fail(ErrorKind::numerical,
         "sample_normal_canonical: precision matrix is not positive definite");
  }
  const auto d = linear.size();
  Vector z(d);
  for (Eigen::Index i = 0; i < d; ++i) z[i] = rng.normal();
  // mean = Q^-1 r; draw = mean + L^-T z.
  Vector mean = llt.solve(linear);
  Vector dev = llt.matrixU().solve(z);
  return mean + dev;
}

}  // namespace qfm
