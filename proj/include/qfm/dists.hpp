#pragma once

#include <Eigen/Dense>

#include "qfm/rng.hpp"

namespace qfm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Univariate asymmetric Laplace with location, scale and quantile level.
struct ALUnivParams {
  double location = 0.0;
  double scale = 1.0;
  double tau = 0.5;
};

/// Multivariate asymmetric Laplace AL_p(m, Psi): m w + sqrt(w) Psi^(1/2) z.
struct ALMultParams {
  Vector location;
  Matrix scatter;
};

/// Generalized inverse Gaussian with density proportional to
/// x^(order-1) exp(-(rate*x + inv_rate/x)/2) on x > 0.
struct GIGParams {
  double order = 0.0;
  double rate = 1.0;
  double inv_rate = 1.0;
};

/// Mixture coefficients of the AL location-scale representation.
struct TauConstants {
  double a;   // (1-2tau)/(tau(1-tau))
  double b2;  // 2/(tau(1-tau))
};

/// Quantile check loss u*(tau - I(u<0)).
double check_loss(double u, double tau);

double al_univ_logpdf(double x, const ALUnivParams& params);

TauConstants tau_constants(double tau);

double sample_al_univ(const ALUnivParams& params, RngStream& rng);

Vector sample_al_mult(const ALMultParams& params, RngStream& rng);

double sample_gig(const GIGParams& params, RngStream& rng);

/// Log-density of the GIG kernel (unnormalized).
double gig_log_kernel(double x, const GIGParams& params);

/// N(mean, variance) conditioned on the positive half-line.
double sample_truncnorm_pos(double mean, double variance, RngStream& rng);

/// Standard normal lower tail, Phi(x).
double normal_cdf(double x);
double normal_quantile(double p);

/// Draws from N(Q^-1 r, Q^-1) given the precision Q and the linear term r.
Vector sample_normal_canonical(const Matrix& precision, const Vector& linear,
                               RngStream& rng);

}  // namespace qfm
