#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qfm/model.hpp"

namespace qfm {

struct QuantRegConfig {
  int iterations = 4000;
  int burn_in = 1000;
  int thin = 1;
  PriorHyper priors;
};

/// Posterior draws of y = intercept + slope * x + AL(0, sigma, tau) error.
struct QuantRegPosterior {
  double tau = 0.5;
  std::vector<double> intercept;
  std::vector<double> slope;
  std::vector<double> sigma;
  double acceptance = 1.0;  // sigma MH acceptance (1 on the Gibbs path)
};

QuantRegPosterior fit_quantreg(const Vector& y, const Vector& x, double tau,
                               const QuantRegConfig& config, RngStream& rng);

struct QCorEstimate {
  double tau = 0.5;
  std::vector<double> draws;
  double mean = 0.0;
  double lower = 0.0;  // 2.5% posterior quantile
  double upper = 0.0;  // 97.5% posterior quantile
  /// Share of draw pairs whose slope product was negative (set to zero).
  double negative_fraction = 0.0;
};

/// Pairs the t-th draws of the slope of y on x and of x on y. The two
/// regressions run on streams 2*stream and 2*stream+1 of `seed`.
QCorEstimate quantile_correlation(const Vector& x, const Vector& y, double tau,
                                  const QuantRegConfig& config,
                                  std::uint64_t seed, std::uint64_t stream = 0);

/// Correlation from two slope draws; zero when their product is negative.
double paired_correlation(double slope_yx, double slope_xy);

inline constexpr double kWeakBand = 0.3;
inline constexpr double kStrongBand = 0.7;

/// "weak" (|rho| < 0.3), "moderate" or "strong" (|rho| > 0.7).
std::string correlation_band(double rho);

/// Independent estimates per grid point; grid point g uses streams derived
/// from stream_offset + g.
std::vector<QCorEstimate> qcor_curve(const Vector& x, const Vector& y,
                                     const std::vector<double>& taus,
                                     const QuantRegConfig& config,
                                     std::uint64_t seed,
                                     std::uint64_t stream_offset = 0);

}  // namespace qfm
