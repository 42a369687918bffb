#pragma once

#include <cstdint>

#include "qfm/model.hpp"

namespace qfm {

/// Five Gaussian variables (3-5 strongly coupled) with a shared N(0, e_var)
/// shock added to variables 1 and 2 when both fall below `threshold`.
struct Case1Params {
  double threshold = -0.4;
  double contamination_var = 9.0;
};

Matrix gen_case1(int n, std::uint64_t seed, const Case1Params& params = {});

/// Six-variate Student-t with pairs (1,2), (3,4), (5,6) coupled at 0.95.
Matrix gen_case2(int n, std::uint64_t seed, double dof = 2.5);

/// Scale matrix of the case-1 Gaussian draw.
Matrix case1_covariance();
/// Scale matrix of the case-2 Student-t draw.
Matrix case2_scale();

struct QfmSimulation {
  Matrix y;
  ChainState truth;  // beta and sigma as given; f and w as simulated
};

/// Simulates from the hierarchical model with the supplied beta and sigma.
QfmSimulation gen_qfm(const ModelSpec& spec, const Matrix& beta,
                      const Vector& sigma, std::uint64_t seed);

}  // namespace qfm
