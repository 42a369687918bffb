#include "qfm/synthetic.hpp"

#include <cmath>

#include "qfm/error.hpp"

namespace qfm {

namespace {

Matrix cholesky_lower(const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    fail(ErrorKind::numerical, "scale matrix is not positive definite");
  }
  return llt.matrixL();
}

Vector std_normal(Eigen::Index d, RngStream& rng) {
  Vector z(d);
  for (Eigen::Index i = 0; i < d; ++i) z[i] = rng.normal();
  return z;
}

void require_rows(int n, const char* where) {
  if (n < 2) fail(ErrorKind::domain, std::string(where) + ": need n >= 2");
}

}  // namespace

Matrix case1_covariance() {
  Matrix psi = Matrix::Identity(5, 5);
  for (int l = 2; l < 5; ++l) {
    for (int h = 2; h < 5; ++h) {
      if (l != h) psi(l, h) = 0.95;
    }
  }
  return psi;
}

Matrix case2_scale() {
  Matrix s = Matrix::Identity(6, 6);
  for (int b = 0; b < 3; ++b) {
    s(2 * b, 2 * b + 1) = s(2 * b + 1, 2 * b) = 0.95;
  }
  return s;
}

Matrix gen_case1(int n, std::uint64_t seed, const Case1Params& params) {
  require_rows(n, "gen_case1");
  if (!(params.contamination_var >= 0.0)) {
    fail(ErrorKind::domain, "gen_case1: contamination variance must be >= 0");
  }
  RngStream rng(seed, 0);
  const Matrix chol = cholesky_lower(case1_covariance());
  const double e_sd = std::sqrt(params.contamination_var);
  Matrix y(n, 5);
  for (int i = 0; i < n; ++i) {
    y.row(i) = (chol * std_normal(5, rng)).transpose();
    const double e = e_sd * rng.normal();
    // Both indicators use the pre-shock values.
    if (y(i, 0) < params.threshold && y(i, 1) < params.threshold) {
      y(i, 0) += e;
      y(i, 1) += e;
    }
  }
  return y;
}

Matrix gen_case2(int n, std::uint64_t seed, double dof) {
  require_rows(n, "gen_case2");
  if (!(dof > 0.0)) fail(ErrorKind::domain, "gen_case2: dof must be positive");
  RngStream rng(seed, 0);
  const Matrix chol = cholesky_lower(case2_scale());
  Matrix y(n, 6);
  for (int i = 0; i < n; ++i) {
    const Vector z = chol * std_normal(6, rng);
    const double g = rng.gamma(0.5 * dof, 0.5);  // chi-square(dof)
    y.row(i) = (z / std::sqrt(g / dof)).transpose();
  }
  return y;
}

QfmSimulation gen_qfm(const ModelSpec& spec, const Matrix& beta,
                      const Vector& sigma, std::uint64_t seed) {
  require_valid(spec);
  if (beta.rows() != spec.p || beta.cols() != spec.k ||
      sigma.size() != spec.p) {
    fail(ErrorKind::data, "gen_qfm: truth dimensions do not match the spec");
  }
  if ((sigma.array() <= 0.0).any()) {
    fail(ErrorKind::domain, "gen_qfm: scales must be positive");
  }
  RngStream rng(seed, 0);
  const auto law = error_law(sigma, spec.tau);
  const Vector sd = law.delta.cwiseSqrt();

  QfmSimulation out;
  out.truth.beta = beta;
  out.truth.sigma = sigma;
  out.truth.f.resize(spec.n, spec.k);
  out.truth.w.resize(spec.n);
  out.y.resize(spec.n, spec.p);
  for (int i = 0; i < spec.n; ++i) {
    const Vector f = std_normal(spec.k, rng);
    const double w = rng.exponential();
    const double sw = std::sqrt(w);
    out.truth.f.row(i) = f.transpose();
    out.truth.w[i] = w;
    const Vector mean = beta * f + law.m * w;
    for (int j = 0; j < spec.p; ++j) {
      out.y(i, j) = mean[j] + sw * sd[j] * rng.normal();
    }
  }
  return out;
}

}  // namespace qfm
