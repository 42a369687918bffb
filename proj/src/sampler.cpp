#include "qfm/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <numbers>
#include <thread>

namespace qfm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_normal_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(variance) + d * d / variance);
}

void check_dims(const ChainState& s, const Matrix& y, const ModelSpec& spec) {
  if (y.rows() != spec.n || y.cols() != spec.p) {
    fail(ErrorKind::data, "data is " + std::to_string(y.rows()) + "x" +
                              std::to_string(y.cols()) + ", spec expects " +
                              std::to_string(spec.n) + "x" +
                              std::to_string(spec.p));
  }
  if (s.beta.rows() != spec.p || s.beta.cols() != spec.k ||
      s.f.rows() != spec.n || s.f.cols() != spec.k ||
      s.sigma.size() != spec.p || s.w.size() != spec.n) {
    fail(ErrorKind::data, "chain state dimensions do not match the spec");
  }
}

}  // namespace

const char* to_string(SigmaUpdate u) {
  switch (u) {
    case SigmaUpdate::automatic:
      return "auto";
    case SigmaUpdate::gibbs:
      return "gibbs";
    case SigmaUpdate::mh:
      return "mh";
  }
  return "?";
}

McmcConfig McmcConfig::paper_protocol() {
  McmcConfig c;
  c.iterations = 160000;
  c.burn_in = 10000;
  c.thin = 50;
  c.chains = 2;
  return c;
}

std::vector<std::string> validate_config(const McmcConfig& c) {
  std::vector<std::string> v;
  if (c.iterations < 1) v.push_back("iterations must be positive");
  if (c.burn_in < 0) v.push_back("burn_in must be nonnegative");
  if (c.burn_in >= c.iterations) v.push_back("burn_in must be < iterations");
  if (c.thin < 1) v.push_back("thin must be at least 1");
  if (c.chains < 1) v.push_back("chains must be at least 1");
  if (c.adapt_window < 1) v.push_back("adapt_window must be positive");
  if (!(c.rotation_step >= 0.0)) v.push_back("rotation_step must be >= 0");
  if (!(c.target_low > 0.0 && c.target_low < c.target_high &&
        c.target_high < 1.0)) {
    v.push_back("target acceptance band must satisfy 0 < low < high < 1");
  }
  for (Eigen::Index j = 0; j < c.proposal_sd.size(); ++j) {
    if (!(c.proposal_sd[j] > 0.0)) {
      v.push_back("proposal_sd entries must be positive");
      break;
    }
  }
  return v;
}

std::size_t PosteriorSample::draw_count() const {
  std::size_t n = 0;
  for (const auto& c : chains) n += c.draws.size();
  return n;
}

std::vector<const ChainState*> PosteriorSample::all_draws() const {
  std::vector<const ChainState*> out;
  out.reserve(draw_count());
  for (const auto& c : chains) {
    for (const auto& d : c.draws) out.push_back(&d);
  }
  return out;
}

// --- Full conditionals ----------------------------------------------------

GIGParams w_conditional(const ChainState& s, const Matrix& y,
                        const ModelSpec& spec, Eigen::Index i) {
  const auto law = error_law(s.sigma, spec.tau);
  const Vector resid = y.row(i).transpose() - s.beta * s.f.row(i).transpose();
  const double quad = (resid.array().square() / law.delta.array()).sum();
  const double loc = (law.m.array().square() / law.delta.array()).sum();
  return {1.0 - 0.5 * spec.p, 2.0 + loc, quad};
}

CanonicalNormal f_conditional(const ChainState& s, const Matrix& y,
                              const ModelSpec& spec, Eigen::Index i) {
  const auto law = error_law(s.sigma, spec.tau);
  const double w = s.w[i];
  const Vector inv_var = (law.delta * w).cwiseInverse();
  const Matrix scaled = inv_var.asDiagonal() * s.beta;
  CanonicalNormal out;
  out.precision = s.beta.transpose() * scaled;
  out.precision.diagonal().array() += 1.0;
  out.linear = scaled.transpose() * (y.row(i).transpose() - law.m * w);
  return out;
}

CanonicalNormal beta_row_conditional(const ChainState& s, const Matrix& y,
                                     const ModelSpec& spec, Eigen::Index j) {
  const auto [a, b2] = tau_constants(spec.tau);
  const double sigma = s.sigma[j];
  const double m = sigma * a;
  const double delta = sigma * sigma * b2;
  const Eigen::Index d = std::min<Eigen::Index>(j + 1, spec.k);
  const auto factors = s.f.leftCols(d);
  const Vector u = (s.w * delta).cwiseInverse();

  CanonicalNormal out;
  out.precision = factors.transpose() * u.asDiagonal() * factors;
  out.precision.diagonal().array() += 1.0 / spec.priors.c0;
  const Vector centered = y.col(j) - m * s.w;
  out.linear = factors.transpose() * u.cwiseProduct(centered);
  return out;
}

SigmaStats sigma_stats(const ChainState& s, const Matrix& y, Eigen::Index j) {
  const Vector e = y.col(j) - s.f * s.beta.row(j).transpose();
  return {(e.array().square() / s.w.array()).sum(), e.sum(),
          static_cast<int>(y.rows())};
}

double sigma_precision_log_kernel(double precision, const SigmaStats& st,
                                  const ModelSpec& spec) {
  if (!(precision > 0.0)) return -std::numeric_limits<double>::infinity();
  const double tau = spec.tau;
  const double nu = spec.priors.nu;
  const double rate =
      0.5 * nu * spec.priors.s2 + 0.25 * tau * (1.0 - tau) * st.sum_sq_over_w;
  return (0.5 * (st.n + nu) - 1.0) * std::log(precision) - precision * rate +
         std::sqrt(precision) * 0.5 * (1.0 - 2.0 * tau) * st.sum_resid;
}

double log_joint(const ChainState& s, const Matrix& y, const ModelSpec& spec) {
  check_dims(s, y, spec);
  const auto law = error_law(s.sigma, spec.tau);
  double total = 0.0;
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const double w = s.w[i];
    const Vector mean = s.beta * s.f.row(i).transpose() + law.m * w;
    for (Eigen::Index j = 0; j < spec.p; ++j) {
      total += log_normal_pdf(y(i, j), mean[j], w * law.delta[j]);
    }
    total += -w;  // Exp(1)
    total += -0.5 * (spec.k * kLog2Pi + s.f.row(i).squaredNorm());
  }
  const double c0 = spec.priors.c0;
  for (Eigen::Index j = 0; j < spec.p; ++j) {
    const Eigen::Index d = std::min<Eigen::Index>(j + 1, spec.k);
    for (Eigen::Index l = 0; l < d; ++l) {
      total += log_normal_pdf(s.beta(j, l), 0.0, c0);
    }
  }
  const double shape = 0.5 * spec.priors.nu;
  const double rate = 0.5 * spec.priors.nu * spec.priors.s2;
  for (Eigen::Index j = 0; j < spec.p; ++j) {
    const double prec = 1.0 / (s.sigma[j] * s.sigma[j]);
    total += shape * std::log(rate) - std::lgamma(shape) +
             (shape - 1.0) * std::log(prec) - rate * prec;
  }
  return total;
}

// --- Updates --------------------------------------------------------------

void update_w(ChainState& s, const Matrix& y, const ModelSpec& spec,
              RngStream& rng) {
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const GIGParams g = w_conditional(s, y, spec, i);
    if (g.inv_rate == 0.0 && g.order <= 0.0) {
      fail(ErrorKind::degenerate,
           "update_w: observation " + std::to_string(i + 1) +
               " is fitted exactly; the weight conditional is improper");
    }
    s.w[i] = sample_gig(g, rng);
  }
}

void update_f(ChainState& s, const Matrix& y, const ModelSpec& spec,
              RngStream& rng) {
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const CanonicalNormal law = f_conditional(s, y, spec, i);
    s.f.row(i) = sample_normal_canonical(law.precision, law.linear, rng);
  }
}

Vector draw_loadings_row(const CanonicalNormal& law, bool constrained,
                         RngStream& rng) {
  if (!constrained) {
    return sample_normal_canonical(law.precision, law.linear, rng);
  }
  const Eigen::Index d = law.linear.size();
  Eigen::LLT<Matrix> llt(law.precision);
  if (llt.info() != Eigen::Success) {
    fail(ErrorKind::numerical, "loadings precision is not positive definite");
  }
  // Marginal of the constrained (last) coordinate, then the rest given it.
  const Vector mean = llt.solve(law.linear);
  Vector e_last = Vector::Zero(d);
  e_last[d - 1] = 1.0;
  const double var_last = llt.solve(e_last)[d - 1];
  const double diag = sample_truncnorm_pos(mean[d - 1], var_last, rng);

  Vector row(d);
  row[d - 1] = diag;
  if (d > 1) {
    const Matrix q_rest = law.precision.topLeftCorner(d - 1, d - 1);
    const Vector lin_rest = law.linear.head(d - 1) -
                            law.precision.topRightCorner(d - 1, 1) * diag;
    row.head(d - 1) = sample_normal_canonical(q_rest, lin_rest, rng);
  }
  return row;
}

void update_beta_row(ChainState& s, const Matrix& y, const ModelSpec& spec,
                     Eigen::Index j, RngStream& rng) {
  const CanonicalNormal law = beta_row_conditional(s, y, spec, j);
  const bool constrained = j < spec.k;
  const Vector row = draw_loadings_row(law, constrained, rng);
  s.beta.row(j).head(row.size()) = row.transpose();
}

std::vector<bool> update_sigma_mh(ChainState& s, const Matrix& y,
                                  const ModelSpec& spec,
                                  const Vector& proposal_sd, RngStream& rng,
                                  long* nonfinite) {
  std::vector<bool> accepted(spec.p, false);
  for (Eigen::Index j = 0; j < spec.p; ++j) {
    const SigmaStats st = sigma_stats(s, y, j);
    const double prec = 1.0 / (s.sigma[j] * s.sigma[j]);
    const double log_prec = std::log(prec);
    const double log_prop = log_prec + proposal_sd[j] * rng.normal();
    const double prop = std::exp(log_prop);
    // Random walk on log precision: the Jacobian adds log(prop/prec).
    const double log_ratio = sigma_precision_log_kernel(prop, st, spec) -
                             sigma_precision_log_kernel(prec, st, spec) +
                             (log_prop - log_prec);
    const double u = rng.uniform();
    if (!std::isfinite(log_ratio) || !std::isfinite(prop)) {
      if (nonfinite) ++*nonfinite;
      continue;
    }
    if (std::log(u) < log_ratio) {
      s.sigma[j] = 1.0 / std::sqrt(prop);
      accepted[j] = true;
    }
  }
  return accepted;
}

void update_sigma_gibbs(ChainState& s, const Matrix& y, const ModelSpec& spec,
                        RngStream& rng) {
  if (spec.tau != 0.5) {
    fail(ErrorKind::config,
         "update_sigma_gibbs: closed form exists only at tau = 0.5");
  }
  const double nu = spec.priors.nu;
  for (Eigen::Index j = 0; j < spec.p; ++j) {
    const SigmaStats st = sigma_stats(s, y, j);
    const double shape = 0.5 * (st.n + nu);
    const double rate = 0.5 * nu * spec.priors.s2 +
                        0.25 * spec.tau * (1.0 - spec.tau) * st.sum_sq_over_w;
    const double prec = rng.gamma(shape, rate);
    s.sigma[j] = 1.0 / std::sqrt(prec);
  }
}

Vector tune_proposals(const Vector& window_acceptance, const Vector& sd,
                      int round, const McmcConfig& config) {
  const double target = 0.5 * (config.target_low + config.target_high);
  const double step = 3.0 / std::sqrt(1.0 + round);
  Vector out = sd;
  for (Eigen::Index j = 0; j < sd.size(); ++j) {
    out[j] = sd[j] * std::exp(step * (window_acceptance[j] - target));
  }
  return out;
}

SigmaUpdate resolve_sigma_update(SigmaUpdate requested, double tau) {
  if (requested == SigmaUpdate::automatic) {
    return tau == 0.5 ? SigmaUpdate::gibbs : SigmaUpdate::mh;
  }
  if (requested == SigmaUpdate::gibbs && tau != 0.5) {
    fail(ErrorKind::config, "gibbs sigma update requires tau = 0.5");
  }
  return requested;
}

ChainState initial_state(const ModelSpec& spec, int chain, RngStream& rng) {
  const double scale = 1.0 + 0.5 * chain;
  ChainState s;
  s.beta = Matrix::Zero(spec.p, spec.k);
  for (Eigen::Index j = 0; j < spec.p; ++j) {
    const Eigen::Index d = std::min<Eigen::Index>(j + 1, spec.k);
    for (Eigen::Index l = 0; l < d; ++l) {
      s.beta(j, l) = (j == l) ? sample_truncnorm_pos(0.0, scale * scale, rng)
                              : scale * rng.normal();
    }
  }
  s.f.resize(spec.n, spec.k);
  for (Eigen::Index i = 0; i < s.f.size(); ++i) s.f.data()[i] = rng.normal();
  s.sigma = Vector::Constant(spec.p, std::sqrt(spec.priors.s2));
  s.w = Vector::Ones(spec.n);
  return s;
}

namespace {

// Scale 1.4826 * MAD, or the standard deviation when the MAD vanishes.
Vector robust_scales(const Matrix& y) {
  Vector out(y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    std::vector<double> v(y.col(j).data(), y.col(j).data() + y.rows());
    auto median = [](std::vector<double> x) {
      const auto mid = x.begin() + x.size() / 2;
      std::nth_element(x.begin(), mid, x.end());
      if (x.size() % 2) return *mid;
      return 0.5 * (*mid + *std::max_element(x.begin(), mid));
    };
    const double med = median(v);
    for (auto& x : v) x = std::abs(x - med);
    double sc = 1.4826 * median(v);
    if (!(sc > 0.0)) {
      const double m = y.col(j).mean();
      sc = std::sqrt((y.col(j).array() - m).square().sum() /
                     std::max<double>(1.0, y.rows() - 1.0));
    }
    out[j] = sc > 0.0 ? sc : 1.0;
  }
  return out;
}

// Correlation of normal scores Phi^-1(rank / (n + 1)).
Matrix normal_scores_correlation(const Matrix& y) {
  const Eigen::Index n = y.rows();
  Matrix z(n, y.cols());
  std::vector<Eigen::Index> order(n);
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return y(a, j) < y(b, j); });
    for (Eigen::Index r = 0; r < n; ++r) {
      z(order[r], j) = normal_quantile((r + 1.0) / (n + 1.0));
    }
  }
  const Matrix c = z.rowwise() - z.colwise().mean();
  Matrix cov = c.transpose() * c;
  const Vector d = cov.diagonal().cwiseSqrt();
  for (Eigen::Index a = 0; a < cov.rows(); ++a)
    for (Eigen::Index b = 0; b < cov.cols(); ++b)
      cov(a, b) = d[a] > 0 && d[b] > 0 ? cov(a, b) / (d[a] * d[b]) : (a == b);
  return cov;
}

}  // namespace

Matrix principal_loadings(const Matrix& y, int k) {
  const Eigen::Index p = y.cols();
  // Rank-based so a few extreme rows do not pick the leading directions.
  const Vector scale = robust_scales(y);
  const Matrix cov = scale.asDiagonal() * normal_scores_correlation(y) *
                     scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  // Eigenvalues ascend; take the k largest.
  Matrix loadings(p, k);
  for (int l = 0; l < k; ++l) {
    const Eigen::Index idx = p - 1 - l;
    loadings.col(l) =
        eig.eigenvectors().col(idx) * std::sqrt(std::max(0.0, eig.eigenvalues()[idx]));
  }
  // Rotate so the top k x k block is lower triangular: A^T = QR gives
  // loadings * Q with top block R^T.
  const Matrix top_t = loadings.topRows(k).transpose();
  Eigen::HouseholderQR<Matrix> qr(top_t);
  const Matrix q = qr.householderQ() * Matrix::Identity(k, k);
  Matrix rotated = loadings * q;
  for (int l = 0; l < k; ++l) {
    if (rotated(l, l) < 0.0) rotated.col(l) *= -1.0;
    for (int h = l + 1; h < k; ++h) rotated(l, h) = 0.0;
  }
  return rotated;
}

ChainState data_initial_state(const Matrix& y, const ModelSpec& spec,
                              int chain, RngStream& rng) {
  ChainState s;
  s.beta = principal_loadings(y, spec.k);
  const double jitter = 0.25 * chain;
  for (Eigen::Index j = 0; j < spec.p; ++j) {
    const Eigen::Index d = std::min<Eigen::Index>(j + 1, spec.k);
    for (Eigen::Index l = 0; l < d; ++l) {
      s.beta(j, l) += jitter * rng.normal();
    }
    if (j < spec.k) {
      s.beta(j, j) = std::max(std::abs(s.beta(j, j)), 1e-3);
    }
  }
  s.f.resize(spec.n, spec.k);
  for (Eigen::Index i = 0; i < s.f.size(); ++i) s.f.data()[i] = rng.normal();

  // Residual variance after the common part, deflated by the quantile
  // inflation so the implied marginal variance matches the data.
  const Vector var = robust_scales(y).array().square();
  const double inflation = uniqueness_inflation(spec.tau);
  s.sigma.resize(spec.p);
  for (Eigen::Index j = 0; j < spec.p; ++j) {
    const double resid =
        std::max(var[j] - s.beta.row(j).squaredNorm(), 0.1 * var[j]);
    const double v = resid > 0.0 ? resid : spec.priors.s2;
    s.sigma[j] = std::sqrt(v / inflation) * (1.0 + 0.25 * chain);
  }
  s.w = Vector::Ones(spec.n);
  return s;
}

double rotation_log_ratio(const ChainState& state, const Matrix& y,
                          const ModelSpec& spec, int a, int b, double theta,
                          ChainState* proposal) {
  if (!(0 <= a && a < b && b < spec.k)) {
    fail(ErrorKind::domain, "rotation_log_ratio: need 0 <= a < b < k");
  }
  const double c = std::cos(theta), sn = std::sin(theta);
  const Eigen::Index n = y.rows();
  const Eigen::Index p = y.cols();
  if (b < p && -sn * state.beta(b, a) + c * state.beta(b, b) <= 0.0) {
    return -std::numeric_limits<double>::infinity();
  }
  const Vector fa = c * state.f.col(a) + sn * state.f.col(b);
  const Vector fb = -sn * state.f.col(a) + c * state.f.col(b);

  const ErrorLaw law = error_law(state.sigma, spec.tau);
  double log_ratio = 0.0;
  const Eigen::Index last = std::min<Eigen::Index>(b, p);
  for (Eigen::Index j = a; j < last; ++j) {
    const double bja = state.beta(j, a);
    if (bja == 0.0) continue;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r_old = y(i, j) - law.m[j] * state.w[i] -
                           state.beta.row(j).dot(state.f.row(i));
      const double r_new = r_old - bja * (fa[i] - state.f(i, a));
      acc += (r_new * r_new - r_old * r_old) / state.w[i];
    }
    log_ratio -= 0.5 * acc / law.delta[j];
  }

  if (proposal) {
    *proposal = state;
    proposal->f.col(a) = fa;
    proposal->f.col(b) = fb;
    for (Eigen::Index j = b; j < p; ++j) {
      const double ba = state.beta(j, a), bb = state.beta(j, b);
      proposal->beta(j, a) = c * ba + sn * bb;
      proposal->beta(j, b) = -sn * ba + c * bb;
    }
  }
  return log_ratio;
}

namespace {

bool try_rotation(ChainState& state, const Matrix& y, const ModelSpec& spec,
                  int a, int b, double theta, RngStream& rng) {
  ChainState proposal;
  const double lr = rotation_log_ratio(state, y, spec, a, b, theta, &proposal);
  if (!std::isfinite(lr)) return false;
  if (std::log(rng.uniform()) < lr) {
    state = std::move(proposal);
    return true;
  }
  return false;
}

}  // namespace

bool rotate_factor_pair(ChainState& state, const Matrix& y,
                        const ModelSpec& spec, int a, int b, double step,
                        RngStream& rng) {
  // A local move, then an independent angle that can jump across the ridge.
  bool moved = try_rotation(state, y, spec, a, b, step * rng.normal(), rng);
  const double wide = std::numbers::pi * (2.0 * rng.uniform() - 1.0);
  moved = try_rotation(state, y, spec, a, b, wide, rng) || moved;
  return moved;
}

double flip_log_ratio(const ChainState& state, const Matrix& y,
                      const ModelSpec& spec, int b, ChainState* proposal) {
  const Eigen::Index n = y.rows();
  const double bbb = state.beta(b, b);
  const ErrorLaw law = error_law(state.sigma, spec.tau);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r_old = y(i, b) - law.m[b] * state.w[i] -
                         state.beta.row(b).dot(state.f.row(i));
    const double r_new = r_old + 2.0 * bbb * state.f(i, b);
    acc += (r_new * r_new - r_old * r_old) / state.w[i];
  }
  if (proposal) {
    *proposal = state;
    proposal->f.col(b) *= -1.0;
    for (Eigen::Index j = b + 1; j < spec.p; ++j) proposal->beta(j, b) *= -1.0;
  }
  return -0.5 * acc / law.delta[b];
}

bool flip_factor_sign(ChainState& state, const Matrix& y, const ModelSpec& spec,
                      int b, RngStream& rng) {
  ChainState proposal;
  const double lr = flip_log_ratio(state, y, spec, b, &proposal);
  if (std::log(rng.uniform()) < lr) {
    state = std::move(proposal);
    return true;
  }
  return false;
}

ChainResult run_chain(const Matrix& y, const ModelSpec& spec,
                      const McmcConfig& config, int chain) {
  require_valid(spec);
  if (const auto v = validate_config(config); !v.empty()) {
    fail(ErrorKind::config, "invalid MCMC config: " + v.front());
  }
  const auto start = std::chrono::steady_clock::now();
  const SigmaUpdate mode = resolve_sigma_update(config.sigma_update, spec.tau);

  ChainResult out;
  out.seed = config.seed;
  out.stream = static_cast<std::uint64_t>(chain);
  RngStream rng(config.seed, out.stream);
  if (y.rows() != spec.n || y.cols() != spec.p) {
    fail(ErrorKind::data, "data dimensions do not match the spec");
  }
  ChainState s = data_initial_state(y, spec, chain, rng);
  check_dims(s, y, spec);

  const Eigen::Index p = spec.p;
  Vector sd = config.proposal_sd.size() == p ? config.proposal_sd
                                             : Vector::Constant(p, 0.5);
  Vector window_accepts = Vector::Zero(p);
  Vector recent_accepts = Vector::Zero(p);
  int recent_count = 0;
  Vector kept_accepts = Vector::Zero(p);
  int window_fill = 0;
  int round = 0;
  const int recent_span = 4 * config.adapt_window;
  long rotations_kept = 0;

  for (int t = 1; t <= config.iterations; ++t) {
    try {
      update_w(s, y, spec, rng);
      update_f(s, y, spec, rng);
      for (Eigen::Index j = 0; j < p; ++j) update_beta_row(s, y, spec, j, rng);
      if (config.rotation_step > 0.0) {
        for (int a = 0; a < spec.k; ++a) {
          for (int b = a + 1; b < spec.k; ++b) {
            const bool moved =
                rotate_factor_pair(s, y, spec, a, b, config.rotation_step, rng);
            if (t > config.burn_in) rotations_kept += moved;
          }
        }
        for (int b = 0; b < spec.k; ++b) flip_factor_sign(s, y, spec, b, rng);
      }
      if (mode == SigmaUpdate::gibbs) {
        update_sigma_gibbs(s, y, spec, rng);
      } else {
        const auto acc =
            update_sigma_mh(s, y, spec, sd, rng, &out.nonfinite_rejections);
        for (Eigen::Index j = 0; j < p; ++j) {
          const double a = acc[j] ? 1.0 : 0.0;
          if (t <= config.burn_in) {
            window_accepts[j] += a;
            if (t > config.burn_in - recent_span) recent_accepts[j] += a;
          } else {
            kept_accepts[j] += a;
          }
        }
        if (t <= config.burn_in) {
          if (t > config.burn_in - recent_span && p > 0) ++recent_count;
          if (++window_fill == config.adapt_window) {
            sd = tune_proposals(window_accepts / window_fill, sd, round++,
                                config);
            window_accepts.setZero();
            window_fill = 0;
          }
        }
      }
    } catch (const Error& e) {
      throw SamplerError(e.kind(),
                         std::string(e.what()) + " (iteration " +
                             std::to_string(t) + ")",
                         t, s);
    }
    if (t > config.burn_in && (t - config.burn_in) % config.thin == 0) {
      out.draws.push_back(s);
      out.iteration.push_back(t);
    }
  }

  const int kept = config.iterations - config.burn_in;
  const int pairs = spec.k * (spec.k - 1) / 2;
  if (pairs > 0 && config.rotation_step > 0.0) {
    out.rotation_acceptance = static_cast<double>(rotations_kept) / (kept * pairs);
  }
  if (mode == SigmaUpdate::gibbs) {
    out.acceptance = Vector::Ones(p);
  } else {
    out.acceptance = kept_accepts / static_cast<double>(kept);
    if (recent_count > 0) {
      const Vector recent = recent_accepts / recent_count;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (recent[j] < config.target_low || recent[j] > config.target_high) {
          out.tuned = false;
        }
      }
    }
  }
  out.proposal_sd = sd;
  out.wall_seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();
  return out;
}

PosteriorSample run_parallel_chains(const Matrix& y, const ModelSpec& spec,
                                    const McmcConfig& config) {
  require_valid(spec);
  if (const auto v = validate_config(config); !v.empty()) {
    fail(ErrorKind::config, "invalid MCMC config: " + v.front());
  }
  PosteriorSample out;
  out.spec = spec;
  out.sigma_update = resolve_sigma_update(config.sigma_update, spec.tau);
  out.chains.resize(config.chains);
  {
    std::vector<std::jthread> workers;
    workers.reserve(config.chains);
    for (int c = 0; c < config.chains; ++c) {
      workers.emplace_back([&, c] {
        try {
          out.chains[c] = run_chain(y, spec, config, c);
        } catch (const std::exception& e) {
          ChainResult failed;
          failed.seed = config.seed;
          failed.stream = static_cast<std::uint64_t>(c);
          failed.error = e.what();
          out.chains[c] = std::move(failed);
        }
      });
    }
  }
  return out;
}

}  // namespace qfm
