#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/special_functions/bessel.hpp>

#include "qfm/sampler.hpp"
#include "qfm/synthetic.hpp"

using namespace qfm;

namespace {

ModelSpec make_spec(int n, int p, int k, double tau) {
  ModelSpec s;
  s.n = n;
  s.p = p;
  s.k = k;
  s.tau = tau;
  return s;
}

// A random state satisfying the identifiability pattern.
ChainState random_state(const ModelSpec& spec, RngStream& rng) {
  ChainState s = initial_state(spec, 0, rng);
  for (int j = 0; j < spec.p; ++j) s.sigma[j] = 0.3 + rng.uniform();
  for (int i = 0; i < spec.n; ++i) s.w[i] = 0.2 + 2.0 * rng.uniform();
  return s;
}

double canonical_log_kernel(const CanonicalNormal& law, const Vector& x) {
  return -0.5 * x.dot(law.precision * x) + law.linear.dot(x);
}

struct Instance {
  ModelSpec spec;
  Matrix y;
  ChainState state;
};

Instance small_instance(double tau, std::uint64_t seed) {
  Instance in;
  in.spec = make_spec(30, 5, 2, tau);
  RngStream rng(seed, 0);
  in.state = random_state(in.spec, rng);
  in.y = gen_qfm(in.spec, in.state.beta, in.state.sigma, seed).y;
  return in;
}

}  // namespace

TEST_CASE("conditionals agree with the joint density") {
  for (double tau : {0.5, 0.2}) {
    Instance in = small_instance(tau, 7);
    RngStream rng(8, 0);
    const auto& spec = in.spec;
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      ChainState base = in.state;
      // Randomize the base point too so the check covers many states.
      const int i = rep % spec.n;
      const int j = rep % spec.p;
      const double joint0 = log_joint(base, in.y, spec);

      // w_i
      {
        const GIGParams g = w_conditional(base, in.y, spec, i);
        ChainState moved = base;
        moved.w[i] = base.w[i] * std::exp(rng.normal());
        const double dj = log_joint(moved, in.y, spec) - joint0;
        const double dq =
            gig_log_kernel(moved.w[i], g) - gig_log_kernel(base.w[i], g);
        worst = std::max(worst, std::abs(dj - dq));
      }
      // f_i
      {
        const CanonicalNormal law = f_conditional(base, in.y, spec, i);
        ChainState moved = base;
        for (int l = 0; l < spec.k; ++l) moved.f(i, l) += rng.normal();
        const double dj = log_joint(moved, in.y, spec) - joint0;
        const double dq =
            canonical_log_kernel(law, moved.f.row(i).transpose()) -
            canonical_log_kernel(law, base.f.row(i).transpose());
        worst = std::max(worst, std::abs(dj - dq));
      }
      // beta rows: one constrained (j < k) and one free (j >= k).
      for (int row : {rep % spec.k, spec.k + rep % (spec.p - spec.k)}) {
        const CanonicalNormal law = beta_row_conditional(base, in.y, spec, row);
        const auto d = law.linear.size();
        CHECK(d == std::min(row + 1, spec.k));
        ChainState moved = base;
        for (int l = 0; l < d; ++l) moved.beta(row, l) += 0.3 * rng.normal();
        if (row < spec.k) moved.beta(row, row) = std::abs(moved.beta(row, row));
        const double dj = log_joint(moved, in.y, spec) - joint0;
        const double dq =
            canonical_log_kernel(law, moved.beta.row(row).head(d).transpose()) -
            canonical_log_kernel(law, base.beta.row(row).head(d).transpose());
        worst = std::max(worst, std::abs(dj - dq));
      }
      // sigma_j, on the precision scale.
      {
        const SigmaStats st = sigma_stats(base, in.y, j);
        ChainState moved = base;
        moved.sigma[j] = base.sigma[j] * std::exp(0.3 * rng.normal());
        const double dj = log_joint(moved, in.y, spec) - joint0;
        const double dq =
            sigma_precision_log_kernel(1 / (moved.sigma[j] * moved.sigma[j]),
                                       st, spec) -
            sigma_precision_log_kernel(1 / (base.sigma[j] * base.sigma[j]), st,
                                       spec);
        worst = std::max(worst, std::abs(dj - dq));
      }
      // Move the base state for the next replicate.
      update_w(in.state, in.y, spec, rng);
      update_f(in.state, in.y, spec, rng);
    }
    INFO("tau=" << tau);
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("weight conditional parameters") {
  Instance in = small_instance(0.5, 3);
  const GIGParams g = w_conditional(in.state, in.y, in.spec, 0);
  CHECK(g.order == doctest::Approx(1.0 - 5.0 / 2.0));
  CHECK(g.rate == 2.0);

  ModelSpec p2 = make_spec(4, 2, 1, 0.5);
  ChainState s;
  s.beta = Matrix::Zero(2, 1);
  s.f = Matrix::Zero(4, 1);
  s.sigma = Vector::Ones(2);
  s.w = Vector::Ones(4);
  Matrix y = Matrix::Zero(4, 2);
  CHECK(w_conditional(s, y, p2, 0).order == 0.0);
  // Exact fit with order <= 0 leaves the conditional improper.
  RngStream rng(1, 0);
  CHECK_THROWS_AS(update_w(s, y, p2, rng), Error);
}

TEST_CASE("weight redraws match the Bessel-ratio mean") {
  Instance in = small_instance(0.3, 4);
  const GIGParams g = w_conditional(in.state, in.y, in.spec, 5);
  const double omega = std::sqrt(g.rate * g.inv_rate);
  auto moment = [&](double r) {
    return std::pow(g.inv_rate / g.rate, r / 2) *
           boost::math::cyl_bessel_k(g.order + r, omega) /
           boost::math::cyl_bessel_k(g.order, omega);
  };
  const double mean = moment(1.0);
  const double var = moment(2.0) - mean * mean;
  RngStream rng(5, 0);
  const int n = 100000;
  double s = 0.0;
  ChainState st = in.state;
  for (int t = 0; t < n; ++t) {
    update_w(st, in.y, in.spec, rng);
    s += st.w[5];
  }
  CHECK(std::abs(s / n - mean) < 3 * std::sqrt(var / n));
}

TEST_CASE("factor conditional") {
  SUBCASE("zero loadings recover the prior") {
    Instance in = small_instance(0.4, 9);
    in.state.beta.setZero();
    const CanonicalNormal law = f_conditional(in.state, in.y, in.spec, 2);
    CHECK((law.precision - Matrix::Identity(2, 2)).norm() == 0.0);
    CHECK(law.linear.norm() == 0.0);
  }
  SUBCASE("scalar conjugate case") {
    ModelSpec spec = make_spec(1, 1, 1, 0.5);
    ChainState s;
    s.beta = Matrix::Ones(1, 1);
    s.f = Matrix::Zero(1, 1);
    s.sigma = Vector::Constant(1, 1.0 / std::sqrt(8.0));  // delta = 1
    s.w = Vector::Ones(1);
    Matrix y = Matrix::Constant(1, 1, 2.0);
    const CanonicalNormal law = f_conditional(s, y, spec, 0);
    CHECK(law.precision(0, 0) == doctest::Approx(2.0));
    CHECK(law.linear[0] / law.precision(0, 0) == doctest::Approx(1.0));

    RngStream rng(2, 0);
    const int n = 100000;
    double s1 = 0.0, s2 = 0.0;
    for (int t = 0; t < n; ++t) {
      update_f(s, y, spec, rng);
      s1 += s.f(0, 0);
      s2 += s.f(0, 0) * s.f(0, 0);
    }
    CHECK(std::abs(s1 / n - 1.0) < 3 * std::sqrt(0.5 / n));
    CHECK(std::abs(s2 / n - 1.0 - 0.5) < 0.01);
  }
  SUBCASE("huge weights shrink the likelihood away") {
    Instance in = small_instance(0.5, 10);
    in.state.w.setConstant(1e12);
    const CanonicalNormal law = f_conditional(in.state, in.y, in.spec, 0);
    CHECK((law.precision - Matrix::Identity(2, 2)).norm() < 1e-9);
  }
}

TEST_CASE("loadings row conditional") {
  SUBCASE("no data gives the prior") {
    ModelSpec spec = make_spec(0, 3, 1, 0.5);
    ChainState s;
    s.beta = Matrix::Ones(3, 1);
    s.f = Matrix::Zero(0, 1);
    s.sigma = Vector::Ones(3);
    s.w = Vector::Zero(0);
    Matrix y(0, 3);
    const CanonicalNormal law = beta_row_conditional(s, y, spec, 0);
    CHECK(law.precision(0, 0) == doctest::Approx(1.0 / spec.priors.c0));
    CHECK(law.linear[0] == 0.0);
    RngStream rng(3, 0);
    const int n = 100000;
    double sum = 0.0;
    for (int t = 0; t < n; ++t) sum += draw_loadings_row(law, true, rng)[0];
    // Half-normal mean sqrt(2 C0 / pi).
    CHECK(std::abs(sum / n - std::sqrt(2 * 100.0 / M_PI)) <
          3 * std::sqrt(100.0 * (1 - 2 / M_PI) / n));
  }
  SUBCASE("least-squares limit") {
    ModelSpec spec = make_spec(50, 3, 1, 0.5);
    spec.priors.c0 = 1e12;
    ChainState s;
    s.beta = Matrix::Ones(3, 1);
    s.f = Matrix::Ones(50, 1);
    s.sigma = Vector::Constant(3, 1.0 / std::sqrt(8.0));
    s.w = Vector::Ones(50);
    RngStream rng(4, 0);
    Matrix y(50, 3);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = 3.0 + rng.normal();
    const CanonicalNormal law = beta_row_conditional(s, y, spec, 0);
    CHECK(law.linear[0] / law.precision(0, 0) ==
          doctest::Approx(y.col(0).mean()).epsilon(1e-9));
  }
  SUBCASE("diagonal draws stay positive") {
    Instance in = small_instance(0.1, 11);
    RngStream rng(5, 0);
    in.state.beta(1, 1) = 1e-3;
    for (int t = 0; t < 2000; ++t) {
      for (int j = 0; j < in.spec.p; ++j) update_beta_row(in.state, in.y, in.spec, j, rng);
      REQUIRE(loadings_identified(in.state.beta));
    }
  }
  SUBCASE("constrained draw matches a rejection oracle") {
    CanonicalNormal law;
    law.precision = Matrix(2, 2);
    law.precision << 2.0, 0.8, 0.8, 1.5;
    law.linear = Vector(2);
    law.linear << 0.5, -0.7;
    RngStream rng(6, 0), oracle_rng(7, 0);
    const int n = 100000;
    Vector s = Vector::Zero(2), so = Vector::Zero(2);
    for (int t = 0; t < n; ++t) {
      s += draw_loadings_row(law, true, rng);
      Vector x;
      do {
        x = sample_normal_canonical(law.precision, law.linear, oracle_rng);
      } while (x[1] <= 0.0);
      so += x;
    }
    CHECK(std::abs(s[0] / n - so[0] / n) < 0.015);
    CHECK(std::abs(s[1] / n - so[1] / n) < 0.015);
  }
}

TEST_CASE("sigma kernel and MH step") {
  Instance in = small_instance(0.5, 12);
  SigmaStats st = sigma_stats(in.state, in.y, 0);
  SigmaStats shifted = st;
  shifted.sum_resid += 10.0;
  CHECK(sigma_precision_log_kernel(2.0, st, in.spec) ==
        sigma_precision_log_kernel(2.0, shifted, in.spec));

  RngStream rng(13, 0);
  ChainState s = in.state;
  const Vector tiny = Vector::Constant(5, 1e-9);
  int acc = 0;
  for (int t = 0; t < 1000; ++t) {
    for (bool a : update_sigma_mh(s, in.y, in.spec, tiny, rng)) acc += a;
  }
  CHECK(acc / 5000.0 > 0.99);
}

TEST_CASE("MH sigma draws follow the kernel (KS vs quadrature)") {
  Instance in = small_instance(0.2, 14);
  const SigmaStats st = sigma_stats(in.state, in.y, 2);
  // Normalized CDF of the kernel on a fine precision grid.
  double lo = 1e-6, hi = 1.0;
  while (sigma_precision_log_kernel(hi, st, in.spec) -
             sigma_precision_log_kernel(hi / 2, st, in.spec) > -40) {
    hi *= 2;
  }
  const int m = 200000;
  std::vector<double> grid(m + 1), cdf(m + 1, 0.0);
  double peak = -1e300;
  for (int g = 0; g <= m; ++g) {
    grid[g] = lo + (hi - lo) * g / m;
    peak = std::max(peak, sigma_precision_log_kernel(grid[g], st, in.spec));
  }
  for (int g = 1; g <= m; ++g) {
    const double a = std::exp(sigma_precision_log_kernel(grid[g - 1], st, in.spec) - peak);
    const double b = std::exp(sigma_precision_log_kernel(grid[g], st, in.spec) - peak);
    cdf[g] = cdf[g - 1] + 0.5 * (a + b) * (grid[g] - grid[g - 1]);
  }
  for (auto& c : cdf) c /= cdf.back();

  RngStream rng(15, 0);
  ChainState s = in.state;
  Vector sd = Vector::Constant(5, 0.5);
  std::vector<double> draws;
  const int n = 100000;
  for (int t = 0; t < 1000 + n; ++t) {
    update_sigma_mh(s, in.y, in.spec, sd, rng);
    if (t >= 1000) draws.push_back(1.0 / (s.sigma[2] * s.sigma[2]));
  }
  std::sort(draws.begin(), draws.end());
  double ks = 0.0;
  for (int t = 0; t < n; ++t) {
    const auto it = std::lower_bound(grid.begin(), grid.end(), draws[t]);
    const auto g = std::clamp<long>(it - grid.begin(), 1, m);
    const double frac = (draws[t] - grid[g - 1]) / (grid[g] - grid[g - 1]);
    const double f = cdf[g - 1] + frac * (cdf[g] - cdf[g - 1]);
    ks = std::max({ks, std::abs(f - double(t) / n), std::abs(f - double(t + 1) / n)});
  }
  CHECK(ks < 0.02);
}

TEST_CASE("Gibbs sigma update") {
  SUBCASE("shape and prior recovery") {
    ModelSpec spec = make_spec(0, 3, 1, 0.5);
    ChainState s;
    s.beta = Matrix::Ones(3, 1);
    s.f = Matrix::Zero(0, 1);
    s.sigma = Vector::Ones(3);
    s.w = Vector::Zero(0);
    Matrix y(0, 3);
    spec.priors.nu = 4.0;
    spec.priors.s2 = 2.0;
    RngStream rng(16, 0);
    const int n = 100000;
    double sum = 0.0;
    for (int t = 0; t < n; ++t) {
      update_sigma_gibbs(s, y, spec, rng);
      sum += 1.0 / (s.sigma[0] * s.sigma[0]);
    }
    // Gamma(nu/2, nu s2 / 2) has mean 1/s2 and variance 2/(nu s2^2).
    CHECK(std::abs(sum / n - 0.5) < 3 * std::sqrt(2.0 / (4.0 * 4.0) / n));
    CHECK(0.5 * (150 + 0.02) == doctest::Approx(75.01));
  }
  SUBCASE("only valid at the median") {
    Instance in = small_instance(0.3, 17);
    RngStream rng(18, 0);
    CHECK_THROWS_AS(update_sigma_gibbs(in.state, in.y, in.spec, rng), Error);
  }
  SUBCASE("Gibbs and MH target the same conditional") {
    Instance in = small_instance(0.5, 19);
    RngStream rg(20, 0), rm(21, 0);
    ChainState a = in.state, b = in.state;
    const Vector sd = Vector::Constant(5, 0.4);
    const int n = 60000;
    Vector ga = Vector::Zero(5), mb = Vector::Zero(5), ga2 = Vector::Zero(5);
    std::vector<std::vector<double>> mh_trace(5);
    for (int t = 0; t < n; ++t) {
      update_sigma_gibbs(a, in.y, in.spec, rg);
      update_sigma_mh(b, in.y, in.spec, sd, rm);
      for (int j = 0; j < 5; ++j) {
        ga[j] += a.sigma[j];
        ga2[j] += a.sigma[j] * a.sigma[j];
        mb[j] += b.sigma[j];
      }
    }
    for (int j = 0; j < 5; ++j) {
      const double mean = ga[j] / n;
      const double sdv = std::sqrt(ga2[j] / n - mean * mean);
      // MH draws are autocorrelated; allow an ESS of n/10.
      const double se = sdv * std::sqrt(1.0 / n + 10.0 / n);
      CHECK(std::abs(mb[j] / n - mean) < 3 * se);
    }
  }
}

TEST_CASE("proposal tuning responds monotonically") {
  McmcConfig cfg;
  Vector sd = Vector::Constant(2, 0.5);
  Vector acc(2);
  acc << 0.9, 0.05;
  const Vector out = tune_proposals(acc, sd, 0, cfg);
  CHECK(out[0] > sd[0]);
  CHECK(out[1] < sd[1]);
  acc << 0.35, 0.35;
  CHECK((tune_proposals(acc, sd, 3, cfg) - sd).norm() < 1e-12);
}

TEST_CASE("chain bookkeeping and determinism") {
  const ModelSpec spec = make_spec(40, 4, 1, 0.3);
  Matrix beta(4, 1);
  beta << 1.0, 0.8, -0.5, 0.3;
  const auto sim = gen_qfm(spec, beta, Vector::Constant(4, 0.3), 5);

  McmcConfig cfg;
  cfg.iterations = 51;
  cfg.burn_in = 50;
  cfg.thin = 1;
  auto one = run_chain(sim.y, spec, cfg, 0);
  CHECK(one.draws.size() == 1);
  CHECK(one.iteration.front() == 51);

  cfg.iterations = 300;
  cfg.burn_in = 100;
  cfg.thin = 7;
  auto a = run_chain(sim.y, spec, cfg, 0);
  auto b = run_chain(sim.y, spec, cfg, 0);
  CHECK(a.draws.size() == 200 / 7);
  bool same = a.draws.size() == b.draws.size();
  for (std::size_t t = 0; same && t < a.draws.size(); ++t) {
    same = a.draws[t].beta == b.draws[t].beta &&
           a.draws[t].sigma == b.draws[t].sigma && a.draws[t].f == b.draws[t].f;
  }
  CHECK(same);
  for (const auto& d : a.draws) {
    REQUIRE(loadings_identified(d.beta));
    REQUIRE((d.sigma.array() > 0).all());
    REQUIRE((d.w.array() > 0).all());
  }
  for (Eigen::Index j = 0; j < 4; ++j) {
    CHECK(a.acceptance[j] >= 0.0);
    CHECK(a.acceptance[j] <= 1.0);
  }

  cfg.chains = 1;
  const auto single = run_parallel_chains(sim.y, spec, cfg);
  REQUIRE(single.chains.size() == 1);
  CHECK(single.chains[0].draws.back().beta == a.draws.back().beta);

  cfg.chains = 2;
  const auto p1 = run_parallel_chains(sim.y, spec, cfg);
  const auto p2 = run_parallel_chains(sim.y, spec, cfg);
  CHECK(p1.chains[1].draws.back().beta == p2.chains[1].draws.back().beta);
  CHECK(p1.chains[0].draws.back().beta != p1.chains[1].draws.back().beta);
  CHECK(p1.draw_count() == 2 * a.draws.size());
}

TEST_CASE("one sweep from a prior draw keeps the state valid") {
  const ModelSpec spec = make_spec(25, 6, 3, 0.7);
  RngStream rng(22, 0);
  ChainState s = initial_state(spec, 1, rng);
  Matrix y(25, 6);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();
  update_w(s, y, spec, rng);
  update_f(s, y, spec, rng);
  for (int j = 0; j < 6; ++j) update_beta_row(s, y, spec, j, rng);
  update_sigma_mh(s, y, spec, Vector::Constant(6, 0.5), rng);
  CHECK(loadings_identified(s.beta));
  CHECK((s.sigma.array() > 0).all());
  CHECK((s.w.array() > 0).all());
  // At the median the location vector vanishes.
  CHECK(error_law(s.sigma, 0.5).m.norm() == 0.0);
}

TEST_CASE("chain errors carry the iteration and state") {
  const ModelSpec spec = make_spec(10, 3, 1, 0.5);
  Matrix y = Matrix::Zero(10, 3);
  y(3, 1) = std::numeric_limits<double>::quiet_NaN();
  McmcConfig cfg;
  cfg.iterations = 10;
  cfg.burn_in = 2;
  cfg.thin = 1;
  try {
    run_chain(y, spec, cfg, 0);
    FAIL("expected a sampler error");
  } catch (const SamplerError& e) {
    CHECK(e.iteration() == 1);
    CHECK(e.state().beta.rows() == 3);
  }
  cfg.chains = 2;
  const auto out = run_parallel_chains(y, spec, cfg);
  CHECK_FALSE(out.chains[0].error.empty());
  CHECK_FALSE(out.chains[1].error.empty());
  CHECK(out.draw_count() == 0);

  ModelSpec bad = spec;
  bad.k = 5;
  CHECK_THROWS_AS(run_chain(y, bad, cfg, 0), Error);
}

TEST_CASE("parameter recovery at the median") {
  const ModelSpec spec = make_spec(150, 5, 1, 0.5);
  Matrix beta(5, 1);
  beta << 0.9, 0.7, -0.6, 0.5, 1.2;
  const Vector sigma = Vector::Constant(5, 0.25);
  const auto sim = gen_qfm(spec, beta, sigma, 123);
  McmcConfig cfg;
  cfg.iterations = 6000;
  cfg.burn_in = 1000;
  cfg.thin = 5;
  cfg.chains = 1;
  const auto post = run_parallel_chains(sim.y, spec, cfg);
  const auto draws = post.all_draws();
  int covered = 0;
  for (int j = 0; j < 5; ++j) {
    std::vector<double> v;
    for (const auto* d : draws) v.push_back(d->beta(j, 0));
    std::sort(v.begin(), v.end());
    const double lo = v[static_cast<std::size_t>(0.025 * v.size())];
    const double hi = v[static_cast<std::size_t>(0.975 * v.size())];
    MESSAGE("loading " << j << " interval [" << lo << "," << hi << "]");
    covered += beta(j, 0) >= lo && beta(j, 0) <= hi;
  }
  CHECK(covered >= 4);
}

TEST_CASE("factor rotation ratio matches the joint density") {
  ModelSpec spec = make_spec(25, 6, 3, 0.3);
  RngStream rng(21, 0);
  double worst = 0.0;
  int constrained = 0;
  for (int rep = 0; rep < 60; ++rep) {
    const ChainState s = random_state(spec, rng);
    const Matrix y = gen_qfm(spec, s.beta, s.sigma, 100 + rep).y;
    const int a = rep % 2;
    const int b = a + 1 + (rep / 2) % (2 - a);
    const double theta = 2.0 * (rng.uniform() - 0.5);
    ChainState moved;
    const double lr = rotation_log_ratio(s, y, spec, a, b, theta, &moved);
    if (!std::isfinite(lr)) {
      CHECK(lr < 0);
      CHECK(-std::sin(theta) * s.beta(b, a) + std::cos(theta) * s.beta(b, b) <= 0.0);
      ++constrained;
      continue;
    }
    // Pattern kept: zeros above the diagonal, positive diagonal.
    for (int j = 0; j < spec.k; ++j) {
      CHECK(moved.beta(j, j) > 0.0);
      for (int l = j + 1; l < spec.k; ++l) CHECK(moved.beta(j, l) == 0.0);
    }
    const double dj = log_joint(moved, y, spec) - log_joint(s, y, spec);
    worst = std::max(worst, std::abs(dj - lr) / (1.0 + std::abs(dj)));
  }
  CHECK(worst < 1e-9);
  MESSAGE("constrained proposals " << constrained);
}

TEST_CASE("zero rotation is the identity") {
  ModelSpec spec = make_spec(20, 5, 2, 0.5);
  RngStream rng(3, 0);
  const ChainState s = random_state(spec, rng);
  const Matrix y = gen_qfm(spec, s.beta, s.sigma, 4).y;
  ChainState moved;
  CHECK(rotation_log_ratio(s, y, spec, 0, 1, 0.0, &moved) == doctest::Approx(0.0));
  CHECK(moved.beta == s.beta);
  CHECK(moved.f == s.f);
}

TEST_CASE("factor sign flip ratio matches the joint density") {
  ModelSpec spec = make_spec(25, 6, 3, 0.7);
  RngStream rng(31, 0);
  double worst = 0.0;
  for (int rep = 0; rep < 30; ++rep) {
    const ChainState s = random_state(spec, rng);
    const Matrix y = gen_qfm(spec, s.beta, s.sigma, 200 + rep).y;
    const int b = rep % spec.k;
    ChainState moved;
    const double lr = flip_log_ratio(s, y, spec, b, &moved);
    CHECK(loadings_identified(moved.beta));
    CHECK(moved.beta(b, b) == s.beta(b, b));
    const double dj = log_joint(moved, y, spec) - log_joint(s, y, spec);
    worst = std::max(worst, std::abs(dj - lr) / (1.0 + std::abs(dj)));
    // Flipping twice is the identity.
    ChainState back;
    flip_log_ratio(moved, y, spec, b, &back);
    CHECK(back.f == s.f);
    CHECK(back.beta == s.beta);
  }
  CHECK(worst < 1e-9);
}
