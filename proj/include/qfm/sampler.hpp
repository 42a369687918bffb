#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qfm/dists.hpp"
#include "qfm/error.hpp"
#include "qfm/model.hpp"

namespace qfm {

enum class SigmaUpdate { automatic, gibbs, mh };

const char* to_string(SigmaUpdate u);

struct McmcConfig {
  int iterations = 20000;
  int burn_in = 2000;
  int thin = 10;
  int chains = 2;
  std::uint64_t seed = 1;
  /// Log-scale random-walk step per sigma_j; empty means 0.5 everywhere.
  Vector proposal_sd;
  double target_low = 0.25;
  double target_high = 0.45;
  /// Iterations per adaptation window during burn-in.
  int adapt_window = 50;
  SigmaUpdate sigma_update = SigmaUpdate::automatic;
  /// Step (radians) of the factor-pair rotation move; 0 disables the
  /// rotation and sign-flip moves.
  double rotation_step = 0.3;

  /// 160,000 iterations, 10,000 burn-in, thin 50, 2 chains.
  static McmcConfig paper_protocol();
};

std::vector<std::string> validate_config(const McmcConfig& config);

/// Result of one chain. States are post burn-in and thinned.
struct ChainResult {
  std::vector<ChainState> draws;
  std::vector<int> iteration;  // 1-based sweep index of each stored draw
  Vector acceptance;           // post burn-in MH acceptance per sigma_j
  Vector proposal_sd;          // frozen step sizes after tuning
  bool tuned = true;           // last adaptation window landed in band
  long nonfinite_rejections = 0;
  double rotation_acceptance = 0.0;  // post burn-in, over all factor pairs
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  double wall_seconds = 0.0;
  std::string error;  // non-empty when the chain aborted
};

struct PosteriorSample {
  ModelSpec spec;
  SigmaUpdate sigma_update = SigmaUpdate::gibbs;
  std::vector<ChainResult> chains;

  std::size_t draw_count() const;
  /// All stored states across chains, chain-major.
  std::vector<const ChainState*> all_draws() const;
};

/// Raised when a sweep fails; carries the iteration and the last good state.
class SamplerError : public Error {
 public:
  SamplerError(ErrorKind kind, const std::string& what, int iteration,
               ChainState state)
      : Error(kind, what), iteration_(iteration), state_(std::move(state)) {}
  int iteration() const { return iteration_; }
  const ChainState& state() const { return state_; }

 private:
  int iteration_;
  ChainState state_;
};

// --- Full conditionals ----------------------------------------------------
//
// Each conditional is exposed as the law the sampler draws from so the
// implementation can be checked against the hierarchical joint density.

/// Gaussian in canonical form: N(precision^-1 linear, precision^-1).
struct CanonicalNormal {
  Matrix precision;
  Vector linear;
};

GIGParams w_conditional(const ChainState& state, const Matrix& y,
                        const ModelSpec& spec, Eigen::Index i);

CanonicalNormal f_conditional(const ChainState& state, const Matrix& y,
                              const ModelSpec& spec, Eigen::Index i);

/// Conditional of the free coefficients of loadings row j (0-based): the
/// first min(j+1, k) entries. For j < k the last of them is constrained
/// positive.
CanonicalNormal beta_row_conditional(const ChainState& state, const Matrix& y,
                                     const ModelSpec& spec, Eigen::Index j);

/// Sufficient statistics of sigma_j's conditional.
struct SigmaStats {
  double sum_sq_over_w;  // sum_i e_ij^2 / w_i
  double sum_resid;      // sum_i e_ij
  int n;
};

SigmaStats sigma_stats(const ChainState& state, const Matrix& y,
                       Eigen::Index j);

/// Log kernel of the conditional of precision = sigma_j^-2.
double sigma_precision_log_kernel(double precision, const SigmaStats& stats,
                                  const ModelSpec& spec);

/// Log joint density of (y, w, f, beta, sigma^-2) under the hierarchical
/// model, with the scale prior expressed on sigma^-2.
double log_joint(const ChainState& state, const Matrix& y,
                 const ModelSpec& spec);

// --- Updates (in place) ---------------------------------------------------

void update_w(ChainState& state, const Matrix& y, const ModelSpec& spec,
              RngStream& rng);
void update_f(ChainState& state, const Matrix& y, const ModelSpec& spec,
              RngStream& rng);
void update_beta_row(ChainState& state, const Matrix& y,
                     const ModelSpec& spec, Eigen::Index j, RngStream& rng);

/// Draws the loadings row from a CanonicalNormal, truncating the diagonal
/// coordinate when `constrained`.
Vector draw_loadings_row(const CanonicalNormal& law, bool constrained,
                         RngStream& rng);

/// Log-scale random walk MH step on each sigma_j^-2. Returns accept flags.
std::vector<bool> update_sigma_mh(ChainState& state, const Matrix& y,
                                  const ModelSpec& spec,
                                  const Vector& proposal_sd, RngStream& rng,
                                  long* nonfinite = nullptr);

/// Exact Gamma draw of sigma_j^-2; only valid at tau = 1/2.
void update_sigma_gibbs(ChainState& state, const Matrix& y,
                        const ModelSpec& spec, RngStream& rng);

/// Givens rotation by theta of factor columns (a, b), a < b: every f_i and
/// the loadings rows j >= b rotate, rows j < b stay. The map keeps the
/// loadings pattern and the N(0, I) and N(0, C0) priors, so the log target
/// ratio reduces to the likelihood of rows a..b-1. Returns -infinity when
/// the rotated diagonal entry beta(b, b) would be non-positive.
double rotation_log_ratio(const ChainState& state, const Matrix& y,
                          const ModelSpec& spec, int a, int b, double theta,
                          ChainState* proposal);

/// Metropolis rotation of factors (a, b): a random-walk angle, then a uniform one.
bool rotate_factor_pair(ChainState& state, const Matrix& y,
                        const ModelSpec& spec, int a, int b, double step,
                        RngStream& rng);

/// Sign flip of factor b: f_b and the loadings of rows j > b change sign,
/// beta(b, b) stays. An involution that keeps both priors, so only row b
/// enters the ratio; it lets the chain cross beta(b, b) ~ 0.
double flip_log_ratio(const ChainState& state, const Matrix& y,
                      const ModelSpec& spec, int b, ChainState* proposal);
bool flip_factor_sign(ChainState& state, const Matrix& y, const ModelSpec& spec,
                      int b, RngStream& rng);

/// One adaptation round: scales each step by its window acceptance rate.
Vector tune_proposals(const Vector& window_acceptance, const Vector& sd,
                      int round, const McmcConfig& config);

SigmaUpdate resolve_sigma_update(SigmaUpdate requested, double tau);

/// Prior-shaped starting state; later chains are more dispersed.
ChainState initial_state(const ModelSpec& spec, int chain, RngStream& rng);

/// Principal-component loadings of a robust covariance (normal-score
/// correlations, MAD scales), rotated to the identified pattern.
Matrix principal_loadings(const Matrix& y, int k);

/// Starting state used by run_chain: principal-component loadings and
/// moment-matched scales, jittered more for later chains.
ChainState data_initial_state(const Matrix& y, const ModelSpec& spec,
                              int chain, RngStream& rng);

ChainResult run_chain(const Matrix& y, const ModelSpec& spec,
                      const McmcConfig& config, int chain);

/// Runs config.chains chains concurrently on streams 0..chains-1.
PosteriorSample run_parallel_chains(const Matrix& y, const ModelSpec& spec,
                                    const McmcConfig& config);

}  // namespace qfm
