#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qfm/criteria.hpp"
#include "qfm/diagnostics.hpp"
#include "qfm/qcor.hpp"
#include "qfm/synthetic.hpp"

namespace qfm {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaMajor = 1;
inline constexpr const char* kSchemaVersion = "1.0";
inline constexpr const char* kFamily = "QFM";

/// Round-trippable decimal (17 significant digits).
std::string format_double(double x);

struct DataTable {
  std::vector<std::string> names;
  Matrix values;
};

/// Header row plus numeric rows; every row must have the header's width.
DataTable read_csv(const std::string& path);
std::string data_csv(const Matrix& y);  // header y1..yp
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

/// Long format chain,iter,param,value; f[i,l] and w[i] only with `latent`.
std::string draws_csv(const PosteriorSample& sample, bool latent);

/// Per-parameter, per-chain traces from a long-format draws file, in the
/// order parameters first appear.
std::vector<std::pair<std::string, std::vector<Trace>>> read_draws_csv(
    const std::string& path);

/// Everything a command can be configured with. JSON keys match the field
/// names; nested priors live under "priors".
struct RunConfig {
  double tau = 0.5;
  int k = 1;
  std::optional<int> p;  // checked against the data when given
  PriorHyper priors;
  McmcConfig mcmc;
  bool store_latent = false;
  int replicates = 0;

  std::string scenario = "case1";  // case1 | case2 | qfm
  int n = 150;
  Case1Params case1;
  double dof = 2.5;
  Matrix beta;   // qfm scenario truth
  Vector sigma;

  std::vector<double> taus{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::optional<std::pair<int, int>> pair;  // 1-based columns
};

/// Applies the keys of `j` on top of `cfg`. Unknown keys and wrongly typed
/// values raise a config error.
void apply_config_json(const Json& j, RunConfig& cfg);
RunConfig load_config_file(const std::string& path, RunConfig base = {});

Json mcmc_to_json(const McmcConfig& c);

/// Summary of a fit: posterior table, variance decompositions, MCMC
/// bookkeeping, diagnostics and criteria.
Json fit_summary(const PosteriorSample& sample, const McmcConfig& config,
                 const CriteriaReport& criteria,
                 const DiagnosticsReport& diagnostics);

struct QCorRow {
  int a = 0;  // 1-based columns
  int b = 0;
  QCorEstimate estimate;
};

Json qcor_summary(const std::vector<QCorRow>& rows, const McmcConfig& config);

/// Throws a data error unless the schema major version matches.
void check_schema(const Json& summary, const std::string& source);

struct CompareTable {
  std::string csv;
  std::optional<std::string> warning;
};

/// One row per summary with per-column minima flagged; needs >= 2 inputs.
CompareTable compare_summaries(const std::vector<Json>& summaries,
                               const std::vector<std::string>& labels);

Json diagnostics_summary(
    const std::vector<std::pair<std::string, std::vector<Trace>>>& traces);

}  // namespace qfm
