#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "geosynth/encoding.hpp"
#include "geosynth/generators.hpp"
#include "geosynth/geometry.hpp"
#include "geosynth/table.hpp"

namespace geosynth::metrics {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// p-Wasserstein distance between two empirical 1-D samples, exact for
/// unequal sizes too.
double wasserstein_1d(std::span<const double> a, std::span<const double> b, double p);

/// Mean of wasserstein_1d over n_proj seeded directions on the unit circle.
double sliced_wasserstein(const MatrixXd& a, const MatrixXd& b, std::size_t n_proj = 1000, double p = 2.0,
                          std::uint64_t seed = 0);

/// Principal components of the non-spatial features of a real table.
struct PcaBasis {
  Encoder encoder;        // model-mode one-hot / z-score of non-spatial columns
  VectorXd mean;          // per encoded column
  VectorXd stddev;        // per encoded column, 1 for constant columns
  MatrixXd components;    // encoded width x l, orthonormal columns
  VectorXd eigenvalues;   // l values, non-increasing
  double total_variance = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(eigenvalues.size()); }
  /// Eigenvalues rescaled to sum to one.
  VectorXd weights() const;
  double explained() const { return eigenvalues.sum() / total_variance; }
  /// N x l scores of `table` in the basis.
  MatrixXd project(const GeoTable& table) const;
};

PcaBasis pca_fit(const GeoTable& real, double variance_share = 0.95);

/// Undirected neighbour pairs (i < j) closer than m.
std::vector<std::pair<std::size_t, std::size_t>> neighbor_pairs(const MatrixXd& coords, double m);

double moran_index(std::span<const double> values, const MatrixXd& coords, double m);
/// Same statistic over precomputed neighbour pairs.
double moran_index(std::span<const double> values, const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

/// q-quantile of pairwise distances, exact when N(N-1)/2 <= cap and over cap
/// seeded random pairs otherwise.
double pairwise_percentile(const MatrixXd& coords, double q, std::size_t cap, std::uint64_t seed);

struct MoranConfig {
  double percentile = 0.01;
  std::size_t exact_pair_limit = 2'000'000;
  std::size_t pair_sample = 1'000'000;
  std::uint64_t seed = 0;
  std::optional<double> threshold;  // overrides the percentile rule
};

struct MoranBreakdown {
  double threshold = 0.0;
  std::vector<double> real;   // I_j
  std::vector<double> synth;  // synthetic I_j
  double real_total = 0.0;
  double synth_total = 0.0;
  double distance = 0.0;
};

/// Real coordinates standardized by their own mean/std; the synthetic ones
/// reuse the real scaling.
std::pair<MatrixXd, MatrixXd> standardized_coords(const GeoTable& real, const GeoTable& synth);

MoranBreakdown spatial_autocorr(const GeoTable& real, const GeoTable& synth, const PcaBasis& basis,
                                const MoranConfig& cfg);
double spatial_autocorr_distance(const GeoTable& real, const GeoTable& synth, const PcaBasis& basis,
                                 const MoranConfig& cfg);

struct GridSpec {
  double cell = 0.01;
};

/// Lattice cell of a coordinate; values within 1e-9 of a boundary snap up.
std::int64_t grid_cell(double x, double cell);

double local_feature_distance(const GeoTable& real, const GeoTable& synth, const PcaBasis& basis,
                              const GridSpec& grid);

/// log(price) regressed on non-spatial features plus subregion fixed effects.
struct HedonicModel {
  std::string price_column;
  std::vector<std::string> feature_names;  // design columns after the intercept
  double intercept = 0.0;
  VectorXd coefficients;                   // one per feature design column
  std::map<std::string, double> fixed_effects;  // reference subregion maps to 0
  double mean_fixed_effect = 0.0;
  double train_r2 = 0.0;
};

HedonicModel hedonic_fit(const GeoTable& table, const RegionGeometry& geom, const std::string& price_column);
VectorXd hedonic_predict(const HedonicModel& model, const GeoTable& table, const RegionGeometry& geom);
/// Log-prices of a table; fails on non-positive prices.
VectorXd log_prices(const GeoTable& table, const std::string& price_column);
double r_squared(const VectorXd& truth, const VectorXd& predicted);
double utility_distance(const GeoTable& real, const GeoTable& synth, const RegionGeometry& geom,
                        const std::string& price_column);

/// Mann-Whitney AUC; ties count one half.
double auc_roc(std::span<const double> scores, const std::vector<bool>& labels);

struct LogisticFit {
  double intercept = 0.0;
  double slope = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Damped Newton-Raphson for P(y = 1) = sigmoid(a + b x).
LogisticFit logistic_fit(std::span<const double> x, const std::vector<bool>& y, double tolerance = 1e-10,
                         int max_iterations = 100);

/// Fits a generator on its argument and draws n rows with the given seed.
using GeneratorFn = std::function<GeoTable(const GeoTable& train, std::size_t n, std::uint64_t seed)>;

struct PrivacyResult {
  double rho = 0.0;
  double auc = 0.5;
  LogisticFit classifier;
  std::size_t members = 0;
  std::size_t non_members = 0;
};

/// Membership-inference score: AUC - 0.5 of a logistic classifier on the
/// distance from each real row to the synthetic data of a generator fit on a
/// random 95% of the rows. n_synth = 0 uses the member count.
PrivacyResult privacy_attack(const GeoTable& data, const GeneratorFn& generator, std::size_t n_synth,
                             std::uint64_t seed);
double privacy_score(const GeoTable& data, const GeneratorFn& generator, std::size_t n_synth, std::uint64_t seed);
double privacy_score(const GeoTable& data, gen::GeneratorKind kind, const RegionGeometry& geom,
                     const gen::GeneratorConfig& config, std::size_t n_synth, std::uint64_t seed);
GeneratorFn kind_generator(gen::GeneratorKind kind, const RegionGeometry& geom, const gen::GeneratorConfig& config);

/// Minimum Euclidean distance from every row of `points` to the rows of `ref`.
VectorXd nearest_distances(const MatrixXd& points, const MatrixXd& ref);

struct EvalConfig {
  std::size_t n_proj = 1000;
  double p = 2.0;
  GridSpec grid;
  MoranConfig moran;
  std::string price_column = "price";
  std::uint64_t seed = 0;        // sliced-Wasserstein directions and pair sampling
  std::uint64_t split_seed = 3;  // privacy splits and generator refit
  bool privacy = true;
  std::size_t privacy_n_synth = 0;
  gen::GeneratorConfig generator;

  nlohmann::json to_json() const;
  static EvalConfig from_json(const nlohmann::json& j);
};

struct MetricValue {
  std::optional<double> value;
  std::string error;  // set when value is empty

  bool ok() const { return value.has_value(); }
};

struct EvaluationReport {
  std::map<std::string, MetricValue> fields;  // d_geo, d_spatial, d_local, d_utility, rho_privacy, novelty
  std::string generator_kind;
  std::size_t n_real = 0;
  std::size_t n_synth = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::uint64_t> seeds;
  std::string config_hash;
  nlohmann::json config;
  std::vector<std::string> warnings;

  static const std::vector<std::string>& field_names();
  bool all_failed() const;
  nlohmann::json to_json() const;
  static EvaluationReport from_json(const nlohmann::json& j);
  static std::string csv_header();
  std::string csv_row() const;
  friend bool operator==(const EvaluationReport& a, const EvaluationReport& b);
};

struct EvalInputs {
  const GeoTable* real = nullptr;
  const GeoTable* synth = nullptr;
  const RegionGeometry* geometry = nullptr;  // utility and privacy need it
  std::optional<gen::GeneratorKind> kind;    // privacy refits this kind
  GeneratorFn privacy_generator;             // overrides kind for privacy
};

EvaluationReport evaluate(const EvalInputs& inputs, const EvalConfig& config);

/// 64-bit FNV-1a of a string, as 16 hex digits.
std::string fnv1a_hex(const std::string& s);

}  // namespace geosynth::metrics
