#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "geosynth/encoding.hpp"
#include "geosynth/flow.hpp"
#include "geosynth/geometry.hpp"
#include "geosynth/table.hpp"
#include "geosynth/vae.hpp"

namespace geosynth::gen {

enum class GeneratorKind { kNfVae, kVaeOnly, kCopula, kNfCopula, kGlobalShuffle, kLocalShuffle };

const char* to_string(GeneratorKind kind);
GeneratorKind kind_from_string(const std::string& name);
const std::vector<GeneratorKind>& all_kinds();
bool is_neural(GeneratorKind kind);

/// Hyperparameters of the neural parts. Seeds inside the TrainConfigs are
/// overwritten from the fit seed.
struct GeneratorConfig {
  flow::FlowArch flow_arch;
  nn::TrainConfig flow_train = default_flow_train();
  vae::VaeArch vae_arch;
  nn::TrainConfig vae_train = default_vae_train();
  vae::LossWeights weights;

  static nn::TrainConfig default_flow_train();
  static nn::TrainConfig default_vae_train();
  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
};

/// Empirical marginal of one copula variable.
struct CopulaMarginal {
  bool discrete = false;
  std::vector<double> sorted;       // continuous: sorted sample
  std::vector<double> levels;       // discrete: level codes, most frequent first
  std::vector<double> upper;        // discrete: cumulative upper interval bounds
};

/// Gaussian copula over the columns of a real matrix.
struct CopulaState {
  std::vector<CopulaMarginal> marginals;
  Eigen::MatrixXd correlation;  // repaired, unit diagonal
  Eigen::MatrixXd factor;       // correlation = factor * factor^T

  static CopulaState fit(const Eigen::MatrixXd& data, const std::vector<bool>& discrete);
  /// n x V draws in the units of the fitted data.
  Eigen::MatrixXd sample(std::size_t n, std::uint64_t seed) const;

  nlohmann::json to_json() const;
  static CopulaState from_json(const nlohmann::json& j);
};

/// Nearest correlation matrix by eigenvalue clipping at `floor` followed by
/// unit-diagonal rescaling.
Eigen::MatrixXd repair_correlation(const Eigen::MatrixXd& c, double floor = 1e-10);

class FittedGenerator {
 public:
  static FittedGenerator fit(GeneratorKind kind, const GeoTable& data, const RegionGeometry& geom,
                             const GeneratorConfig& config, std::uint64_t seed);

  GeneratorKind kind() const { return kind_; }
  const Schema& schema() const { return schema_; }
  const RegionGeometry& geometry() const { return geom_; }
  std::uint64_t fit_seed() const { return seed_; }
  const GeneratorConfig& config() const { return config_; }
  const std::optional<flow::FlowModel>& flow_model() const { return flow_; }
  const std::optional<vae::VaeModel>& vae_model() const { return vae_; }
  const std::optional<CopulaState>& copula() const { return copula_; }
  const std::vector<double>& flow_history() const { return flow_history_; }
  const std::vector<double>& vae_history() const { return vae_history_; }
  /// Training rows kept by the shuffle kinds; empty otherwise.
  const GeoTable& source() const { return source_; }

  /// Exactly n rows inside the region; candidates falling outside are
  /// regenerated.
  GeoTable sample(std::size_t n, std::uint64_t seed) const;

  void save(const std::filesystem::path& dir) const;
  static FittedGenerator load(const std::filesystem::path& dir);

 private:
  GeoTable candidates(std::size_t n, std::uint64_t seed) const;
  Eigen::MatrixXd model_matrix(const GeoTable& data) const;  // VAE / copula input
  GeoTable from_model_matrix(const Eigen::MatrixXd& m) const;
  void prepare();  // derived state shared by fit and load

  GeneratorKind kind_ = GeneratorKind::kGlobalShuffle;
  Schema schema_;
  RegionGeometry geom_;
  GeneratorConfig config_;
  std::uint64_t seed_ = 0;

  std::optional<flow::FlowModel> flow_;
  std::optional<vae::VaeModel> vae_;
  std::optional<CopulaState> copula_;
  Encoder features_;                 // VAE kinds: model-mode encoder of non-spatial columns
  std::array<ColumnScaler, 2> coord_scaler_{};  // vae_only min-max (lon, lat)
  GeoTable source_;                  // shuffles
  std::vector<double> flow_history_;
  std::vector<double> vae_history_;

  // Derived, not serialized.
  std::vector<Polygon> group_polygons_;  // subregions in id order, then the region for "_none"
  std::vector<std::size_t> row_group_;
};

/// Resample rows with replacement and give each fresh uniform coordinates in
/// the subregion of its source row (the whole region for "_none" rows).
GeoTable local_shuffle_sample(const GeoTable& source, const RegionGeometry& geom, std::size_t n, std::uint64_t seed);
/// Resample rows with replacement with uniform coordinates in the region.
GeoTable global_shuffle_sample(const GeoTable& source, const RegionGeometry& geom, std::size_t n,
                               std::uint64_t seed);

/// Fraction of synthetic rows whose non-spatial values match no real row
/// (discrete columns exactly, numerics within 1e-9 relative).
double novelty_rate(const GeoTable& real, const GeoTable& synth);

/// Candidates per round grow until this many per requested row have been
/// tried; below kMinAcceptance the sampler gives up.
inline constexpr double kMaxCandidatesPerRow = 100.0;
inline constexpr double kMinAcceptance = 1e-3;

}  // namespace geosynth::gen
