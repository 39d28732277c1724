#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "geosynth/diffnet.hpp"
#include "geosynth/spline.hpp"

namespace geosynth::flow {

using nn::Matrix;
using nn::Vector;

enum class Direction { kForward, kInverse };

/// A single monotone rational-quadratic spline with its raw parameters.
struct RQSpline {
  int bins = 8;
  double half_width = 4.0;
  std::vector<double> raw;  // 3 * bins - 1 values

  static RQSpline identity(int bins, double half_width);
};

struct SplineEval {
  double y = 0.0;
  double log_abs_derivative = 0.0;
};

SplineEval rq_spline_apply(double x, const RQSpline& spline, Direction direction);

struct FlowArch {
  int layers = 8;
  int bins = 8;
  double bound = 4.0;
  std::vector<int> hidden{64, 64};

  void validate() const;
  nlohmann::json to_json() const;
  static FlowArch from_json(const nlohmann::json& j);
  static FlowArch from_json(const nlohmann::json& j, FlowArch defaults);
};

/// Per-coordinate standardization applied before the coupling layers.
struct CoordScaler {
  std::array<double, 2> mean{0.0, 0.0};
  std::array<double, 2> stddev{1.0, 1.0};

  static CoordScaler fit(const Matrix& coords);
};

struct LatentResult {
  Matrix latent;  // N x 2
  Vector logdet;  // log |det d latent / d coords| per row
};

/// Two-dimensional spline coupling flow. Layer i transforms coordinate
/// i % 2 conditioned on the other one. The data-to-latent direction evaluates
/// the rational-quadratic splines; the latent-to-data direction inverts them.
class FlowModel {
 public:
  FlowModel() = default;
  /// Glorot-initialized conditioners; with identity_init the output layers
  /// are zeroed so every spline starts as the identity.
  FlowModel(const FlowArch& arch, const CoordScaler& scaler, std::uint64_t seed, bool identity_init = false);

  const FlowArch& arch() const { return arch_; }
  const CoordScaler& scaler() const { return scaler_; }
  const nn::ParamStore& params() const { return params_; }
  nn::ParamStore& params() { return params_; }

  LatentResult coords_to_latent(const Matrix& coords) const;
  Matrix latent_to_coords(const Matrix& latent) const;
  /// Same as latent_to_coords, also returning log |det d coords / d latent|.
  LatentResult latent_to_coords_with_logdet(const Matrix& latent) const;
  Vector log_likelihood(const Matrix& coords) const;

  /// Mean negative log-likelihood of `coords`; accumulates parameter gradients.
  double nll_backward(const Matrix& coords);

  nlohmann::json to_json() const;
  static FlowModel from_json(const nlohmann::json& j);

 private:
  struct Layer {
    int transformed = 0;
    nn::DenseNet conditioner;
  };
  Matrix standardize(const Matrix& coords) const;

  FlowArch arch_;
  CoordScaler scaler_;
  nn::ParamStore params_;
  std::vector<Layer> layers_;
  std::uint64_t seed_ = 0;
};

struct FlowTraining {
  FlowModel model;
  nn::LossHistory history;
};

/// Maximum-likelihood training on raw coordinates (N x 2, lon/lat order).
FlowTraining train_flow(const Matrix& coords, const nn::TrainConfig& config, const FlowArch& arch);

inline constexpr std::size_t kMinFlowSamples = 100;

}  // namespace geosynth::flow
