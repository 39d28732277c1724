#include "geosynth/flow.hpp"

#include <cmath>
#include <numbers>

#include "geosynth/error.hpp"
#include "geosynth/hexfloat.hpp"

namespace geosynth::flow {

RQSpline RQSpline::identity(int bins, double half_width) {
  RQSpline s;
  s.bins = bins;
  s.half_width = half_width;
  s.raw.assign(static_cast<std::size_t>(spline_param_count(bins)), 0.0);
  for (int i = 0; i + 1 < bins; ++i) s.raw[static_cast<std::size_t>(2 * bins + i)] = identity_derivative_param();
  return s;
}

SplineEval rq_spline_apply(double x, const RQSpline& spline, Direction direction) {
  if (spline.raw.size() != static_cast<std::size_t>(spline_param_count(spline.bins)))
    fail(ErrorCode::kShape, "spline parameter count does not match bin count");
  const auto knots = make_knots<double>(spline.raw, spline.bins, spline.half_width);
  if (direction == Direction::kForward) {
    const auto [y, ld] = rq_forward(x, knots, spline.half_width);
    return {y, ld};
  }
  const auto [y, ld] = rq_inverse(x, knots, spline.half_width);
  return {y, ld};
}

void FlowArch::validate() const {
  if (layers < 1) fail(ErrorCode::kConfig, "flow needs at least one coupling layer");
  if (bins < 2) fail(ErrorCode::kConfig, "spline needs at least two bins");
  if (!(bound > 0.0)) fail(ErrorCode::kConfig, "spline bound must be positive");
  if (kMinBinFraction * bins >= 1.0) fail(ErrorCode::kConfig, "too many bins for the minimum bin size");
  for (int h : hidden)
    if (h < 1) fail(ErrorCode::kConfig, "hidden widths must be positive");
}

nlohmann::json FlowArch::to_json() const {
  return {{"layers", layers}, {"bins", bins}, {"bound", bound}, {"hidden", hidden}};
}

FlowArch FlowArch::from_json(const nlohmann::json& j) { return from_json(j, FlowArch{}); }

FlowArch FlowArch::from_json(const nlohmann::json& j, FlowArch a) {
  a.layers = j.value("layers", a.layers);
  a.bins = j.value("bins", a.bins);
  a.bound = j.value("bound", a.bound);
  a.hidden = j.value("hidden", a.hidden);
  a.validate();
  return a;
}

CoordScaler CoordScaler::fit(const Matrix& coords) {
  CoordScaler s;
  const double n = static_cast<double>(coords.rows());
  for (int c = 0; c < 2; ++c) {
    const double mean = coords.col(c).mean();
    const double var = (coords.col(c).array() - mean).square().sum() / std::max(n - 1.0, 1.0);
    s.mean[static_cast<std::size_t>(c)] = mean;
    s.stddev[static_cast<std::size_t>(c)] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

FlowModel::FlowModel(const FlowArch& arch, const CoordScaler& scaler, std::uint64_t seed, bool identity_init)
    : arch_(arch), scaler_(scaler), seed_(seed) {
  arch_.validate();
  Rng rng = make_rng(derive_seed(seed, 0xf10));
  const int out = spline_param_count(arch_.bins);
  for (int l = 0; l < arch_.layers; ++l) {
    std::vector<int> widths{1};
    widths.insert(widths.end(), arch_.hidden.begin(), arch_.hidden.end());
    widths.push_back(out);
    Layer layer;
    layer.transformed = l % 2;
    layer.conditioner = nn::DenseNet(params_, "layer" + std::to_string(l) + ".cond", widths, nn::Activation::kRelu,
                                     nn::OutputActivation::kIdentity, rng);
    const std::size_t last = layer.conditioner.layer_count() - 1;
    if (identity_init) params_.mutable_value(layer.conditioner.weight_id(last)).setZero();
    auto& bias = params_.mutable_value(layer.conditioner.bias_id(last));
    for (int i = 0; i + 1 < arch_.bins; ++i) bias(0, 2 * arch_.bins + i) = identity_derivative_param();
    layers_.push_back(std::move(layer));
  }
}

Matrix FlowModel::standardize(const Matrix& coords) const {
  if (coords.cols() != 2) fail(ErrorCode::kShape, "flow expects two coordinate columns");
  if (!coords.allFinite()) fail(ErrorCode::kData, "flow input contains non-finite coordinates");
  Matrix u(coords.rows(), 2);
  for (int c = 0; c < 2; ++c)
    u.col(c) = (coords.col(c).array() - scaler_.mean[static_cast<std::size_t>(c)]) /
               scaler_.stddev[static_cast<std::size_t>(c)];
  return u;
}

LatentResult FlowModel::coords_to_latent(const Matrix& coords) const {
  Matrix u = standardize(coords);
  Vector logdet = Vector::Constant(u.rows(), -std::log(scaler_.stddev[0]) - std::log(scaler_.stddev[1]));
  const auto p = static_cast<std::size_t>(spline_param_count(arch_.bins));
  for (const auto& layer : layers_) {
    const int t = layer.transformed;
    const Matrix params = layer.conditioner.forward(params_, u.col(1 - t));
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      const Eigen::RowVectorXd row = params.row(r);
      const auto knots = make_knots<double>(std::span<const double>(row.data(), p), arch_.bins, arch_.bound);
      const auto [y, ld] = rq_forward(u(r, t), knots, arch_.bound);
      u(r, t) = y;
      logdet(r) += ld;
    }
  }
  return {std::move(u), std::move(logdet)};
}

LatentResult FlowModel::latent_to_coords_with_logdet(const Matrix& latent) const {
  if (latent.cols() != 2) fail(ErrorCode::kShape, "flow expects two latent columns");
  Matrix u = latent;
  Vector logdet = Vector::Constant(u.rows(), std::log(scaler_.stddev[0]) + std::log(scaler_.stddev[1]));
  const auto p = static_cast<std::size_t>(spline_param_count(arch_.bins));
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    const int t = it->transformed;
    const Matrix params = it->conditioner.forward(params_, u.col(1 - t));
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      const Eigen::RowVectorXd row = params.row(r);
      const auto knots = make_knots<double>(std::span<const double>(row.data(), p), arch_.bins, arch_.bound);
      const auto [x, ld] = rq_inverse(u(r, t), knots, arch_.bound);
      u(r, t) = x;
      logdet(r) += ld;
    }
  }
  for (int c = 0; c < 2; ++c)
    u.col(c) = u.col(c).array() * scaler_.stddev[static_cast<std::size_t>(c)] + scaler_.mean[static_cast<std::size_t>(c)];
  return {std::move(u), std::move(logdet)};
}

Matrix FlowModel::latent_to_coords(const Matrix& latent) const { return latent_to_coords_with_logdet(latent).latent; }

Vector FlowModel::log_likelihood(const Matrix& coords) const {
  const auto res = coords_to_latent(coords);
  const double log_norm = -std::log(2.0 * std::numbers::pi);
  return (log_norm - 0.5 * res.latent.rowwise().squaredNorm().array() + res.logdet.array()).matrix();
}

double FlowModel::nll_backward(const Matrix& coords) {
  const Eigen::Index n = coords.rows();
  if (n == 0) return 0.0;
  const auto p = static_cast<std::size_t>(spline_param_count(arch_.bins));
  Matrix u = standardize(coords);
  Vector logdet = Vector::Constant(n, -std::log(scaler_.stddev[0]) - std::log(scaler_.stddev[1]));

  std::vector<Matrix> inputs;
  std::vector<Matrix> spline_params;
  std::vector<nn::DenseTape> tapes(layers_.size());
  inputs.reserve(layers_.size());
  spline_params.reserve(layers_.size());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    const int t = layer.transformed;
    inputs.push_back(u);
    Matrix params = layer.conditioner.forward(params_, u.col(1 - t), &tapes[l]);
    for (Eigen::Index r = 0; r < n; ++r) {
      const Eigen::RowVectorXd row = params.row(r);
      const auto knots = make_knots<double>(std::span<const double>(row.data(), p), arch_.bins, arch_.bound);
      const auto [y, ld] = rq_forward(u(r, t), knots, arch_.bound);
      u(r, t) = y;
      logdet(r) += ld;
    }
    spline_params.push_back(std::move(params));
  }

  const double log2pi = std::log(2.0 * std::numbers::pi);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double nll = (log2pi + 0.5 * u.rowwise().squaredNorm().array() - logdet.array()).mean();

  Matrix grad = u * inv_n;  // d nll / d latent
  const double grad_logdet = -inv_n;
  nn::ScalarTape tape;
  std::vector<nn::Var> raw(p);
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    const int t = layer.transformed;
    const Matrix& in = inputs[l];
    const Matrix& params = spline_params[l];
    Matrix grad_params = Matrix::Zero(n, static_cast<Eigen::Index>(p));
    for (Eigen::Index r = 0; r < n; ++r) {
      const double x = in(r, t);
      if (x < -arch_.bound || x > arch_.bound) continue;  // identity tail: gradient passes through
      tape.clear();
      const nn::Var xv = tape.variable(x);
      for (std::size_t j = 0; j < p; ++j) raw[j] = tape.variable(params(r, static_cast<Eigen::Index>(j)));
      const auto knots = make_knots<nn::Var>(raw, arch_.bins, arch_.bound);
      const auto [y, ld] = rq_forward(xv, knots, arch_.bound);
      const std::pair<nn::Var, double> seeds[] = {{y, grad(r, t)}, {ld, grad_logdet}};
      const auto adj = tape.backward(seeds);
      grad(r, t) = adj[xv.index()];
      for (std::size_t j = 0; j < p; ++j) grad_params(r, static_cast<Eigen::Index>(j)) = adj[raw[j].index()];
    }
    const Matrix grad_cond = layer.conditioner.backward(params_, tapes[l], grad_params);
    grad.col(1 - t) += grad_cond.col(0);
  }
  return nll;
}

nlohmann::json FlowModel::to_json() const {
  return {{"type", "spline_coupling_flow"},
          {"arch", arch_.to_json()},
          {"seed", seed_},
          {"scaler",
           {{"mean", hex::encode_vector({scaler_.mean[0], scaler_.mean[1]})},
            {"std", hex::encode_vector({scaler_.stddev[0], scaler_.stddev[1]})}}},
          {"params", params_.to_json()}};
}

FlowModel FlowModel::from_json(const nlohmann::json& j) {
  CoordScaler s;
  const auto mean = hex::decode_vector(j.at("scaler").at("mean"));
  const auto sd = hex::decode_vector(j.at("scaler").at("std"));
  if (mean.size() != 2 || sd.size() != 2) fail(ErrorCode::kSchema, "flow scaler must have two entries");
  s.mean = {mean[0], mean[1]};
  s.stddev = {sd[0], sd[1]};
  FlowModel m(FlowArch::from_json(j.at("arch")), s, j.at("seed").get<std::uint64_t>());
  m.params_.load_json(j.at("params"));
  return m;
}

FlowTraining train_flow(const Matrix& coords, const nn::TrainConfig& config, const FlowArch& arch) {
  if (static_cast<std::size_t>(coords.rows()) < kMinFlowSamples)
    fail(ErrorCode::kTooFewSamples, "flow training needs at least 100 coordinate rows");
  if (coords.cols() != 2) fail(ErrorCode::kShape, "flow training expects N x 2 coordinates");
  if (!coords.allFinite()) fail(ErrorCode::kData, "flow training data contains non-finite coordinates");
  FlowTraining out{FlowModel(arch, CoordScaler::fit(coords), config.seed), {}};
  auto objective = [&](const Matrix& batch, const nn::BatchInfo&) { return out.model.nll_backward(batch); };
  out.history = nn::train_loop(out.model.params(), objective, coords, config);
  return out;
}

}  // namespace geosynth::flow
