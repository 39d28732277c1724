#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "geosynth/random.hpp"

namespace geosynth::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Named parameter arrays with gradient and Adam moment buffers.
/// `version()` changes whenever parameter values are mutated, which lets
/// backward passes detect tapes recorded against older values.
class ParamStore {
 public:
  std::size_t add(std::string name, Matrix init);

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  const std::string& name(std::size_t i) const { return entries_[i].name; }
  std::optional<std::size_t> find(const std::string& name) const;

  const Matrix& value(std::size_t i) const { return entries_[i].value; }
  /// Mutable access bumps the version.
  Matrix& mutable_value(std::size_t i);
  const Matrix& grad(std::size_t i) const { return entries_[i].grad; }
  Matrix& grad(std::size_t i) { return entries_[i].grad; }

  void zero_grads();
  double grad_norm() const;
  bool grads_finite() const;

  std::uint64_t version() const { return version_; }
  std::uint64_t step() const { return step_; }

  /// Parameters only; optimizer state is not checkpointed.
  nlohmann::json to_json() const;
  /// Replaces values of an identically shaped store (names must match).
  void load_json(const nlohmann::json& j);

  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  friend struct AdamAccess;
  struct Entry {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix m;
    Matrix v;
  };
  std::vector<Entry> entries_;
  std::uint64_t version_ = 0;
  std::uint64_t step_ = 0;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  std::optional<double> clip_norm = 5.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig from_json(const nlohmann::json& j, TrainConfig defaults);
};

/// Bias-corrected Adam over every parameter. Clips the global gradient norm
/// first when `clip_norm` is set. Does not zero gradients.
void adam_step(ParamStore& store, const TrainConfig& config);

enum class Activation { kRelu, kTanh };
enum class OutputActivation { kIdentity, kSoftplus };

/// Intermediates of one DenseNet forward pass.
struct DenseTape {
  std::vector<Matrix> inputs;  // input of every layer
  std::vector<Matrix> pre;     // affine output of every layer
  std::uint64_t version = 0;
  const ParamStore* store = nullptr;
};

/// Multilayer perceptron whose weights live in a ParamStore. Rows of the
/// input are batch elements.
class DenseNet {
 public:
  DenseNet() = default;
  /// Registers parameters "<prefix>.w<l>" / "<prefix>.b<l>" with Glorot
  /// uniform weights and zero biases.
  DenseNet(ParamStore& store, const std::string& prefix, std::vector<int> widths, Activation hidden,
           OutputActivation output, Rng& rng);

  std::size_t in_dim() const { return static_cast<std::size_t>(widths_.front()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(widths_.back()); }
  std::size_t layer_count() const { return weights_.size(); }
  const std::vector<int>& widths() const { return widths_; }
  std::size_t weight_id(std::size_t layer) const { return weights_[layer]; }
  std::size_t bias_id(std::size_t layer) const { return biases_[layer]; }

  Matrix forward(const ParamStore& store, const Matrix& input, DenseTape* tape = nullptr) const;

  /// Accumulates parameter gradients for d(loss)/d(output) = grad_output and
  /// returns d(loss)/d(input).
  Matrix backward(ParamStore& store, const DenseTape& tape, const Matrix& grad_output) const;

 private:
  std::vector<int> widths_;
  std::vector<std::size_t> weights_;
  std::vector<std::size_t> biases_;
  Activation hidden_ = Activation::kRelu;
  OutputActivation output_ = OutputActivation::kIdentity;
};

struct BatchInfo {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  std::uint64_t seed = 0;  // per-batch seed derived from TrainConfig::seed
};

/// Computes the mean loss of a batch and accumulates its gradients.
using Objective = std::function<double(const Matrix& batch, const BatchInfo& info)>;

struct LossHistory {
  std::vector<double> epoch_loss;
};

/// Seeded mini-batch training: shuffles rows each epoch, zeroes gradients,
/// calls the objective, and takes an Adam step per batch. Throws a numeric
/// error naming the epoch and batch on a non-finite loss or gradient.
LossHistory train_loop(ParamStore& store, const Objective& objective, const Matrix& data, const TrainConfig& config);

/// Rows `idx` of `m`.
Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx);

}  // namespace geosynth::nn
