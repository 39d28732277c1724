#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "geosynth/diffnet.hpp"

namespace geosynth::vae {

using nn::Matrix;
using nn::Vector;

/// Weights of the geographic, remaining-feature and KL terms. Construction
/// enforces alpha_geo > alpha_r > alpha_kl > 0.
struct LossWeights {
  double alpha_geo = 10.0;
  double alpha_r = 1.0;
  double alpha_kl = 0.1;

  void validate() const;
  nlohmann::json to_json() const;
  static LossWeights from_json(const nlohmann::json& j);
};

struct VaeArch {
  int latent_dim = 0;  // 0 picks max(2, ceil(M / 4))
  std::vector<int> encoder_hidden{128, 128};
  std::vector<int> decoder_hidden{128, 128};

  int resolved_latent_dim(int columns) const;
  nlohmann::json to_json() const;
  static VaeArch from_json(const nlohmann::json& j);
};

struct VaeLossBreakdown {
  double l_geo = 0.0;
  double l_r = 0.0;
  double l_kl = 0.0;
  double total = 0.0;
};

class VaeModel {
 public:
  VaeModel() = default;
  /// `geo_columns` lists the encoded columns scored by the geographic term.
  VaeModel(int columns, std::vector<int> geo_columns, const VaeArch& arch, const LossWeights& weights,
           std::uint64_t seed);

  int columns() const { return columns_; }
  int latent_dim() const { return latent_dim_; }
  const std::vector<int>& geo_columns() const { return geo_columns_; }
  const LossWeights& weights() const { return weights_; }
  const VaeArch& arch() const { return arch_; }
  const nn::ParamStore& params() const { return params_; }
  nn::ParamStore& params() { return params_; }
  const nn::DenseNet& encoder() const { return encoder_; }
  const nn::DenseNet& decoder() const { return decoder_; }

  /// Loss of one batch with reparameterization noise drawn from `seed`.
  /// Accumulates parameter gradients when `accumulate` is set.
  VaeLossBreakdown loss(const Matrix& batch, std::uint64_t seed, bool accumulate = true);

  /// Encoder mean and log-variance, each B x k.
  std::pair<Matrix, Matrix> encode(const Matrix& batch) const;
  Matrix decode(const Matrix& latent) const;
  /// Decoder applied to n seeded standard-normal draws.
  Matrix sample(std::size_t n, std::uint64_t seed) const;

  nlohmann::json to_json() const;
  static VaeModel from_json(const nlohmann::json& j);

 private:
  int columns_ = 0;
  int latent_dim_ = 0;
  std::vector<int> geo_columns_;
  VaeArch arch_;
  LossWeights weights_;
  std::uint64_t seed_ = 0;
  nn::ParamStore params_;
  nn::DenseNet encoder_;
  nn::DenseNet decoder_;
};

/// Free-function forms of the model operations.
VaeLossBreakdown vae_loss(VaeModel& model, const Matrix& batch, std::uint64_t seed);
Matrix vae_sample(const VaeModel& model, std::size_t n, std::uint64_t seed);

struct VaeTraining {
  VaeModel model;
  nn::LossHistory history;
  std::vector<VaeLossBreakdown> epoch_breakdown;  // row-weighted epoch means
};

inline constexpr std::size_t kMinVaeSamples = 100;

VaeTraining train_vae(const Matrix& data, const std::vector<int>& geo_columns, const nn::TrainConfig& config,
                      const VaeArch& arch, const LossWeights& weights);

}  // namespace geosynth::vae
