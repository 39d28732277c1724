#include "geosynth/vae.hpp"

#include <algorithm>
#include <cmath>

#include "geosynth/error.hpp"

namespace geosynth::vae {

void LossWeights::validate() const {
  if (!(alpha_kl > 0.0)) fail(ErrorCode::kConfig, "alpha_kl must be positive");
  if (!(alpha_r > alpha_kl)) fail(ErrorCode::kConfig, "loss weights must satisfy alpha_r > alpha_kl");
  if (!(alpha_geo > alpha_r)) fail(ErrorCode::kConfig, "loss weights must satisfy alpha_geo > alpha_r");
}

nlohmann::json LossWeights::to_json() const {
  return {{"alpha_geo", alpha_geo}, {"alpha_r", alpha_r}, {"alpha_kl", alpha_kl}};
}

LossWeights LossWeights::from_json(const nlohmann::json& j) {
  LossWeights w;
  w.alpha_geo = j.value("alpha_geo", w.alpha_geo);
  w.alpha_r = j.value("alpha_r", w.alpha_r);
  w.alpha_kl = j.value("alpha_kl", w.alpha_kl);
  w.validate();
  return w;
}

int VaeArch::resolved_latent_dim(int columns) const {
  if (latent_dim > 0) return latent_dim;
  return std::max(2, (columns + 3) / 4);
}

nlohmann::json VaeArch::to_json() const {
  return {{"latent_dim", latent_dim}, {"encoder_hidden", encoder_hidden}, {"decoder_hidden", decoder_hidden}};
}

VaeArch VaeArch::from_json(const nlohmann::json& j) {
  VaeArch a;
  a.latent_dim = j.value("latent_dim", a.latent_dim);
  a.encoder_hidden = j.value("encoder_hidden", a.encoder_hidden);
  a.decoder_hidden = j.value("decoder_hidden", a.decoder_hidden);
  if (a.latent_dim < 0) fail(ErrorCode::kConfig, "latent_dim must be non-negative");
  return a;
}

VaeModel::VaeModel(int columns, std::vector<int> geo_columns, const VaeArch& arch, const LossWeights& weights,
                   std::uint64_t seed)
    : columns_(columns), geo_columns_(std::move(geo_columns)), arch_(arch), weights_(weights), seed_(seed) {
  weights_.validate();
  if (columns_ < 1) fail(ErrorCode::kConfig, "VAE needs at least one input column");
  latent_dim_ = arch_.resolved_latent_dim(columns_);
  if (latent_dim_ >= columns_)
    fail(ErrorCode::kConfig, "VAE latent dimension " + std::to_string(latent_dim_) +
                                 " must be smaller than the column count " + std::to_string(columns_));
  std::sort(geo_columns_.begin(), geo_columns_.end());
  for (int c : geo_columns_)
    if (c < 0 || c >= columns_) fail(ErrorCode::kConfig, "geographic column index out of range");
  if (std::adjacent_find(geo_columns_.begin(), geo_columns_.end()) != geo_columns_.end())
    fail(ErrorCode::kConfig, "duplicate geographic column index");

  Rng rng = make_rng(derive_seed(seed, 0xbae));
  std::vector<int> enc{columns_};
  enc.insert(enc.end(), arch_.encoder_hidden.begin(), arch_.encoder_hidden.end());
  enc.push_back(2 * latent_dim_);
  std::vector<int> dec{latent_dim_};
  dec.insert(dec.end(), arch_.decoder_hidden.begin(), arch_.decoder_hidden.end());
  dec.push_back(columns_);
  encoder_ = nn::DenseNet(params_, "encoder", enc, nn::Activation::kRelu, nn::OutputActivation::kIdentity, rng);
  decoder_ = nn::DenseNet(params_, "decoder", dec, nn::Activation::kRelu, nn::OutputActivation::kIdentity, rng);
}

std::pair<Matrix, Matrix> VaeModel::encode(const Matrix& batch) const {
  const Matrix out = encoder_.forward(params_, batch);
  return {out.leftCols(latent_dim_), out.rightCols(latent_dim_)};
}

Matrix VaeModel::decode(const Matrix& latent) const { return decoder_.forward(params_, latent); }

VaeLossBreakdown VaeModel::loss(const Matrix& batch, std::uint64_t seed, bool accumulate) {
  if (batch.cols() != columns_) fail(ErrorCode::kShape, "VAE batch width does not match the model");
  const Eigen::Index b = batch.rows();
  const int k = latent_dim_;
  VaeLossBreakdown out;
  if (b == 0) return out;

  nn::DenseTape enc_tape;
  nn::DenseTape dec_tape;
  const Matrix enc = encoder_.forward(params_, batch, accumulate ? &enc_tape : nullptr);
  const Matrix mu = enc.leftCols(k);
  const Matrix logvar = enc.rightCols(k);
  const Matrix sigma = (0.5 * logvar.array()).exp().matrix();

  Matrix eps(b, k);
  Rng rng = make_rng(seed);
  for (Eigen::Index i = 0; i < b; ++i)
    for (int j = 0; j < k; ++j) eps(i, j) = standard_normal(rng);
  const Matrix z = mu + sigma.cwiseProduct(eps);
  const Matrix recon = decoder_.forward(params_, z, accumulate ? &dec_tape : nullptr);

  Vector col_weight = Vector::Constant(columns_, weights_.alpha_r);
  std::vector<bool> is_geo(static_cast<std::size_t>(columns_), false);
  for (int c : geo_columns_) {
    is_geo[static_cast<std::size_t>(c)] = true;
    col_weight(c) = weights_.alpha_geo;
  }
  const Matrix diff = recon - batch;
  const double inv_b = 1.0 / static_cast<double>(b);
  for (int c = 0; c < columns_; ++c) {
    const double s = diff.col(c).squaredNorm() * inv_b;
    (is_geo[static_cast<std::size_t>(c)] ? out.l_geo : out.l_r) += s;
  }
  const Matrix var = logvar.array().exp().matrix();
  out.l_kl = 0.5 * (mu.array().square() + var.array() - logvar.array() - 1.0).sum() * inv_b;
  out.total = weights_.alpha_geo * out.l_geo + weights_.alpha_r * out.l_r + weights_.alpha_kl * out.l_kl;
  if (!std::isfinite(out.total)) fail(ErrorCode::kNumeric, "VAE loss is not finite");
  if (!accumulate) return out;

  const Matrix grad_recon = (2.0 * inv_b) * (diff.array().rowwise() * col_weight.transpose().array()).matrix();
  const Matrix grad_z = decoder_.backward(params_, dec_tape, grad_recon);
  const double kl = weights_.alpha_kl * inv_b;
  Matrix grad_enc(b, 2 * k);
  grad_enc.leftCols(k) = grad_z + kl * mu;
  grad_enc.rightCols(k) = (grad_z.array() * eps.array() * 0.5 * sigma.array() + kl * 0.5 * (var.array() - 1.0)).matrix();
  encoder_.backward(params_, enc_tape, grad_enc);
  return out;
}

Matrix VaeModel::sample(std::size_t n, std::uint64_t seed) const {
  if (n == 0) return Matrix(0, columns_);
  Matrix z(static_cast<Eigen::Index>(n), latent_dim_);
  Rng rng = make_rng(seed);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (int j = 0; j < latent_dim_; ++j) z(i, j) = standard_normal(rng);
  return decode(z);
}

nlohmann::json VaeModel::to_json() const {
  return {{"type", "vae"},
          {"columns", columns_},
          {"latent_dim", latent_dim_},
          {"geo_columns", geo_columns_},
          {"arch", arch_.to_json()},
          {"weights", weights_.to_json()},
          {"seed", seed_},
          {"params", params_.to_json()}};
}

VaeModel VaeModel::from_json(const nlohmann::json& j) {
  VaeArch arch = VaeArch::from_json(j.at("arch"));
  arch.latent_dim = j.at("latent_dim").get<int>();
  VaeModel m(j.at("columns").get<int>(), j.at("geo_columns").get<std::vector<int>>(), arch,
             LossWeights::from_json(j.at("weights")), j.at("seed").get<std::uint64_t>());
  m.arch_ = VaeArch::from_json(j.at("arch"));
  m.params_.load_json(j.at("params"));
  return m;
}

VaeLossBreakdown vae_loss(VaeModel& model, const Matrix& batch, std::uint64_t seed) { return model.loss(batch, seed); }

Matrix vae_sample(const VaeModel& model, std::size_t n, std::uint64_t seed) { return model.sample(n, seed); }

VaeTraining train_vae(const Matrix& data, const std::vector<int>& geo_columns, const nn::TrainConfig& config,
                      const VaeArch& arch, const LossWeights& weights) {
  if (static_cast<std::size_t>(data.rows()) < kMinVaeSamples)
    fail(ErrorCode::kTooFewSamples, "VAE training needs at least 100 rows");
  if (!data.allFinite()) fail(ErrorCode::kData, "VAE training data contains non-finite values");
  VaeTraining out{VaeModel(static_cast<int>(data.cols()), geo_columns, arch, weights, config.seed), {}, {}};
  VaeLossBreakdown acc;
  std::size_t current_epoch = 0;
  double rows = 0.0;
  auto flush = [&] {
    if (rows == 0.0) return;
    out.epoch_breakdown.push_back({acc.l_geo / rows, acc.l_r / rows, acc.l_kl / rows, acc.total / rows});
    acc = {};
    rows = 0.0;
  };
  auto objective = [&](const Matrix& batch, const nn::BatchInfo& info) {
    if (info.epoch != current_epoch) {
      flush();
      current_epoch = info.epoch;
    }
    const auto l = out.model.loss(batch, info.seed);
    const double w = static_cast<double>(batch.rows());
    acc.l_geo += w * l.l_geo;
    acc.l_r += w * l.l_r;
    acc.l_kl += w * l.l_kl;
    acc.total += w * l.total;
    rows += w;
    return l.total;
  };
  out.history = nn::train_loop(out.model.params(), objective, data, config);
  flush();
  return out;
}

}  // namespace geosynth::vae
