#include "geosynth/diffnet.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "geosynth/autodiff.hpp"
#include "geosynth/error.hpp"
#include "geosynth/hexfloat.hpp"

namespace geosynth::nn {

std::size_t ParamStore::add(std::string name, Matrix init) {
  if (find(name)) fail(ErrorCode::kConfig, "duplicate parameter '" + name + "'");
  Entry e;
  e.name = std::move(name);
  e.grad = Matrix::Zero(init.rows(), init.cols());
  e.m = e.grad;
  e.v = e.grad;
  e.value = std::move(init);
  entries_.push_back(std::move(e));
  ++version_;
  return entries_.size() - 1;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

std::optional<std::size_t> ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return i;
  return std::nullopt;
}

Matrix& ParamStore::mutable_value(std::size_t i) {
  ++version_;
  return entries_[i].value;
}

void ParamStore::zero_grads() {
  for (auto& e : entries_) e.grad.setZero();
}

double ParamStore::grad_norm() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.grad.squaredNorm();
  return std::sqrt(s);
}

bool ParamStore::grads_finite() const {
  for (const auto& e : entries_)
    if (!e.grad.allFinite()) return false;
  return true;
}

nlohmann::json ParamStore::to_json() const {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& e : entries_) {
    auto m = hex::encode_matrix(e.value);
    m["name"] = e.name;
    params.push_back(std::move(m));
  }
  return params;
}

void ParamStore::load_json(const nlohmann::json& j) {
  if (j.size() != entries_.size()) fail(ErrorCode::kSchema, "checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& item = j[i];
    if (item.at("name").get<std::string>() != entries_[i].name)
      fail(ErrorCode::kSchema, "checkpoint parameter name mismatch at '" + entries_[i].name + "'");
    Matrix m = hex::decode_matrix(item);
    if (m.rows() != entries_[i].value.rows() || m.cols() != entries_[i].value.cols())
      fail(ErrorCode::kSchema, "checkpoint shape mismatch for '" + entries_[i].name + "'");
    entries_[i].value = std::move(m);
  }
  ++version_;
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& x = a.entries_[i];
    const auto& y = b.entries_[i];
    if (x.name != y.name || x.value.rows() != y.value.rows() || x.value.cols() != y.value.cols()) return false;
    if (!(x.value.array() == y.value.array()).all()) return false;
  }
  return true;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) fail(ErrorCode::kConfig, "learning rate must be positive");
  if (batch_size < 1) fail(ErrorCode::kConfig, "batch size must be at least 1");
  if (epochs < 1) fail(ErrorCode::kConfig, "epochs must be at least 1");
  if (clip_norm && !(*clip_norm > 0.0)) fail(ErrorCode::kConfig, "gradient clip norm must be positive");
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j{{"learning_rate", learning_rate}, {"batch_size", batch_size}, {"epochs", epochs},
                   {"seed", seed},                   {"beta1", beta1},           {"beta2", beta2},
                   {"epsilon", epsilon}};
  j["clip_norm"] = clip_norm ? nlohmann::json(*clip_norm) : nlohmann::json(nullptr);
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) { return from_json(j, TrainConfig{}); }

TrainConfig TrainConfig::from_json(const nlohmann::json& j, TrainConfig c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  if (j.contains("clip_norm")) {
    if (j.at("clip_norm").is_null()) c.clip_norm.reset();
    else c.clip_norm = j.at("clip_norm").get<double>();
  }
  c.validate();
  return c;
}

struct AdamAccess {
  static void step(ParamStore& store, const TrainConfig& cfg) {
    double clip = 1.0;
    if (cfg.clip_norm) {
      const double norm = store.grad_norm();
      if (norm > *cfg.clip_norm) clip = *cfg.clip_norm / norm;
    }
    ++store.step_;
    const double t = static_cast<double>(store.step_);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (auto& e : store.entries_) {
      const auto g = (e.grad.array() * clip).eval();
      e.m.array() = cfg.beta1 * e.m.array() + (1.0 - cfg.beta1) * g;
      e.v.array() = cfg.beta2 * e.v.array() + (1.0 - cfg.beta2) * g.square();
      e.value.array() -= cfg.learning_rate * (e.m.array() / c1) / ((e.v.array() / c2).sqrt() + cfg.epsilon);
    }
    ++store.version_;
  }
};

void adam_step(ParamStore& store, const TrainConfig& config) { AdamAccess::step(store, config); }

DenseNet::DenseNet(ParamStore& store, const std::string& prefix, std::vector<int> widths, Activation hidden,
                   OutputActivation output, Rng& rng)
    : widths_(std::move(widths)), hidden_(hidden), output_(output) {
  if (widths_.size() < 2) fail(ErrorCode::kConfig, "a dense net needs at least input and output widths");
  for (int w : widths_)
    if (w < 1) fail(ErrorCode::kConfig, "layer widths must be positive");
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int fan_in = widths_[l];
    const int fan_out = widths_[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Matrix w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -bound, bound);
    weights_.push_back(store.add(prefix + ".w" + std::to_string(l), std::move(w)));
    biases_.push_back(store.add(prefix + ".b" + std::to_string(l), Matrix::Zero(1, fan_out)));
  }
}

namespace {

void activate(Matrix& m, Activation a) {
  if (a == Activation::kRelu) m = m.cwiseMax(0.0);
  else m = m.array().tanh().matrix();
}

void activate_output(Matrix& m, OutputActivation a) {
  if (a == OutputActivation::kSoftplus)
    m = m.unaryExpr([](double x) { return softplus(x); }).eval();
}

}  // namespace

Matrix DenseNet::forward(const ParamStore& store, const Matrix& input, DenseTape* tape) const {
  if (static_cast<std::size_t>(input.cols()) != in_dim()) {
    std::ostringstream os;
    os << "dense net expects " << in_dim() << " input columns, got " << input.cols();
    fail(ErrorCode::kShape, os.str());
  }
  if (tape) {
    tape->inputs.clear();
    tape->pre.clear();
    tape->version = store.version();
    tape->store = &store;
  }
  Matrix h = input;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix z = h * store.value(weights_[l]);
    z.rowwise() += store.value(biases_[l]).row(0);
    if (tape) {
      tape->inputs.push_back(std::move(h));
      tape->pre.push_back(z);
    }
    if (l + 1 < weights_.size()) activate(z, hidden_);
    else activate_output(z, output_);
    h = std::move(z);
  }
  return h;
}

Matrix DenseNet::backward(ParamStore& store, const DenseTape& tape, const Matrix& grad_output) const {
  if (tape.store != &store || tape.version != store.version())
    fail(ErrorCode::kStaleTape, "tape was recorded before the last parameter update");
  if (tape.pre.size() != weights_.size()) fail(ErrorCode::kShape, "tape does not belong to this network");
  Matrix g = grad_output;
  for (std::size_t l = weights_.size(); l-- > 0;) {
    const Matrix& z = tape.pre[l];
    if (g.rows() != z.rows() || g.cols() != z.cols()) fail(ErrorCode::kShape, "gradient shape mismatch in backward");
    if (l + 1 == weights_.size()) {
      if (output_ == OutputActivation::kSoftplus)
        g.array() *= z.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); }).array();
    } else if (hidden_ == Activation::kRelu) {
      g.array() *= (z.array() > 0.0).cast<double>();
    } else {
      g.array() *= 1.0 - z.array().tanh().square();
    }
    store.grad(weights_[l]).noalias() += tape.inputs[l].transpose() * g;
    store.grad(biases_[l]) += g.colwise().sum();
    g = (g * store.value(weights_[l]).transpose()).eval();
  }
  return g;
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

LossHistory train_loop(ParamStore& store, const Objective& objective, const Matrix& data, const TrainConfig& config) {
  config.validate();
  if (data.rows() == 0) fail(ErrorCode::kData, "training data is empty");
  const auto n = static_cast<std::size_t>(data.rows());
  const std::size_t batch = std::min(config.batch_size, n);
  LossHistory history;
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(derive_seed(config.seed, 0x7a1, epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    double total = 0.0;
    std::size_t b = 0;
    for (std::size_t start = 0; start < n; start += batch, ++b) {
      const std::size_t end = std::min(start + batch, n);
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
      const Matrix xb = gather_rows(data, idx);
      store.zero_grads();
      const BatchInfo info{epoch, b, derive_seed(config.seed, 0xba7c4, epoch * 1'000'003ULL + b)};
      const double loss = objective(xb, info);
      if (!std::isfinite(loss) || !store.grads_finite()) {
        std::ostringstream os;
        os << "non-finite " << (std::isfinite(loss) ? "gradient" : "loss") << " at epoch " << epoch << ", batch " << b;
        fail(ErrorCode::kNumeric, os.str());
      }
      adam_step(store, config);
      total += loss * static_cast<double>(end - start);
    }
    history.epoch_loss.push_back(total / static_cast<double>(n));
  }
  return history;
}

}  // namespace geosynth::nn
