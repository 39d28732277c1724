#include "geosynth/generators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "geosynth/error.hpp"
#include "geosynth/hexfloat.hpp"
#include "geosynth/stats.hpp"

namespace geosynth::gen {

namespace {

constexpr const char* kKindNames[] = {"nf_vae", "vae_only", "copula", "nf_copula", "global_shuffle", "local_shuffle"};

// Brings a continuous draw back into the column's admissible set.
double conform(const ColumnSpec& spec, double v) {
  if (spec.kind == ColumnKind::kInteger) v = std::round(v);
  if (spec.bounds) {
    double lo = spec.bounds->min;
    double hi = spec.bounds->max;
    if (spec.kind == ColumnKind::kInteger) {
      lo = std::ceil(lo);
      hi = std::floor(hi);
    }
    v = std::clamp(v, lo, hi);
  }
  if (spec.kind == ColumnKind::kLatitude) v = std::clamp(v, -90.0, 90.0);
  if (spec.kind == ColumnKind::kLongitude) v = std::clamp(v, -180.0, 180.0);
  return v;
}

// Resampled rows with coordinates drawn uniformly in the polygon of the
// source row's group.
GeoTable shuffle_rows(const GeoTable& source, const std::vector<std::size_t>& row_group,
                      const std::vector<Polygon>& polygons, std::size_t n, std::uint64_t seed) {
  if (source.empty()) fail(ErrorCode::kData, "cannot resample an empty table");
  Rng rng = make_rng(derive_seed(seed, 0x5ef));
  std::vector<std::size_t> picks(n);
  for (auto& p : picks) p = static_cast<std::size_t>(uniform_index(rng, source.rows()));
  GeoTable out = source.select(picks);

  std::vector<std::vector<std::size_t>> members(polygons.size());
  for (std::size_t i = 0; i < n; ++i) members[row_group[picks[i]]].push_back(i);
  for (std::size_t g = 0; g < polygons.size(); ++g) {
    if (members[g].empty()) continue;
    const auto pts = uniform_points_in_polygon(polygons[g], members[g].size(), derive_seed(seed, 0x9e0, g));
    for (std::size_t k = 0; k < pts.size(); ++k) out.set_coords(members[g][k], pts[k].lon, pts[k].lat);
  }
  return out;
}

struct Groups {
  std::vector<Polygon> polygons;
  std::vector<std::size_t> row_group;
};

Groups subregion_groups(const GeoTable& source, const RegionGeometry& geom) {
  Groups g;
  std::map<std::string, std::size_t> index;
  for (const auto& [id, poly] : geom.subregions) {
    index.emplace(id, g.polygons.size());
    g.polygons.push_back(poly);
  }
  const std::size_t none = g.polygons.size();
  g.polygons.push_back(geom.region);
  const auto ids = assign_subregion(source, geom);
  g.row_group.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto it = index.find(ids[i]);
    g.row_group[i] = it == index.end() ? none : it->second;
  }
  return g;
}

nlohmann::json write_train(const nn::TrainConfig& c) { return c.to_json(); }

}  // namespace

const char* to_string(GeneratorKind kind) { return kKindNames[static_cast<int>(kind)]; }

GeneratorKind kind_from_string(const std::string& name) {
  for (int i = 0; i < 6; ++i)
    if (name == kKindNames[i]) return static_cast<GeneratorKind>(i);
  fail(ErrorCode::kConfig, "unknown generator kind '" + name + "'");
}

const std::vector<GeneratorKind>& all_kinds() {
  static const std::vector<GeneratorKind> kinds{GeneratorKind::kNfVae,     GeneratorKind::kVaeOnly,
                                                GeneratorKind::kCopula,    GeneratorKind::kNfCopula,
                                                GeneratorKind::kGlobalShuffle, GeneratorKind::kLocalShuffle};
  return kinds;
}

bool is_neural(GeneratorKind kind) {
  return kind == GeneratorKind::kNfVae || kind == GeneratorKind::kVaeOnly || kind == GeneratorKind::kNfCopula;
}

nn::TrainConfig GeneratorConfig::default_flow_train() {
  nn::TrainConfig c;
  c.learning_rate = 5e-3;
  c.batch_size = 256;
  c.epochs = 40;
  return c;
}

nn::TrainConfig GeneratorConfig::default_vae_train() {
  nn::TrainConfig c;
  c.learning_rate = 1e-3;
  c.batch_size = 128;
  c.epochs = 60;
  return c;
}

nlohmann::json GeneratorConfig::to_json() const {
  return {{"flow", {{"arch", flow_arch.to_json()}, {"train", write_train(flow_train)}}},
          {"vae", {{"arch", vae_arch.to_json()}, {"train", write_train(vae_train)}, {"weights", weights.to_json()}}}};
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  if (j.contains("flow")) {
    const auto& f = j.at("flow");
    if (f.contains("arch")) c.flow_arch = flow::FlowArch::from_json(f.at("arch"));
    if (f.contains("train")) c.flow_train = nn::TrainConfig::from_json(f.at("train"), c.flow_train);
  }
  if (j.contains("vae")) {
    const auto& v = j.at("vae");
    if (v.contains("arch")) c.vae_arch = vae::VaeArch::from_json(v.at("arch"));
    if (v.contains("train")) c.vae_train = nn::TrainConfig::from_json(v.at("train"), c.vae_train);
    if (v.contains("weights")) c.weights = vae::LossWeights::from_json(v.at("weights"));
  }
  return c;
}

Eigen::MatrixXd repair_correlation(const Eigen::MatrixXd& c, double floor) {
  const Eigen::MatrixXd sym = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::VectorXd vals = es.eigenvalues().cwiseMax(floor);
  Eigen::MatrixXd r = es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
  const Eigen::VectorXd inv = r.diagonal().cwiseSqrt().cwiseInverse();
  r = inv.asDiagonal() * r * inv.asDiagonal();
  r = 0.5 * (r + r.transpose());
  r.diagonal().setOnes();
  return r;
}

CopulaState CopulaState::fit(const Eigen::MatrixXd& data, const std::vector<bool>& discrete) {
  const auto n = static_cast<std::size_t>(data.rows());
  const auto v = static_cast<std::size_t>(data.cols());
  if (n == 0) fail(ErrorCode::kData, "copula needs at least one row");
  if (discrete.size() != v) fail(ErrorCode::kShape, "copula discrete flags do not match the column count");
  CopulaState s;
  Eigen::MatrixXd scores(data.rows(), data.cols());
  const double dn = static_cast<double>(n);
  for (std::size_t c = 0; c < v; ++c) {
    CopulaMarginal m;
    m.discrete = discrete[c];
    const auto col = static_cast<Eigen::Index>(c);
    std::vector<double> values(data.col(col).data(), data.col(col).data() + n);
    if (!m.discrete) {
      const auto ranks = stats::average_ranks(values);
      for (std::size_t i = 0; i < n; ++i)
        scores(static_cast<Eigen::Index>(i), col) = stats::normal_quantile((ranks[i] - 0.5) / dn);
      m.sorted = values;
      std::sort(m.sorted.begin(), m.sorted.end());
    } else {
      std::map<double, std::size_t> counts;
      for (double x : values) ++counts[x];
      std::vector<std::pair<double, std::size_t>> freq(counts.begin(), counts.end());
      std::stable_sort(freq.begin(), freq.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
      std::map<double, double> midpoint;
      std::size_t acc = 0;
      for (const auto& [level, count] : freq) {
        const double lo = static_cast<double>(acc) / dn;
        acc += count;
        const double hi = static_cast<double>(acc) / dn;
        m.levels.push_back(level);
        m.upper.push_back(hi);
        midpoint[level] = stats::normal_quantile(0.5 * (lo + hi));
      }
      m.upper.back() = 1.0;
      for (std::size_t i = 0; i < n; ++i) scores(static_cast<Eigen::Index>(i), col) = midpoint[values[i]];
    }
    s.marginals.push_back(std::move(m));
  }

  Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(data.cols(), data.cols());
  if (n > 1) {
    const Eigen::MatrixXd centered = scores.rowwise() - scores.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered;
    for (Eigen::Index a = 0; a < cov.rows(); ++a)
      for (Eigen::Index b = 0; b < cov.cols(); ++b) {
        const double den = std::sqrt(cov(a, a) * cov(b, b));
        corr(a, b) = a == b ? 1.0 : (den > 0.0 ? cov(a, b) / den : 0.0);
      }
  }
  s.correlation = repair_correlation(corr);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.correlation);
  s.factor = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  return s;
}

Eigen::MatrixXd CopulaState::sample(std::size_t n, std::uint64_t seed) const {
  const auto v = static_cast<Eigen::Index>(marginals.size());
  Eigen::MatrixXd g(static_cast<Eigen::Index>(n), v);
  Rng rng = make_rng(seed);
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index c = 0; c < v; ++c) g(i, c) = standard_normal(rng);
  const Eigen::MatrixXd z = g * factor.transpose();
  Eigen::MatrixXd out(z.rows(), v);
  for (Eigen::Index c = 0; c < v; ++c) {
    const auto& m = marginals[static_cast<std::size_t>(c)];
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double u = stats::normal_cdf(z(i, c));
      if (m.discrete) {
        const auto it = std::upper_bound(m.upper.begin(), m.upper.end(), u);
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - m.upper.begin()), m.levels.size() - 1);
        out(i, c) = m.levels[k];
      } else {
        const double h = u * static_cast<double>(m.sorted.size() - 1);
        const auto lo = std::min(static_cast<std::size_t>(std::floor(h)), m.sorted.size() - 1);
        const std::size_t hi = std::min(lo + 1, m.sorted.size() - 1);
        out(i, c) = m.sorted[lo] + (h - static_cast<double>(lo)) * (m.sorted[hi] - m.sorted[lo]);
      }
    }
  }
  return out;
}

nlohmann::json CopulaState::to_json() const {
  nlohmann::json ms = nlohmann::json::array();
  for (const auto& m : marginals) {
    if (m.discrete)
      ms.push_back({{"discrete", true}, {"levels", hex::encode_vector(m.levels)}, {"upper", hex::encode_vector(m.upper)}});
    else
      ms.push_back({{"discrete", false}, {"sorted", hex::encode_vector(m.sorted)}});
  }
  return {{"marginals", ms}, {"correlation", hex::encode_matrix(correlation)}, {"factor", hex::encode_matrix(factor)}};
}

CopulaState CopulaState::from_json(const nlohmann::json& j) {
  CopulaState s;
  for (const auto& m : j.at("marginals")) {
    CopulaMarginal cm;
    cm.discrete = m.at("discrete").get<bool>();
    if (cm.discrete) {
      cm.levels = hex::decode_vector(m.at("levels"));
      cm.upper = hex::decode_vector(m.at("upper"));
      if (cm.levels.empty() || cm.levels.size() != cm.upper.size())
        fail(ErrorCode::kSchema, "copula discrete marginal is malformed");
    } else {
      cm.sorted = hex::decode_vector(m.at("sorted"));
      if (cm.sorted.empty()) fail(ErrorCode::kSchema, "copula continuous marginal is empty");
    }
    s.marginals.push_back(std::move(cm));
  }
  s.correlation = hex::decode_matrix(j.at("correlation"));
  s.factor = hex::decode_matrix(j.at("factor"));
  const auto v = static_cast<Eigen::Index>(s.marginals.size());
  if (s.correlation.rows() != v || s.correlation.cols() != v || s.factor.rows() != v || s.factor.cols() != v)
    fail(ErrorCode::kSchema, "copula matrices do not match the marginal count");
  return s;
}

Eigen::MatrixXd FittedGenerator::model_matrix(const GeoTable& data) const {
  const std::size_t lon = schema_.longitude();
  const std::size_t lat = schema_.latitude();
  Eigen::MatrixXd coords = data.coords();
  if (flow_) coords = flow_->coords_to_latent(coords).latent;

  if (kind_ == GeneratorKind::kCopula || kind_ == GeneratorKind::kNfCopula) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(data.rows()), static_cast<Eigen::Index>(schema_.size()));
    for (std::size_t c = 0; c < schema_.size(); ++c) {
      const auto col = static_cast<Eigen::Index>(c);
      if (c == lon) m.col(col) = coords.col(0);
      else if (c == lat) m.col(col) = coords.col(1);
      else m.col(col) = Eigen::Map<const Eigen::VectorXd>(data.column(c).data(), static_cast<Eigen::Index>(data.rows()));
    }
    return m;
  }

  if (kind_ == GeneratorKind::kVaeOnly)
    for (int c = 0; c < 2; ++c)
      coords.col(c) = (coords.col(c).array() - coord_scaler_[static_cast<std::size_t>(c)].shift) /
                      coord_scaler_[static_cast<std::size_t>(c)].scale;
  const Eigen::MatrixXd feats = features_.encode(data);
  Eigen::MatrixXd m(coords.rows(), 2 + feats.cols());
  m << coords, feats;
  return m;
}

GeoTable FittedGenerator::from_model_matrix(const Eigen::MatrixXd& m) const {
  const auto n = static_cast<std::size_t>(m.rows());
  GeoTable out(schema_, n);
  const std::size_t lon = schema_.longitude();
  const std::size_t lat = schema_.latitude();
  Eigen::MatrixXd coords(m.rows(), 2);

  if (kind_ == GeneratorKind::kCopula || kind_ == GeneratorKind::kNfCopula) {
    coords << m.col(static_cast<Eigen::Index>(lon)), m.col(static_cast<Eigen::Index>(lat));
    for (std::size_t c = 0; c < schema_.size(); ++c) {
      if (c == lon || c == lat) continue;
      for (std::size_t i = 0; i < n; ++i)
        out.set(i, c, conform(schema_[c], m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c))));
    }
  } else {
    coords = m.leftCols(2);
    if (kind_ == GeneratorKind::kVaeOnly)
      for (int c = 0; c < 2; ++c)
        coords.col(c) = coords.col(c).array() * coord_scaler_[static_cast<std::size_t>(c)].scale +
                        coord_scaler_[static_cast<std::size_t>(c)].shift;
    features_.decode_into(m.rightCols(m.cols() - 2), out);
  }
  if (flow_) coords = flow_->latent_to_coords(coords);
  if (!coords.allFinite()) fail(ErrorCode::kNumeric, "generated coordinates are not finite");
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.set_coords(i, conform(schema_[lon], coords(r, 0)), conform(schema_[lat], coords(r, 1)));
  }
  return out;
}

void FittedGenerator::prepare() {
  if (kind_ == GeneratorKind::kGlobalShuffle) {
    group_polygons_ = {geom_.region};
    row_group_.assign(source_.rows(), 0);
  } else if (kind_ == GeneratorKind::kLocalShuffle) {
    if (geom_.subregions.empty()) fail(ErrorCode::kConfig, "local_shuffle needs a geometry with subregions");
    auto g = subregion_groups(source_, geom_);
    group_polygons_ = std::move(g.polygons);
    row_group_ = std::move(g.row_group);
  }
}

FittedGenerator FittedGenerator::fit(GeneratorKind kind, const GeoTable& data, const RegionGeometry& geom,
                                     const GeneratorConfig& config, std::uint64_t seed) {
  if (data.empty()) fail(ErrorCode::kData, "cannot fit a generator on an empty table");
  if (geom.region.empty()) fail(ErrorCode::kConfig, "generator needs a region polygon");
  FittedGenerator g;
  g.kind_ = kind;
  g.schema_ = data.schema();
  g.geom_ = geom;
  g.config_ = config;
  g.seed_ = seed;
  g.config_.flow_train.seed = derive_seed(seed, 0xf1);
  g.config_.vae_train.seed = derive_seed(seed, 0xfa);

  switch (kind) {
    case GeneratorKind::kGlobalShuffle:
    case GeneratorKind::kLocalShuffle:
      g.source_ = data;
      g.prepare();
      return g;
    default:
      break;
  }
  if (is_neural(kind) && data.rows() < vae::kMinVaeSamples)
    fail(ErrorCode::kTooFewSamples, std::string(to_string(kind)) + " needs at least 100 training rows");

  if (kind == GeneratorKind::kNfVae || kind == GeneratorKind::kNfCopula) {
    auto trained = flow::train_flow(data.coords(), g.config_.flow_train, g.config_.flow_arch);
    g.flow_ = std::move(trained.model);
    g.flow_history_ = std::move(trained.history.epoch_loss);
  }
  if (kind == GeneratorKind::kVaeOnly) {
    const Eigen::MatrixXd coords = data.coords();
    for (int c = 0; c < 2; ++c) {
      const double lo = coords.col(c).minCoeff();
      const double hi = coords.col(c).maxCoeff();
      g.coord_scaler_[static_cast<std::size_t>(c)] = {lo, hi > lo ? hi - lo : 1.0};
    }
  }

  if (kind == GeneratorKind::kCopula || kind == GeneratorKind::kNfCopula) {
    std::vector<bool> discrete;
    for (const auto& spec : g.schema_.columns()) discrete.push_back(spec.is_discrete());
    g.copula_ = CopulaState::fit(g.model_matrix(data), discrete);
    return g;
  }

  g.features_ = Encoder::fit(data, EncodeMode::kModel, false);
  auto trained = vae::train_vae(g.model_matrix(data), {0, 1}, g.config_.vae_train, g.config_.vae_arch,
                                g.config_.weights);
  g.vae_ = std::move(trained.model);
  g.vae_history_ = std::move(trained.history.epoch_loss);
  return g;
}

GeoTable FittedGenerator::candidates(std::size_t n, std::uint64_t seed) const {
  switch (kind_) {
    case GeneratorKind::kGlobalShuffle:
    case GeneratorKind::kLocalShuffle:
      return shuffle_rows(source_, row_group_, group_polygons_, n, seed);
    case GeneratorKind::kCopula:
    case GeneratorKind::kNfCopula:
      return from_model_matrix(copula_->sample(n, seed));
    case GeneratorKind::kNfVae:
    case GeneratorKind::kVaeOnly:
      return from_model_matrix(vae_->sample(n, seed));
  }
  fail(ErrorCode::kConfig, "unknown generator kind");
}

GeoTable FittedGenerator::sample(std::size_t n, std::uint64_t seed) const {
  GeoTable out(schema_);
  std::size_t tried = 0;
  std::size_t accepted = 0;
  const double budget = kMaxCandidatesPerRow * static_cast<double>(n);
  for (std::uint64_t round = 0; out.rows() < n; ++round) {
    const std::size_t remaining = n - out.rows();
    const double rate = tried == 0 ? 1.0 : std::max(static_cast<double>(accepted) / static_cast<double>(tried), kMinAcceptance);
    const auto want = static_cast<std::size_t>(std::ceil(1.1 * static_cast<double>(remaining) / rate)) + 8;
    const std::size_t m = std::min<std::size_t>(want, std::size_t{1} << 20);
    const GeoTable cand = candidates(m, derive_seed(seed, 0x5a3, round));
    for (std::size_t i = 0; i < cand.rows(); ++i) {
      if (!point_in_region(cand.lon(i), cand.lat(i), geom_.region)) continue;
      ++accepted;
      if (out.rows() < n) out.append_row(cand.row(i));
    }
    tried += m;
    if (out.rows() < n && static_cast<double>(tried) >= budget &&
        static_cast<double>(accepted) < kMinAcceptance * static_cast<double>(tried))
      fail(ErrorCode::kRegionMismatch, std::string(to_string(kind_)) + " places nearly all samples outside the region (" +
                                           std::to_string(accepted) + " of " + std::to_string(tried) + " accepted)");
  }
  return out;
}

void FittedGenerator::save(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create bundle directory " + dir.string());
  nlohmann::json meta = {{"format", "geosynth-generator"},
                         {"version", 1},
                         {"kind", to_string(kind_)},
                         {"seed", seed_},
                         {"config", config_.to_json()},
                         {"schema", schema_.to_json()}};
  if (vae_) meta["features"] = features_.to_json();
  if (kind_ == GeneratorKind::kVaeOnly)
    meta["coord_scaler"] = hex::encode_vector(
        {coord_scaler_[0].shift, coord_scaler_[0].scale, coord_scaler_[1].shift, coord_scaler_[1].scale});
  if (copula_) meta["copula"] = copula_->to_json();
  if (!flow_history_.empty()) meta["flow_history"] = hex::encode_vector(flow_history_);
  if (!vae_history_.empty()) meta["vae_history"] = hex::encode_vector(vae_history_);

  auto write_json = [&](const std::string& name, const nlohmann::json& j) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) fail(ErrorCode::kIo, "cannot write " + (dir / name).string());
    f << j.dump(1) << '\n';
  };
  write_json("generator.json", meta);
  geom_.save(dir / "geometry.geojson");
  if (flow_) write_json("flow.json", flow_->to_json());
  if (vae_) write_json("vae.json", vae_->to_json());
  if (kind_ == GeneratorKind::kGlobalShuffle || kind_ == GeneratorKind::kLocalShuffle)
    write_table(dir / "source.csv", source_);
}

FittedGenerator FittedGenerator::load(const std::filesystem::path& dir) {
  auto read_json = [&](const std::string& name) {
    std::ifstream f(dir / name, std::ios::binary);
    if (!f) fail(ErrorCode::kIo, "cannot read " + (dir / name).string());
    try {
      return nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kSchema, (dir / name).string() + ": " + e.what());
    }
  };
  const auto meta = read_json("generator.json");
  if (meta.value("format", "") != "geosynth-generator") fail(ErrorCode::kSchema, "not a generator bundle: " + dir.string());
  FittedGenerator g;
  try {
    g.kind_ = kind_from_string(meta.at("kind").get<std::string>());
    g.seed_ = meta.at("seed").get<std::uint64_t>();
    g.config_ = GeneratorConfig::from_json(meta.at("config"));
    g.config_.flow_train.seed = derive_seed(g.seed_, 0xf1);
    g.config_.vae_train.seed = derive_seed(g.seed_, 0xfa);
    g.schema_ = Schema::from_json(meta.at("schema"));
    if (meta.contains("features")) g.features_ = Encoder::from_json(meta.at("features"));
    if (meta.contains("coord_scaler")) {
      const auto s = hex::decode_vector(meta.at("coord_scaler"));
      if (s.size() != 4) fail(ErrorCode::kSchema, "coord_scaler must have four entries");
      g.coord_scaler_ = {ColumnScaler{s[0], s[1]}, ColumnScaler{s[2], s[3]}};
    }
    if (meta.contains("copula")) g.copula_ = CopulaState::from_json(meta.at("copula"));
    if (meta.contains("flow_history")) g.flow_history_ = hex::decode_vector(meta.at("flow_history"));
    if (meta.contains("vae_history")) g.vae_history_ = hex::decode_vector(meta.at("vae_history"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, "malformed generator.json: " + std::string(e.what()));
  }
  g.geom_ = RegionGeometry::load(dir / "geometry.geojson");
  if (g.kind_ == GeneratorKind::kNfVae || g.kind_ == GeneratorKind::kNfCopula)
    g.flow_ = flow::FlowModel::from_json(read_json("flow.json"));
  if (g.kind_ == GeneratorKind::kNfVae || g.kind_ == GeneratorKind::kVaeOnly)
    g.vae_ = vae::VaeModel::from_json(read_json("vae.json"));
  if ((g.kind_ == GeneratorKind::kCopula || g.kind_ == GeneratorKind::kNfCopula) && !g.copula_)
    fail(ErrorCode::kSchema, "copula bundle lacks copula state");
  if (g.kind_ == GeneratorKind::kGlobalShuffle || g.kind_ == GeneratorKind::kLocalShuffle) {
    auto loaded = load_table(dir / "source.csv", g.schema_);
    if (loaded.rejected_rows != 0) fail(ErrorCode::kData, "bundle source table has rejected rows");
    g.source_ = std::move(loaded.table);
    g.prepare();
  }
  return g;
}

GeoTable local_shuffle_sample(const GeoTable& source, const RegionGeometry& geom, std::size_t n, std::uint64_t seed) {
  if (geom.subregions.empty()) fail(ErrorCode::kConfig, "local shuffle needs a geometry with subregions");
  const auto g = subregion_groups(source, geom);
  return shuffle_rows(source, g.row_group, g.polygons, n, seed);
}

GeoTable global_shuffle_sample(const GeoTable& source, const RegionGeometry& geom, std::size_t n,
                               std::uint64_t seed) {
  const std::vector<std::size_t> groups(source.rows(), 0);
  return shuffle_rows(source, groups, {geom.region}, n, seed);
}

double novelty_rate(const GeoTable& real, const GeoTable& synth) {
  if (!(real.schema() == synth.schema())) fail(ErrorCode::kSchema, "novelty needs tables with the same schema");
  if (synth.empty()) return 0.0;
  const Schema& schema = real.schema();
  std::vector<std::size_t> discrete;
  std::vector<std::size_t> numeric;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (schema[c].is_coordinate()) continue;
    (schema[c].is_discrete() ? discrete : numeric).push_back(c);
  }
  auto key_of = [&](const GeoTable& t, std::size_t r) {
    std::vector<double> k;
    for (std::size_t c : discrete) k.push_back(t.at(r, c));
    return k;
  };
  auto close = [](double a, double b) { return a == b || std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b)); };

  // Real rows grouped by discrete key, sorted by the first numeric column.
  std::map<std::vector<double>, std::vector<std::size_t>> groups;
  for (std::size_t r = 0; r < real.rows(); ++r) groups[key_of(real, r)].push_back(r);
  if (!numeric.empty())
    for (auto& [key, rows] : groups)
      std::sort(rows.begin(), rows.end(),
                [&](std::size_t a, std::size_t b) { return real.at(a, numeric[0]) < real.at(b, numeric[0]); });

  std::size_t novel = 0;
  for (std::size_t r = 0; r < synth.rows(); ++r) {
    const auto it = groups.find(key_of(synth, r));
    bool found = false;
    if (it != groups.end()) {
      if (numeric.empty()) {
        found = true;
      } else {
        const auto& rows = it->second;
        const double v = synth.at(r, numeric[0]);
        const double tol = 1e-9 * std::abs(v) * 1.0000001;
        auto lo = std::lower_bound(rows.begin(), rows.end(), v - tol,
                                   [&](std::size_t a, double x) { return real.at(a, numeric[0]) < x; });
        for (; lo != rows.end() && real.at(*lo, numeric[0]) <= v + tol && !found; ++lo) {
          bool all = true;
          for (std::size_t c : numeric)
            if (!close(real.at(*lo, c), synth.at(r, c))) {
              all = false;
              break;
            }
          found = all;
        }
      }
    }
    if (!found) ++novel;
  }
  return static_cast<double>(novel) / static_cast<double>(synth.rows());
}

}  // namespace geosynth::gen
