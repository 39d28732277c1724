#include "geosynth/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "geosynth/error.hpp"
#include "geosynth/random.hpp"
#include "geosynth/stats.hpp"

namespace geosynth::metrics {

namespace {

double pow_abs(double x, double p) {
  const double a = std::abs(x);
  if (p == 1.0) return a;
  if (p == 2.0) return a * a;
  return std::pow(a, p);
}

double root(double x, double p) {
  if (p == 1.0) return x;
  if (p == 2.0) return std::sqrt(x);
  return std::pow(x, 1.0 / p);
}

double sorted_w(const std::vector<double>& a, const std::vector<double>& b, double p) {
  if (a.size() == b.size()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += pow_abs(a[i] - b[i], p);
    return root(acc / static_cast<double>(a.size()), p);
  }
  // Both quantile functions are steps; integrate exactly over the merged
  // breakpoints i/|a| and j/|b|.
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double u = 0.0, acc = 0.0;
  while (i < a.size() && j < b.size()) {
    const double ua = static_cast<double>(i + 1) / na;
    const double ub = static_cast<double>(j + 1) / nb;
    const double next = std::min(ua, ub);
    acc += (next - u) * pow_abs(a[i] - b[j], p);
    u = next;
    if (ua <= ub) ++i;
    if (ub <= ua) ++j;
  }
  return root(acc, p);
}

std::string describe(const std::exception& e) {
  if (const auto* ge = dynamic_cast<const Error*>(&e)) return std::string(to_string(ge->code())) + ": " + ge->what();
  return e.what();
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

double wasserstein_1d(std::span<const double> a, std::span<const double> b, double p) {
  if (a.empty() || b.empty()) fail(ErrorCode::kData, "Wasserstein distance needs non-empty samples");
  if (!(p >= 1.0)) fail(ErrorCode::kDomain, "Wasserstein order must be at least 1");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  return sorted_w(sa, sb, p);
}

double sliced_wasserstein(const MatrixXd& a, const MatrixXd& b, std::size_t n_proj, double p, std::uint64_t seed) {
  if (a.rows() == 0 || b.rows() == 0) fail(ErrorCode::kData, "sliced Wasserstein needs non-empty samples");
  if (a.cols() != 2 || b.cols() != 2) fail(ErrorCode::kShape, "sliced Wasserstein expects N x 2 inputs");
  if (n_proj == 0) fail(ErrorCode::kConfig, "need at least one projection");
  if (!(p >= 1.0)) fail(ErrorCode::kDomain, "Wasserstein order must be at least 1");
  Rng rng = make_rng(derive_seed(seed, 0x5111ced));
  std::vector<double> pa(static_cast<std::size_t>(a.rows()));
  std::vector<double> pb(static_cast<std::size_t>(b.rows()));
  double total = 0.0;
  for (std::size_t k = 0; k < n_proj; ++k) {
    const double theta = 2.0 * std::numbers::pi * uniform01(rng);
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    for (std::size_t i = 0; i < pa.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      pa[i] = c * a(r, 0) + s * a(r, 1);
    }
    for (std::size_t i = 0; i < pb.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      pb[i] = c * b(r, 0) + s * b(r, 1);
    }
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    total += sorted_w(pa, pb, p);
  }
  return total / static_cast<double>(n_proj);
}

VectorXd PcaBasis::weights() const { return eigenvalues / eigenvalues.sum(); }

MatrixXd PcaBasis::project(const GeoTable& table) const {
  MatrixXd enc = encoder.encode(table);
  for (Eigen::Index c = 0; c < enc.cols(); ++c) enc.col(c) = (enc.col(c).array() - mean(c)) / stddev(c);
  return enc * components;
}

PcaBasis pca_fit(const GeoTable& real, double variance_share) {
  if (real.rows() < 2) fail(ErrorCode::kTooFewSamples, "PCA needs at least two rows");
  PcaBasis b;
  b.encoder = Encoder::fit(real, EncodeMode::kModel, false);
  if (b.encoder.width() == 0) fail(ErrorCode::kConfig, "PCA needs at least one non-spatial column");
  MatrixXd enc = b.encoder.encode(real);
  const double n = static_cast<double>(enc.rows());
  b.mean = enc.colwise().mean().transpose();
  b.stddev.resize(enc.cols());
  for (Eigen::Index c = 0; c < enc.cols(); ++c) {
    const double var = (enc.col(c).array() - b.mean(c)).square().sum() / (n - 1.0);
    b.stddev(c) = var > 1e-12 ? std::sqrt(var) : 1.0;
    enc.col(c) = (enc.col(c).array() - b.mean(c)) / b.stddev(c);
  }
  const MatrixXd cov = enc.transpose() * enc / (n - 1.0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
  const VectorXd vals = es.eigenvalues().reverse();
  const MatrixXd vecs = es.eigenvectors().rowwise().reverse();
  b.total_variance = vals.cwiseMax(0.0).sum();
  if (!(b.total_variance > 1e-12)) fail(ErrorCode::kDegenerate, "every non-spatial column has zero variance");

  Eigen::Index l = 0;
  double acc = 0.0;
  while (l < vals.size() && vals(l) > 1e-12 * b.total_variance) {
    acc += vals(l);
    ++l;
    if (acc >= variance_share * b.total_variance * (1.0 - 1e-12)) break;
  }
  b.eigenvalues = vals.head(l);
  b.components = vecs.leftCols(l);
  for (Eigen::Index j = 0; j < l; ++j) {
    Eigen::Index arg = 0;
    b.components.col(j).cwiseAbs().maxCoeff(&arg);
    if (b.components(arg, j) < 0.0) b.components.col(j) *= -1.0;
  }
  return b;
}

std::vector<std::pair<std::size_t, std::size_t>> neighbor_pairs(const MatrixXd& coords, double m) {
  if (!(m > 0.0)) fail(ErrorCode::kConfig, "neighbour threshold must be positive");
  const auto n = static_cast<std::size_t>(coords.rows());
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const double m2 = m * m;
  const double span = coords.size() ? coords.cwiseAbs().maxCoeff() / m : 0.0;
  if (span > 1e12) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if ((coords.row(static_cast<Eigen::Index>(i)) - coords.row(static_cast<Eigen::Index>(j))).squaredNorm() < m2)
          pairs.emplace_back(i, j);
    return pairs;
  }
  // Bucket points into cells of side m; neighbours lie in adjacent cells.
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>> cells;
  std::vector<std::pair<std::int64_t, std::int64_t>> key(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    key[i] = {static_cast<std::int64_t>(std::floor(coords(r, 0) / m)),
              static_cast<std::int64_t>(std::floor(coords(r, 1) / m))};
    cells[key[i]].push_back(i);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto ri = static_cast<Eigen::Index>(i);
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        const auto it = cells.find({key[i].first + dx, key[i].second + dy});
        if (it == cells.end()) continue;
        for (std::size_t j : it->second) {
          if (j <= i) continue;
          const auto rj = static_cast<Eigen::Index>(j);
          const double ddx = coords(ri, 0) - coords(rj, 0);
          const double ddy = coords(ri, 1) - coords(rj, 1);
          if (ddx * ddx + ddy * ddy < m2) pairs.emplace_back(i, j);
        }
      }
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

double moran_index(std::span<const double> values, const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  const std::size_t n = values.size();
  if (n < 3) fail(ErrorCode::kTooFewSamples, "Moran's I needs at least three values");
  if (pairs.empty()) fail(ErrorCode::kNoNeighbors, "no pair of points is closer than the neighbour threshold");
  const double mean = stats::mean(values);
  double denom = 0.0;
  for (double v : values) denom += (v - mean) * (v - mean);
  if (!(denom > 0.0)) fail(ErrorCode::kDegenerate, "Moran's I is undefined for constant values");
  double num = 0.0;
  for (const auto& [i, j] : pairs) num += (values[i] - mean) * (values[j] - mean);
  return static_cast<double>(n) * num / (static_cast<double>(pairs.size()) * denom);
}

double moran_index(std::span<const double> values, const MatrixXd& coords, double m) {
  if (static_cast<std::size_t>(coords.rows()) != values.size())
    fail(ErrorCode::kShape, "values and coordinates differ in length");
  return moran_index(values, neighbor_pairs(coords, m));
}

namespace {

double pairwise_percentile_impl(const MatrixXd& coords, double q, std::size_t exact_limit, std::size_t samples,
                                std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(coords.rows());
  if (n < 2) fail(ErrorCode::kTooFewSamples, "pairwise distances need at least two points");
  if (!(q >= 0.0 && q <= 1.0)) fail(ErrorCode::kDomain, "percentile must lie in [0, 1]");
  const std::size_t total = n * (n - 1) / 2;
  std::vector<double> d;
  if (total <= exact_limit) {
    d.reserve(total);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        d.push_back((coords.row(static_cast<Eigen::Index>(i)) - coords.row(static_cast<Eigen::Index>(j))).norm());
  } else {
    if (samples == 0) fail(ErrorCode::kConfig, "pair sample size must be positive");
    Rng rng = make_rng(derive_seed(seed, 0x9a1));
    d.reserve(samples);
    while (d.size() < samples) {
      const auto i = static_cast<Eigen::Index>(uniform_index(rng, n));
      const auto j = static_cast<Eigen::Index>(uniform_index(rng, n));
      if (i == j) continue;
      d.push_back((coords.row(i) - coords.row(j)).norm());
    }
  }
  const double h = q * static_cast<double>(d.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(lo), d.end());
  const double a = d[lo];
  if (lo + 1 >= d.size()) return a;
  const double b = *std::min_element(d.begin() + static_cast<std::ptrdiff_t>(lo + 1), d.end());
  return a + (h - static_cast<double>(lo)) * (b - a);
}

}  // namespace

double pairwise_percentile(const MatrixXd& coords, double q, std::size_t cap, std::uint64_t seed) {
  return pairwise_percentile_impl(coords, q, cap, cap, seed);
}

std::pair<MatrixXd, MatrixXd> standardized_coords(const GeoTable& real, const GeoTable& synth) {
  MatrixXd a = real.coords();
  MatrixXd b = synth.coords();
  const double n = static_cast<double>(a.rows());
  for (Eigen::Index c = 0; c < 2; ++c) {
    const double mean = a.col(c).mean();
    const double var = n > 1 ? (a.col(c).array() - mean).square().sum() / (n - 1.0) : 0.0;
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    a.col(c) = (a.col(c).array() - mean) / sd;
    b.col(c) = (b.col(c).array() - mean) / sd;
  }
  return {std::move(a), std::move(b)};
}

MoranBreakdown spatial_autocorr(const GeoTable& real, const GeoTable& synth, const PcaBasis& basis,
                                const MoranConfig& cfg) {
  if (real.empty() || synth.empty()) fail(ErrorCode::kData, "spatial autocorrelation needs non-empty tables");
  const auto [ca, cb] = standardized_coords(real, synth);
  MoranBreakdown out;
  out.threshold = cfg.threshold ? *cfg.threshold
                                : pairwise_percentile_impl(ca, cfg.percentile, cfg.exact_pair_limit,
                                                           cfg.pair_sample, cfg.seed);
  const auto pa = neighbor_pairs(ca, out.threshold);
  const auto pb = neighbor_pairs(cb, out.threshold);
  const MatrixXd ya = basis.project(real);
  const MatrixXd yb = basis.project(synth);
  const VectorXd w = basis.weights();
  for (Eigen::Index j = 0; j < ya.cols(); ++j) {
    const VectorXd va = ya.col(j);
    const VectorXd vb = yb.col(j);
    out.real.push_back(moran_index(std::span<const double>(va.data(), static_cast<std::size_t>(va.size())), pa));
    out.synth.push_back(moran_index(std::span<const double>(vb.data(), static_cast<std::size_t>(vb.size())), pb));
    out.real_total += w(j) * out.real.back();
    out.synth_total += w(j) * out.synth.back();
  }
  out.distance = std::abs(out.real_total - out.synth_total);
  return out;
}

double spatial_autocorr_distance(const GeoTable& real, const GeoTable& synth, const PcaBasis& basis,
                                 const MoranConfig& cfg) {
  return spatial_autocorr(real, synth, basis, cfg).distance;
}

std::int64_t grid_cell(double x, double cell) { return static_cast<std::int64_t>(std::floor(x / cell + 1e-9)); }

double local_feature_distance(const GeoTable& real, const GeoTable& synth, const PcaBasis& basis,
                              const GridSpec& grid) {
  if (!(grid.cell > 0.0)) fail(ErrorCode::kConfig, "grid cell size must be positive");
  if (real.empty() || synth.empty()) fail(ErrorCode::kData, "local feature distance needs non-empty tables");
  using Cell = std::pair<std::int64_t, std::int64_t>;
  struct Acc {
    VectorXd sum;
    std::size_t count = 0;
  };
  auto cell_means = [&](const GeoTable& t) {
    const MatrixXd y = basis.project(t);
    std::map<Cell, Acc> cells;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      auto& a = cells[{grid_cell(t.lon(r), grid.cell), grid_cell(t.lat(r), grid.cell)}];
      if (a.count == 0) a.sum = VectorXd::Zero(y.cols());
      a.sum += y.row(static_cast<Eigen::Index>(r)).transpose();
      ++a.count;
    }
    return cells;
  };
  const auto a = cell_means(real);
  const auto b = cell_means(synth);
  const VectorXd w = basis.weights();
  double total = 0.0;
  std::size_t shared = 0;
  for (const auto& [cell, acc] : a) {
    const auto it = b.find(cell);
    if (it == b.end()) continue;
    const VectorXd diff = acc.sum / static_cast<double>(acc.count) - it->second.sum / static_cast<double>(it->second.count);
    total += (w.array() * diff.array().square()).sum();
    ++shared;
  }
  if (shared == 0) fail(ErrorCode::kNoOverlap, "no grid cell holds both real and synthetic rows");
  return total / static_cast<double>(shared);
}

VectorXd log_prices(const GeoTable& table, const std::string& price_column) {
  const auto c = table.schema().find(price_column);
  if (!c) fail(ErrorCode::kConfig, "price column '" + price_column + "' is not in the schema");
  if (table.schema()[*c].is_discrete() || table.schema()[*c].is_coordinate())
    fail(ErrorCode::kConfig, "price column '" + price_column + "' must be numeric");
  VectorXd y(static_cast<Eigen::Index>(table.rows()));
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const double v = table.at(r, *c);
    if (!(v > 0.0)) fail(ErrorCode::kDomain, "price must be strictly positive (row " + std::to_string(r) + ")");
    y(static_cast<Eigen::Index>(r)) = std::log(v);
  }
  return y;
}

namespace {

// Feature design columns shared by fit and predict.
MatrixXd hedonic_features(const GeoTable& t, std::size_t price, std::vector<std::string>* names) {
  const Schema& s = t.schema();
  std::vector<VectorXd> cols;
  for (std::size_t c = 0; c < s.size(); ++c) {
    if (c == price || s[c].is_coordinate()) continue;
    const auto col = t.column(c);
    if (s[c].kind == ColumnKind::kCategorical) {
      for (std::size_t level = 1; level < s[c].categories.size(); ++level) {
        VectorXd v(static_cast<Eigen::Index>(t.rows()));
        for (std::size_t r = 0; r < t.rows(); ++r)
          v(static_cast<Eigen::Index>(r)) = col[r] == static_cast<double>(level) ? 1.0 : 0.0;
        cols.push_back(std::move(v));
        if (names) names->push_back(s[c].name + "=" + s[c].categories[level]);
      }
    } else {
      cols.push_back(Eigen::Map<const VectorXd>(col.data(), static_cast<Eigen::Index>(t.rows())));
      if (names) names->push_back(s[c].name);
    }
  }
  MatrixXd x(static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = cols[j];
  return x;
}

}  // namespace

HedonicModel hedonic_fit(const GeoTable& table, const RegionGeometry& geom, const std::string& price_column) {
  if (table.empty()) fail(ErrorCode::kData, "hedonic regression needs rows");
  HedonicModel m;
  m.price_column = price_column;
  const VectorXd y = log_prices(table, price_column);
  const std::size_t price = table.schema().index_of(price_column);
  const MatrixXd feats = hedonic_features(table, price, &m.feature_names);
  const auto ids = assign_subregion(table, geom);
  const std::set<std::string> unique(ids.begin(), ids.end());
  std::vector<std::string> levels(unique.begin(), unique.end());  // levels[0] is the reference

  const Eigen::Index n = y.size();
  const Eigen::Index f = feats.cols();
  const auto fe = static_cast<Eigen::Index>(levels.size()) - 1;
  const Eigen::Index p = 1 + f + fe;
  constexpr double kRidge = 1e-8;
  MatrixXd a = MatrixXd::Zero(n + p, p);
  VectorXd b = VectorXd::Zero(n + p);
  a.col(0).head(n).setOnes();
  a.block(0, 1, n, f) = feats;
  std::map<std::string, Eigen::Index> level_col;
  for (Eigen::Index k = 1; k <= fe; ++k) level_col[levels[static_cast<std::size_t>(k)]] = 1 + f + k - 1;
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto it = level_col.find(ids[static_cast<std::size_t>(r)]);
    if (it != level_col.end()) a(r, it->second) = 1.0;
  }
  a.bottomRows(p).diagonal().setConstant(std::sqrt(kRidge));
  b.head(n) = y;
  const VectorXd beta = a.householderQr().solve(b);
  if (!beta.allFinite()) fail(ErrorCode::kNumeric, "hedonic regression produced non-finite coefficients");

  m.intercept = beta(0);
  m.coefficients = beta.segment(1, f);
  m.fixed_effects[levels[0]] = 0.0;
  for (const auto& [id, col] : level_col) m.fixed_effects[id] = beta(col);
  double sum = 0.0;
  for (const auto& [id, v] : m.fixed_effects) sum += v;
  m.mean_fixed_effect = sum / static_cast<double>(m.fixed_effects.size());
  m.train_r2 = r_squared(y, a.topRows(n) * beta);
  return m;
}

VectorXd hedonic_predict(const HedonicModel& model, const GeoTable& table, const RegionGeometry& geom) {
  const std::size_t price = table.schema().index_of(model.price_column);
  const MatrixXd feats = hedonic_features(table, price, nullptr);
  if (feats.cols() != model.coefficients.size())
    fail(ErrorCode::kSchema, "table features do not match the hedonic model");
  VectorXd out = (feats * model.coefficients).array() + model.intercept;
  const auto ids = assign_subregion(table, geom);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto it = model.fixed_effects.find(ids[r]);
    out(static_cast<Eigen::Index>(r)) += it == model.fixed_effects.end() ? model.mean_fixed_effect : it->second;
  }
  return out;
}

double r_squared(const VectorXd& truth, const VectorXd& predicted) {
  if (truth.size() != predicted.size() || truth.size() == 0) fail(ErrorCode::kShape, "R^2 inputs differ in length");
  const double mean = truth.mean();
  const double ss_tot = (truth.array() - mean).square().sum();
  const double ss_res = (truth - predicted).squaredNorm();
  if (!(ss_tot > 0.0)) fail(ErrorCode::kDegenerate, "R^2 is undefined for a constant target");
  return 1.0 - ss_res / ss_tot;
}

double utility_distance(const GeoTable& real, const GeoTable& synth, const RegionGeometry& geom,
                        const std::string& price_column) {
  const HedonicModel mr = hedonic_fit(real, geom, price_column);
  const HedonicModel ms = hedonic_fit(synth, geom, price_column);
  const VectorXd y = log_prices(real, price_column);
  return std::abs(r_squared(y, hedonic_predict(mr, real, geom)) - r_squared(y, hedonic_predict(ms, real, geom)));
}

double auc_roc(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) fail(ErrorCode::kShape, "scores and labels differ in length");
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) fail(ErrorCode::kEvaluation, "AUC needs both classes");
  const auto ranks = stats::average_ranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i]) rank_sum += ranks[i];
  const double dp = static_cast<double>(pos);
  return (rank_sum - dp * (dp + 1.0) / 2.0) / (dp * static_cast<double>(neg));
}

LogisticFit logistic_fit(std::span<const double> x, const std::vector<bool>& y, double tolerance, int max_iterations) {
  if (x.size() != y.size() || x.empty()) fail(ErrorCode::kShape, "logistic regression inputs differ in length");
  auto loglik = [&](double a, double b) {
    double ll = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double eta = a + b * x[i];
      // log sigmoid(eta) and log sigmoid(-eta) without overflow
      const double lp = -(eta > 0 ? std::log1p(std::exp(-eta)) : -eta + std::log1p(std::exp(eta)));
      const double ln = lp - eta;
      ll += y[i] ? lp : ln;
    }
    return ll;
  };
  LogisticFit fit;
  double ll = loglik(0.0, 0.0);
  for (fit.iterations = 0; fit.iterations < max_iterations;) {
    double g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double eta = fit.intercept + fit.slope * x[i];
      const double pr = 1.0 / (1.0 + std::exp(-eta));
      const double r = (y[i] ? 1.0 : 0.0) - pr;
      const double w = pr * (1.0 - pr);
      g0 += r;
      g1 += r * x[i];
      h00 += w;
      h01 += w * x[i];
      h11 += w * x[i] * x[i];
    }
    const double det = h00 * h11 - h01 * h01;
    if (!(std::abs(det) > 1e-300)) break;
    double d0 = (h11 * g0 - h01 * g1) / det;
    double d1 = (h00 * g1 - h01 * g0) / det;
    ++fit.iterations;
    // Step halving keeps the log-likelihood non-decreasing.
    double step = 1.0;
    double next = loglik(fit.intercept + d0, fit.slope + d1);
    while (!(next >= ll) && step > 1e-10) {
      step *= 0.5;
      next = loglik(fit.intercept + step * d0, fit.slope + step * d1);
    }
    if (!(next >= ll)) break;
    fit.intercept += step * d0;
    fit.slope += step * d1;
    ll = next;
    if (std::max(std::abs(step * d0), std::abs(step * d1)) < tolerance) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

VectorXd nearest_distances(const MatrixXd& points, const MatrixXd& ref) {
  if (ref.rows() == 0) fail(ErrorCode::kData, "nearest distance to an empty set");
  if (points.cols() != ref.cols()) fail(ErrorCode::kShape, "point sets differ in width");
  const MatrixXd rt = ref.transpose();
  VectorXd out(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < rt.cols(); ++j) {
      const double d = (rt.col(j) - points.row(i).transpose()).squaredNorm();
      if (d < best) best = d;
      if (best == 0.0) break;
    }
    out(i) = std::sqrt(best);
  }
  return out;
}

PrivacyResult privacy_attack(const GeoTable& data, const GeneratorFn& generator, std::size_t n_synth,
                             std::uint64_t seed) {
  const std::size_t n = data.rows();
  const auto members = split_indices(n, 0.95, derive_seed(seed, 0x95));
  if (members.second.size() < 10)
    fail(ErrorCode::kTooFewSamples, "privacy split leaves fewer than 10 non-member rows");
  const GeoTable train = data.select(members.first);
  const std::size_t ns = n_synth == 0 ? train.rows() : n_synth;
  const GeoTable synth = generator(train, ns, derive_seed(seed, 0x6e));
  if (synth.rows() == 0) fail(ErrorCode::kEvaluation, "generator returned no rows for the privacy attack");

  const Encoder enc = Encoder::fit(data, EncodeMode::kDistance);
  const VectorXd dist = nearest_distances(enc.encode(data), enc.encode(synth));

  std::vector<bool> label(n, false);
  for (std::size_t i : members.first) label[i] = true;
  std::vector<int> strata(n);
  for (std::size_t i = 0; i < n; ++i) strata[i] = label[i] ? 1 : 0;
  const auto z = split_indices(n, 0.8, derive_seed(seed, 0x80), strata);

  std::vector<double> xtr, xte;
  std::vector<bool> ytr, yte;
  for (std::size_t i : z.first) {
    xtr.push_back(dist(static_cast<Eigen::Index>(i)));
    ytr.push_back(label[i]);
  }
  for (std::size_t i : z.second) {
    xte.push_back(dist(static_cast<Eigen::Index>(i)));
    yte.push_back(label[i]);
  }
  if (std::count(ytr.begin(), ytr.end(), true) == 0 || std::count(ytr.begin(), ytr.end(), false) == 0)
    fail(ErrorCode::kEvaluation, "privacy training split holds a single class");

  PrivacyResult out;
  out.classifier = logistic_fit(xtr, ytr);
  std::vector<double> scores(xte.size());
  for (std::size_t i = 0; i < xte.size(); ++i) scores[i] = out.classifier.intercept + out.classifier.slope * xte[i];
  out.auc = auc_roc(scores, yte);
  out.rho = out.auc - 0.5;
  out.members = members.first.size();
  out.non_members = members.second.size();
  return out;
}

double privacy_score(const GeoTable& data, const GeneratorFn& generator, std::size_t n_synth, std::uint64_t seed) {
  return privacy_attack(data, generator, n_synth, seed).rho;
}

GeneratorFn kind_generator(gen::GeneratorKind kind, const RegionGeometry& geom, const gen::GeneratorConfig& config) {
  return [kind, geom, config](const GeoTable& train, std::size_t n, std::uint64_t seed) {
    const auto g = gen::FittedGenerator::fit(kind, train, geom, config, derive_seed(seed, 0));
    return g.sample(n, derive_seed(seed, 1));
  };
}

double privacy_score(const GeoTable& data, gen::GeneratorKind kind, const RegionGeometry& geom,
                     const gen::GeneratorConfig& config, std::size_t n_synth, std::uint64_t seed) {
  return privacy_score(data, kind_generator(kind, geom, config), n_synth, seed);
}

nlohmann::json EvalConfig::to_json() const {
  nlohmann::json m = {{"percentile", moran.percentile},
                      {"exact_pair_limit", moran.exact_pair_limit},
                      {"pair_sample", moran.pair_sample}};
  if (moran.threshold) m["threshold"] = *moran.threshold;
  return {{"n_proj", n_proj},   {"p", p},
          {"grid_cell", grid.cell}, {"moran", m},
          {"price_column", price_column}, {"seed", seed}, {"split_seed", split_seed},
          {"privacy", privacy}, {"privacy_n_synth", privacy_n_synth},
          {"generator", generator.to_json()}};
}

EvalConfig EvalConfig::from_json(const nlohmann::json& j) {
  EvalConfig c;
  c.n_proj = j.value("n_proj", c.n_proj);
  c.p = j.value("p", c.p);
  c.grid.cell = j.value("grid_cell", c.grid.cell);
  if (j.contains("moran")) {
    const auto& m = j.at("moran");
    c.moran.percentile = m.value("percentile", c.moran.percentile);
    c.moran.exact_pair_limit = m.value("exact_pair_limit", c.moran.exact_pair_limit);
    c.moran.pair_sample = m.value("pair_sample", c.moran.pair_sample);
    if (m.contains("threshold")) c.moran.threshold = m.at("threshold").get<double>();
  }
  c.price_column = j.value("price_column", c.price_column);
  c.seed = j.value("seed", c.seed);
  c.split_seed = j.value("split_seed", c.split_seed);
  c.privacy = j.value("privacy", c.privacy);
  c.privacy_n_synth = j.value("privacy_n_synth", c.privacy_n_synth);
  if (j.contains("generator")) c.generator = gen::GeneratorConfig::from_json(j.at("generator"));
  if (c.n_proj == 0) fail(ErrorCode::kConfig, "n_proj must be positive");
  if (!(c.p >= 1.0)) fail(ErrorCode::kConfig, "p must be at least 1");
  if (!(c.grid.cell > 0.0)) fail(ErrorCode::kConfig, "grid_cell must be positive");
  if (!(c.moran.percentile > 0.0 && c.moran.percentile < 1.0)) fail(ErrorCode::kConfig, "percentile must lie in (0, 1)");
  return c;
}

const std::vector<std::string>& EvaluationReport::field_names() {
  static const std::vector<std::string> names{"d_geo", "d_spatial", "d_local", "d_utility", "rho_privacy", "novelty"};
  return names;
}

bool EvaluationReport::all_failed() const {
  for (const auto& [name, v] : fields)
    if (v.ok()) return false;
  return true;
}

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& name : field_names()) {
    const auto it = fields.find(name);
    if (it == fields.end()) continue;
    if (it->second.ok())
      metrics[name] = {{"value", *it->second.value}};
    else
      metrics[name] = {{"value", nullptr}, {"error", it->second.error}};
  }
  return {{"format", "geosynth-report"},
          {"version", 1},
          {"generator_kind", generator_kind},
          {"n_real", n_real},
          {"n_synth", n_synth},
          {"seed", seed},
          {"seeds", seeds},
          {"config_hash", config_hash},
          {"config", config},
          {"metrics", metrics},
          {"warnings", warnings}};
}

EvaluationReport EvaluationReport::from_json(const nlohmann::json& j) {
  EvaluationReport r;
  try {
    r.generator_kind = j.at("generator_kind").get<std::string>();
    r.n_real = j.at("n_real").get<std::size_t>();
    r.n_synth = j.at("n_synth").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.config = j.at("config");
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& [name, v] : j.at("metrics").items()) {
      MetricValue mv;
      if (!v.at("value").is_null()) mv.value = v.at("value").get<double>();
      else mv.error = v.value("error", "");
      r.fields[name] = mv;
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string EvaluationReport::csv_header() {
  std::string h = "generator_kind,seed,n_real,n_synth";
  for (const auto& name : field_names()) h += "," + name;
  return h;
}

std::string EvaluationReport::csv_row() const {
  std::string row = generator_kind + "," + std::to_string(seed) + "," + std::to_string(n_real) + "," +
                    std::to_string(n_synth);
  for (const auto& name : field_names()) {
    row += ",";
    const auto it = fields.find(name);
    if (it != fields.end() && it->second.ok()) row += format_double(*it->second.value);
  }
  return row;
}

bool operator==(const EvaluationReport& a, const EvaluationReport& b) {
  if (a.fields.size() != b.fields.size()) return false;
  for (const auto& [name, v] : a.fields) {
    const auto it = b.fields.find(name);
    if (it == b.fields.end() || it->second.value != v.value || it->second.error != v.error) return false;
  }
  return a.generator_kind == b.generator_kind && a.n_real == b.n_real && a.n_synth == b.n_synth &&
         a.seed == b.seed && a.seeds == b.seeds && a.config_hash == b.config_hash && a.config == b.config &&
         a.warnings == b.warnings;
}

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

EvaluationReport evaluate(const EvalInputs& in, const EvalConfig& cfg) {
  if (!in.real || !in.synth) fail(ErrorCode::kUsage, "evaluate needs a real and a synthetic table");
  const GeoTable& real = *in.real;
  const GeoTable& synth = *in.synth;
  EvaluationReport rep;
  rep.generator_kind = in.kind ? gen::to_string(*in.kind) : (in.privacy_generator ? "custom" : "none");
  rep.n_real = real.rows();
  rep.n_synth = synth.rows();
  rep.seed = cfg.seed;
  rep.config = cfg.to_json();
  rep.config_hash = fnv1a_hex(rep.config.dump());
  rep.seeds = {{"sliced_wasserstein", derive_seed(cfg.seed, 0x11)},
               {"moran", derive_seed(cfg.seed, 0x12)},
               {"privacy", cfg.split_seed}};

  auto run = [&](const std::string& name, auto&& body) {
    MetricValue v;
    try {
      v.value = body();
    } catch (const std::exception& e) {
      v.error = describe(e);
    }
    rep.fields[name] = v;
  };

  if (!(real.schema() == synth.schema())) {
    for (const auto& name : EvaluationReport::field_names())
      rep.fields[name] = MetricValue{std::nullopt, "schema: real and synthetic schemas differ"};
    return rep;
  }

  run("d_geo", [&] {
    return sliced_wasserstein(real.coords(), synth.coords(), cfg.n_proj, cfg.p, rep.seeds["sliced_wasserstein"]);
  });

  std::optional<PcaBasis> basis;
  std::string basis_error;
  try {
    basis = pca_fit(real);
  } catch (const std::exception& e) {
    basis_error = describe(e);
  }
  MoranConfig moran = cfg.moran;
  moran.seed = rep.seeds["moran"];
  run("d_spatial", [&] {
    if (!basis) throw Error(ErrorCode::kEvaluation, "PCA failed: " + basis_error);
    return spatial_autocorr_distance(real, synth, *basis, moran);
  });
  run("d_local", [&] {
    if (!basis) throw Error(ErrorCode::kEvaluation, "PCA failed: " + basis_error);
    return local_feature_distance(real, synth, *basis, cfg.grid);
  });
  run("d_utility", [&] {
    if (!in.geometry) throw Error(ErrorCode::kEvaluation, "unavailable: no geometry supplied");
    return utility_distance(real, synth, *in.geometry, cfg.price_column);
  });
  run("rho_privacy", [&]() -> double {
    if (!cfg.privacy) throw Error(ErrorCode::kEvaluation, "unavailable: privacy disabled in config");
    if (in.privacy_generator) {
      const auto res = privacy_attack(real, in.privacy_generator, cfg.privacy_n_synth, rep.seeds["privacy"]);
      if (!res.classifier.converged) rep.warnings.push_back("privacy logistic regression did not converge");
      return res.rho;
    }
    if (!in.geometry) throw Error(ErrorCode::kEvaluation, "unavailable: no geometry supplied");
    if (!in.kind) throw Error(ErrorCode::kEvaluation, "unavailable: a synthetic table alone cannot be privacy-scored");
    const auto res = privacy_attack(real, kind_generator(*in.kind, *in.geometry, cfg.generator), cfg.privacy_n_synth,
                                    rep.seeds["privacy"]);
    if (!res.classifier.converged) rep.warnings.push_back("privacy logistic regression did not converge");
    return res.rho;
  });
  run("novelty", [&] { return gen::novelty_rate(real, synth); });
  return rep;
}

}  // namespace geosynth::metrics
