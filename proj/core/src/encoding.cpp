#include "geosynth/encoding.hpp"

#include <algorithm>
#include <cmath>

#include "geosynth/error.hpp"
#include "geosynth/hexfloat.hpp"

namespace geosynth {

namespace {

const char* mode_name(EncodeMode m) { return m == EncodeMode::kModel ? "model" : "distance"; }

EncodeMode mode_from_name(const std::string& s) {
  if (s == "model") return EncodeMode::kModel;
  if (s == "distance") return EncodeMode::kDistance;
  fail(ErrorCode::kConfig, "unknown encode mode '" + s + "'");
}

ColumnScaler fit_scaler(std::span<const double> v, EncodeMode mode) {
  ColumnScaler s;
  if (v.empty()) return s;
  if (mode == EncodeMode::kDistance) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    s.shift = *lo;
    s.scale = *hi > *lo ? *hi - *lo : 1.0;  // constant column maps to 0
  } else {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    s.shift = mean;
    s.scale = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

void build_layout(const Schema& schema, bool include_coordinates, std::vector<LayoutEntry>& layout,
                  std::vector<std::size_t>& offsets) {
  layout.clear();
  offsets.assign(schema.size(), static_cast<std::size_t>(-1));
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto& spec = schema[c];
    if (spec.is_coordinate() && !include_coordinates) continue;
    offsets[c] = layout.size();
    if (spec.is_discrete()) {
      for (std::size_t l = 0; l < spec.level_count(); ++l)
        layout.push_back({c, EncodingRole::kOneHotLevel, l});
    } else {
      layout.push_back({c, spec.is_coordinate() ? EncodingRole::kCoordinate : EncodingRole::kScaledNumeric, 0});
    }
  }
}

// Boolean one-hot order is (true, false).
std::size_t level_of(const ColumnSpec& spec, double stored) {
  if (spec.kind == ColumnKind::kBoolean) return stored != 0.0 ? 0 : 1;
  return static_cast<std::size_t>(stored);
}

double stored_of(const ColumnSpec& spec, std::size_t level) {
  if (spec.kind == ColumnKind::kBoolean) return level == 0 ? 1.0 : 0.0;
  return static_cast<double>(level);
}

}  // namespace

Encoder Encoder::fit(const GeoTable& table, EncodeMode mode, bool include_coordinates) {
  if (table.empty()) fail(ErrorCode::kData, "cannot fit an encoder on an empty table");
  Encoder e;
  e.schema_ = table.schema();
  e.mode_ = mode;
  e.include_coordinates_ = include_coordinates;
  build_layout(e.schema_, include_coordinates, e.layout_, e.offsets_);
  e.scalers_.assign(e.schema_.size(), ColumnScaler{});
  for (std::size_t c = 0; c < e.schema_.size(); ++c) {
    if (e.offsets_[c] == static_cast<std::size_t>(-1) || e.schema_[c].is_discrete()) continue;
    e.scalers_[c] = fit_scaler(table.column(c), mode);
  }
  return e;
}

Eigen::MatrixXd Encoder::encode(const GeoTable& table) const {
  if (!(table.schema() == schema_)) fail(ErrorCode::kSchema, "table schema differs from encoder schema");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(table.rows()),
                                              static_cast<Eigen::Index>(width()));
  for (std::size_t c = 0; c < schema_.size(); ++c) {
    const std::size_t off = offsets_[c];
    if (off == static_cast<std::size_t>(-1)) continue;
    const auto& spec = schema_[c];
    const auto col = table.column(c);
    if (spec.is_discrete()) {
      for (std::size_t r = 0; r < table.rows(); ++r)
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(off + level_of(spec, col[r]))) = 1.0;
    } else {
      const auto& s = scalers_[c];
      for (std::size_t r = 0; r < table.rows(); ++r)
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(off)) = (col[r] - s.shift) / s.scale;
    }
  }
  return out;
}

void Encoder::decode_into(const Eigen::MatrixXd& values, GeoTable& out) const {
  if (static_cast<std::size_t>(values.cols()) != width())
    fail(ErrorCode::kShape, "encoded matrix width does not match layout");
  if (static_cast<std::size_t>(values.rows()) != out.rows())
    fail(ErrorCode::kShape, "decode target has the wrong number of rows");
  for (std::size_t c = 0; c < schema_.size(); ++c) {
    const std::size_t off = offsets_[c];
    if (off == static_cast<std::size_t>(-1)) continue;
    const auto& spec = schema_[c];
    for (std::size_t r = 0; r < out.rows(); ++r) {
      const auto row = static_cast<Eigen::Index>(r);
      if (spec.is_discrete()) {
        std::size_t best = 0;
        for (std::size_t l = 1; l < spec.level_count(); ++l)
          if (values(row, static_cast<Eigen::Index>(off + l)) > values(row, static_cast<Eigen::Index>(off + best)))
            best = l;
        out.set(r, c, stored_of(spec, best));
        continue;
      }
      const auto& s = scalers_[c];
      double v = values(row, static_cast<Eigen::Index>(off)) * s.scale + s.shift;
      if (!std::isfinite(v)) fail(ErrorCode::kNumeric, "non-finite value while decoding column '" + spec.name + "'");
      if (spec.kind == ColumnKind::kInteger) v = std::round(v);
      if (spec.kind == ColumnKind::kLatitude) v = std::clamp(v, -90.0, 90.0);
      if (spec.kind == ColumnKind::kLongitude) v = std::clamp(v, -180.0, 180.0);
      if (spec.bounds) {
        double lo = spec.bounds->min;
        double hi = spec.bounds->max;
        if (spec.kind == ColumnKind::kInteger) {
          lo = std::ceil(lo);
          hi = std::floor(hi);
        }
        v = std::clamp(v, lo, hi);
      }
      out.set(r, c, v);
    }
  }
}

GeoTable Encoder::decode(const Eigen::MatrixXd& values) const {
  GeoTable out(schema_, static_cast<std::size_t>(values.rows()));
  decode_into(values, out);
  return out;
}

nlohmann::json Encoder::to_json() const {
  nlohmann::json scalers = nlohmann::json::array();
  for (const auto& s : scalers_) scalers.push_back({hex::encode(s.shift), hex::encode(s.scale)});
  return {{"schema", schema_.to_json()},
          {"mode", mode_name(mode_)},
          {"include_coordinates", include_coordinates_},
          {"scalers", scalers}};
}

Encoder Encoder::from_json(const nlohmann::json& j) {
  Encoder e;
  e.schema_ = Schema::from_json(j.at("schema"));
  e.mode_ = mode_from_name(j.at("mode").get<std::string>());
  e.include_coordinates_ = j.at("include_coordinates").get<bool>();
  build_layout(e.schema_, e.include_coordinates_, e.layout_, e.offsets_);
  const auto& sc = j.at("scalers");
  if (sc.size() != e.schema_.size()) fail(ErrorCode::kSchema, "encoder scalers do not match schema");
  e.scalers_.resize(sc.size());
  for (std::size_t i = 0; i < sc.size(); ++i)
    e.scalers_[i] = {hex::decode(sc[i].at(0).get<std::string>()), hex::decode(sc[i].at(1).get<std::string>())};
  return e;
}

EncodedMatrix encode(const GeoTable& table, EncodeMode mode) {
  EncodedMatrix m;
  m.encoder = Encoder::fit(table, mode);
  m.values = m.encoder.encode(table);
  return m;
}

GeoTable decode(const EncodedMatrix& matrix) { return matrix.encoder.decode(matrix.values); }

}  // namespace geosynth
