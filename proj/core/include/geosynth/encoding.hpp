#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "geosynth/table.hpp"

namespace geosynth {

enum class EncodeMode {
  kModel,     // z-score coordinates and numerics, one-hot discrete columns
  kDistance,  // min-max every column into [0, 1], one-hot discrete columns
};

enum class EncodingRole { kCoordinate, kScaledNumeric, kOneHotLevel };

struct LayoutEntry {
  std::size_t source_column = 0;
  EncodingRole role = EncodingRole::kScaledNumeric;
  std::size_t level = 0;  // one-hot level, 0 otherwise
};

/// encoded = (value - shift) / scale
struct ColumnScaler {
  double shift = 0.0;
  double scale = 1.0;
};

/// Fitted column encoding: layout plus per-column scalers.
class Encoder {
 public:
  Encoder() = default;

  /// Fits scalers on `table`. With include_coordinates = false the latitude
  /// and longitude columns are left out of the layout.
  static Encoder fit(const GeoTable& table, EncodeMode mode, bool include_coordinates = true);

  const Schema& schema() const { return schema_; }
  EncodeMode mode() const { return mode_; }
  std::size_t width() const { return layout_.size(); }
  const std::vector<LayoutEntry>& layout() const { return layout_; }
  const std::vector<ColumnScaler>& scalers() const { return scalers_; }
  bool includes_coordinates() const { return include_coordinates_; }

  Eigen::MatrixXd encode(const GeoTable& table) const;

  /// Writes decoded values for every encoded column into `out`, which must
  /// have values.rows() rows. One-hot groups resolve by argmax (first index
  /// wins ties); integers are rounded and clamped to their bounds.
  void decode_into(const Eigen::MatrixXd& values, GeoTable& out) const;
  GeoTable decode(const Eigen::MatrixXd& values) const;

  nlohmann::json to_json() const;
  static Encoder from_json(const nlohmann::json& j);

 private:
  Schema schema_;
  EncodeMode mode_ = EncodeMode::kModel;
  bool include_coordinates_ = true;
  std::vector<LayoutEntry> layout_;
  std::vector<ColumnScaler> scalers_;   // indexed by source column
  std::vector<std::size_t> offsets_;    // first layout index per source column
};

struct EncodedMatrix {
  Eigen::MatrixXd values;
  Encoder encoder;
};

EncodedMatrix encode(const GeoTable& table, EncodeMode mode);
GeoTable decode(const EncodedMatrix& matrix);

}  // namespace geosynth
