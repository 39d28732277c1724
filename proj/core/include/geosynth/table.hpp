#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace geosynth {

enum class ColumnKind { kLatitude, kLongitude, kNumeric, kInteger, kBoolean, kCategorical };

const char* to_string(ColumnKind kind);
ColumnKind column_kind_from_string(const std::string& name);

struct Bounds {
  double min = 0.0;
  double max = 0.0;
};

/// One column of a schema. Booleans are stored as 1 (true) / 0 (false);
/// categoricals are stored as the index of their level in `categories`.
struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  std::vector<std::string> categories;
  std::optional<Bounds> bounds;

  bool is_coordinate() const {
    return kind == ColumnKind::kLatitude || kind == ColumnKind::kLongitude;
  }
  bool is_discrete() const {
    return kind == ColumnKind::kBoolean || kind == ColumnKind::kCategorical;
  }
  /// Number of one-hot levels (2 for booleans), 0 for continuous kinds.
  std::size_t level_count() const;
  /// True when `value` is admissible for this column.
  bool admits(double value) const;
};

class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<ColumnSpec> columns);

  std::size_t size() const { return columns_.size(); }
  const ColumnSpec& operator[](std::size_t i) const { return columns_[i]; }
  const std::vector<ColumnSpec>& columns() const { return columns_; }

  std::optional<std::size_t> find(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;  // throws on miss
  std::size_t latitude() const { return lat_; }
  std::size_t longitude() const { return lon_; }

  nlohmann::json to_json() const;
  static Schema from_json(const nlohmann::json& j);
  static Schema load(const std::filesystem::path& path);

  friend bool operator==(const Schema& a, const Schema& b);

 private:
  std::vector<ColumnSpec> columns_;
  std::size_t lat_ = 0;
  std::size_t lon_ = 0;
};

/// Column-major table of geolocated units.
class GeoTable {
 public:
  GeoTable() = default;
  explicit GeoTable(Schema schema, std::size_t rows = 0);

  const Schema& schema() const { return schema_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return schema_.size(); }
  bool empty() const { return rows_ == 0; }

  double at(std::size_t row, std::size_t col) const { return data_[col][row]; }
  void set(std::size_t row, std::size_t col, double v) { data_[col][row] = v; }
  std::span<const double> column(std::size_t col) const { return data_[col]; }

  double lon(std::size_t row) const { return data_[schema_.longitude()][row]; }
  double lat(std::size_t row) const { return data_[schema_.latitude()][row]; }
  void set_coords(std::size_t row, double lon, double lat);

  /// N x 2 matrix of (longitude, latitude).
  Eigen::MatrixXd coords() const;

  std::vector<double> row(std::size_t r) const;
  void append_row(std::span<const double> values);
  GeoTable select(std::span<const std::size_t> rows) const;

  /// Text form of a cell as written to CSV.
  std::string format_cell(std::size_t row, std::size_t col) const;

  friend bool operator==(const GeoTable& a, const GeoTable& b);

 private:
  Schema schema_;
  std::size_t rows_ = 0;
  std::vector<std::vector<double>> data_;
};

struct LoadedTable {
  GeoTable table;
  std::size_t rejected_rows = 0;
};

/// Reads a CSV file (header row required). Rows with missing, unparseable or
/// out-of-bounds cells are dropped and counted.
LoadedTable load_table(const std::filesystem::path& path, const Schema& schema);
LoadedTable parse_table(std::istream& in, const Schema& schema);

void write_table(const std::filesystem::path& path, const GeoTable& table);
void write_table(std::ostream& out, const GeoTable& table);

struct SplitIndices {
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
};

/// Seeded random partition of [0, n). The first part holds round(fraction*n)
/// indices. With `strata`, every stratum is split within one row of
/// `fraction`; single-row strata always go to the first part.
SplitIndices split_indices(std::size_t n, double fraction, std::uint64_t seed,
                           std::span<const int> strata = {});

std::pair<GeoTable, GeoTable> split(const GeoTable& table, double fraction, std::uint64_t seed,
                                    const std::optional<std::string>& stratify_on = std::nullopt);

}  // namespace geosynth
