#include "geosynth/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "geosynth/csv.hpp"
#include "geosynth/error.hpp"
#include "geosynth/random.hpp"

namespace geosynth {

const char* to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::kLatitude: return "latitude";
    case ColumnKind::kLongitude: return "longitude";
    case ColumnKind::kNumeric: return "numeric";
    case ColumnKind::kInteger: return "integer";
    case ColumnKind::kBoolean: return "boolean";
    case ColumnKind::kCategorical: return "categorical";
  }
  return "numeric";
}

ColumnKind column_kind_from_string(const std::string& name) {
  if (name == "latitude") return ColumnKind::kLatitude;
  if (name == "longitude") return ColumnKind::kLongitude;
  if (name == "numeric") return ColumnKind::kNumeric;
  if (name == "integer") return ColumnKind::kInteger;
  if (name == "boolean") return ColumnKind::kBoolean;
  if (name == "categorical") return ColumnKind::kCategorical;
  fail(ErrorCode::kSchema, "unknown column kind '" + name + "'");
}

std::size_t ColumnSpec::level_count() const {
  if (kind == ColumnKind::kBoolean) return 2;
  if (kind == ColumnKind::kCategorical) return categories.size();
  return 0;
}

bool ColumnSpec::admits(double v) const {
  if (!std::isfinite(v)) return false;
  switch (kind) {
    case ColumnKind::kLatitude:
      if (v < -90.0 || v > 90.0) return false;
      break;
    case ColumnKind::kLongitude:
      if (v < -180.0 || v > 180.0) return false;
      break;
    case ColumnKind::kInteger:
      if (v != std::round(v)) return false;
      break;
    case ColumnKind::kBoolean:
      return v == 0.0 || v == 1.0;
    case ColumnKind::kCategorical:
      return v >= 0.0 && v == std::round(v) && v < static_cast<double>(categories.size());
    case ColumnKind::kNumeric:
      break;
  }
  if (bounds && (v < bounds->min || v > bounds->max)) return false;
  return true;
}

Schema::Schema(std::vector<ColumnSpec> columns) : columns_(std::move(columns)) {
  std::optional<std::size_t> lat;
  std::optional<std::size_t> lon;
  std::set<std::string> names;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    const auto& c = columns_[i];
    if (c.name.empty()) fail(ErrorCode::kSchema, "column with empty name");
    if (!names.insert(c.name).second) fail(ErrorCode::kSchema, "duplicate column '" + c.name + "'");
    if (c.kind == ColumnKind::kLatitude) {
      if (lat) fail(ErrorCode::kSchema, "schema has more than one latitude column");
      lat = i;
    }
    if (c.kind == ColumnKind::kLongitude) {
      if (lon) fail(ErrorCode::kSchema, "schema has more than one longitude column");
      lon = i;
    }
    if (c.kind == ColumnKind::kCategorical) {
      if (c.categories.empty()) fail(ErrorCode::kSchema, "categorical column '" + c.name + "' lists no levels");
      std::set<std::string> levels(c.categories.begin(), c.categories.end());
      if (levels.size() != c.categories.size())
        fail(ErrorCode::kSchema, "categorical column '" + c.name + "' has duplicate levels");
    } else if (!c.categories.empty()) {
      fail(ErrorCode::kSchema, "column '" + c.name + "' lists categories but is not categorical");
    }
    if (c.bounds && !(c.bounds->min <= c.bounds->max))
      fail(ErrorCode::kSchema, "column '" + c.name + "' has inverted bounds");
  }
  if (!lat || !lon) fail(ErrorCode::kSchema, "schema needs exactly one latitude and one longitude column");
  lat_ = *lat;
  lon_ = *lon;
}

std::optional<std::size_t> Schema::find(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].name == name) return i;
  return std::nullopt;
}

std::size_t Schema::index_of(const std::string& name) const {
  if (auto i = find(name)) return *i;
  fail(ErrorCode::kSchema, "no column named '" + name + "'");
}

nlohmann::json Schema::to_json() const {
  auto out = nlohmann::json::array();
  for (const auto& c : columns_) {
    nlohmann::json j{{"name", c.name}, {"kind", to_string(c.kind)}};
    if (c.kind == ColumnKind::kCategorical) j["categories"] = c.categories;
    if (c.bounds) j["bounds"] = {c.bounds->min, c.bounds->max};
    out.push_back(std::move(j));
  }
  return out;
}

Schema Schema::from_json(const nlohmann::json& j) {
  const nlohmann::json& list = j.is_object() && j.contains("columns") ? j.at("columns") : j;
  if (!list.is_array()) fail(ErrorCode::kSchema, "schema JSON must be a list of columns");
  std::vector<ColumnSpec> cols;
  try {
    for (const auto& item : list) {
      ColumnSpec c;
      c.name = item.at("name").get<std::string>();
      c.kind = column_kind_from_string(item.at("kind").get<std::string>());
      if (item.contains("categories")) c.categories = item.at("categories").get<std::vector<std::string>>();
      if (item.contains("bounds") && !item.at("bounds").is_null()) {
        const auto& b = item.at("bounds");
        c.bounds = Bounds{b.at(0).get<double>(), b.at(1).get<double>()};
      }
      cols.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, std::string("malformed schema: ") + e.what());
  }
  return Schema(std::move(cols));
}

Schema Schema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open schema file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, "schema file " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

bool operator==(const Schema& a, const Schema& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i];
    const auto& y = b[i];
    if (x.name != y.name || x.kind != y.kind || x.categories != y.categories) return false;
    if (x.bounds.has_value() != y.bounds.has_value()) return false;
    if (x.bounds && (x.bounds->min != y.bounds->min || x.bounds->max != y.bounds->max)) return false;
  }
  return true;
}

GeoTable::GeoTable(Schema schema, std::size_t rows)
    : schema_(std::move(schema)), rows_(rows), data_(schema_.size(), std::vector<double>(rows, 0.0)) {}

void GeoTable::set_coords(std::size_t row, double lon, double lat) {
  data_[schema_.longitude()][row] = lon;
  data_[schema_.latitude()][row] = lat;
}

Eigen::MatrixXd GeoTable::coords() const {
  Eigen::MatrixXd out(rows_, 2);
  for (std::size_t r = 0; r < rows_; ++r) {
    out(r, 0) = lon(r);
    out(r, 1) = lat(r);
  }
  return out;
}

std::vector<double> GeoTable::row(std::size_t r) const {
  std::vector<double> out(cols());
  for (std::size_t c = 0; c < cols(); ++c) out[c] = data_[c][r];
  return out;
}

void GeoTable::append_row(std::span<const double> values) {
  if (values.size() != cols()) fail(ErrorCode::kShape, "row width does not match schema");
  for (std::size_t c = 0; c < cols(); ++c) data_[c].push_back(values[c]);
  ++rows_;
}

GeoTable GeoTable::select(std::span<const std::size_t> rows) const {
  GeoTable out(schema_, rows.size());
  for (std::size_t c = 0; c < cols(); ++c)
    for (std::size_t i = 0; i < rows.size(); ++i) out.data_[c][i] = data_[c][rows[i]];
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_cell(const ColumnSpec& spec, const std::string& raw) {
  const std::string text = trim(raw);
  if (text.empty()) return std::nullopt;
  double v = 0.0;
  if (spec.kind == ColumnKind::kCategorical) {
    auto it = std::find(spec.categories.begin(), spec.categories.end(), text);
    if (it == spec.categories.end()) return std::nullopt;
    v = static_cast<double>(it - spec.categories.begin());
  } else if (spec.kind == ColumnKind::kBoolean) {
    const std::string t = lower(text);
    if (t == "true" || t == "1" || t == "yes") v = 1.0;
    else if (t == "false" || t == "0" || t == "no") v = 0.0;
    else return std::nullopt;
  } else {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (*first == '+') ++first;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) return std::nullopt;
  }
  if (!spec.admits(v)) return std::nullopt;
  return v;
}

}  // namespace

std::string GeoTable::format_cell(std::size_t row, std::size_t col) const {
  const auto& spec = schema_[col];
  const double v = data_[col][row];
  switch (spec.kind) {
    case ColumnKind::kBoolean: return v != 0.0 ? "true" : "false";
    case ColumnKind::kCategorical: return spec.categories.at(static_cast<std::size_t>(v));
    case ColumnKind::kInteger: return std::to_string(static_cast<long long>(v));
    default: return format_double(v);
  }
}

bool operator==(const GeoTable& a, const GeoTable& b) {
  return a.rows_ == b.rows_ && a.schema_ == b.schema_ && a.data_ == b.data_;
}

LoadedTable parse_table(std::istream& in, const Schema& schema) {
  auto header = csv::read_record(in);
  if (!header) fail(ErrorCode::kData, "CSV has no header row");
  if (!header->empty() && header->front().rfind("\xEF\xBB\xBF", 0) == 0) header->front().erase(0, 3);
  std::vector<std::size_t> field_of(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    auto it = std::find_if(header->begin(), header->end(),
                           [&](const std::string& h) { return trim(h) == schema[c].name; });
    if (it == header->end()) fail(ErrorCode::kSchema, "CSV header lacks column '" + schema[c].name + "'");
    field_of[c] = static_cast<std::size_t>(it - header->begin());
  }
  LoadedTable out{GeoTable(schema), 0};
  std::vector<double> row(schema.size());
  while (auto rec = csv::read_record(in)) {
    if (rec->size() == 1 && trim(rec->front()).empty()) continue;  // blank line
    bool ok = true;
    for (std::size_t c = 0; c < schema.size() && ok; ++c) {
      if (field_of[c] >= rec->size()) {
        ok = false;
        break;
      }
      auto v = parse_cell(schema[c], (*rec)[field_of[c]]);
      if (!v) ok = false;
      else row[c] = *v;
    }
    if (ok) out.table.append_row(row);
    else ++out.rejected_rows;
  }
  if (out.table.empty()) fail(ErrorCode::kData, "no valid rows in table");
  return out;
}

LoadedTable load_table(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open data file " + path.string());
  return parse_table(in, schema);
}

void write_table(std::ostream& out, const GeoTable& table) {
  std::vector<std::string> fields;
  for (const auto& c : table.schema().columns()) fields.push_back(c.name);
  csv::write_record(out, fields);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < table.cols(); ++c) fields[c] = table.format_cell(r, c);
    csv::write_record(out, fields);
  }
}

void write_table(const std::filesystem::path& path, const GeoTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  write_table(out, table);
}

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

}  // namespace

SplitIndices split_indices(std::size_t n, double fraction, std::uint64_t seed, std::span<const int> strata) {
  if (!(fraction > 0.0 && fraction < 1.0)) fail(ErrorCode::kConfig, "split fraction must lie in (0, 1)");
  const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (target < 1) fail(ErrorCode::kConfig, "split leaves the first part empty");
  if (!strata.empty() && strata.size() != n) fail(ErrorCode::kShape, "strata length differs from row count");

  Rng rng = make_rng(derive_seed(seed, 0x5b117));
  SplitIndices out;
  if (strata.empty()) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    shuffle(idx, rng);
    out.first.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(target));
    out.second.assign(idx.begin() + static_cast<std::ptrdiff_t>(target), idx.end());
  } else {
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[strata[i]].push_back(i);
    // Largest-remainder allocation; singleton strata are pinned to the first part.
    struct Alloc {
      int level;
      std::size_t take;
      double remainder;
      std::size_t size;
    };
    std::vector<Alloc> allocs;
    std::size_t assigned = 0;
    for (auto& [level, rows] : groups) {
      const double exact = fraction * static_cast<double>(rows.size());
      std::size_t take = rows.size() == 1 ? 1 : static_cast<std::size_t>(std::floor(exact));
      allocs.push_back({level, take, rows.size() == 1 ? -1.0 : exact - std::floor(exact), rows.size()});
      assigned += take;
    }
    std::vector<std::size_t> order(allocs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return allocs[a].remainder > allocs[b].remainder; });
    for (std::size_t k = 0; assigned < target && k < order.size(); ++k) {
      auto& a = allocs[order[k]];
      if (a.remainder >= 0.0 && a.take < a.size) {
        ++a.take;
        ++assigned;
      }
    }
    std::size_t gi = 0;
    for (auto& [level, rows] : groups) {
      shuffle(rows, rng);
      const std::size_t take = allocs[gi++].take;
      out.first.insert(out.first.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
      out.second.insert(out.second.end(), rows.begin() + static_cast<std::ptrdiff_t>(take), rows.end());
    }
  }
  std::sort(out.first.begin(), out.first.end());
  std::sort(out.second.begin(), out.second.end());
  return out;
}

std::pair<GeoTable, GeoTable> split(const GeoTable& table, double fraction, std::uint64_t seed,
                                    const std::optional<std::string>& stratify_on) {
  std::vector<int> strata;
  if (stratify_on) {
    const std::size_t c = table.schema().index_of(*stratify_on);
    if (!table.schema()[c].is_discrete())
      fail(ErrorCode::kConfig, "stratification column '" + *stratify_on + "' is not discrete");
    strata.resize(table.rows());
    for (std::size_t r = 0; r < table.rows(); ++r) strata[r] = static_cast<int>(table.at(r, c));
  }
  auto idx = split_indices(table.rows(), fraction, seed, strata);
  return {table.select(idx.first), table.select(idx.second)};
}

}  // namespace geosynth
