#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geosynth/geometry.hpp"
#include "geosynth/table.hpp"

namespace testkit {

using geosynth::ColumnKind;
using geosynth::ColumnSpec;
using geosynth::GeoTable;
using geosynth::Schema;

inline ColumnSpec col(std::string name, ColumnKind kind, std::vector<std::string> cats = {}) {
  ColumnSpec c;
  c.name = std::move(name);
  c.kind = kind;
  c.categories = std::move(cats);
  return c;
}

inline GeoTable parse(const std::string& csv, const Schema& schema, std::size_t* rejected = nullptr) {
  std::istringstream in(csv);
  auto loaded = geosynth::parse_table(in, schema);
  if (rejected) *rejected = loaded.rejected_rows;
  return loaded.table;
}

/// Table from row-major values.
inline GeoTable table_of(const Schema& schema, const std::vector<std::vector<double>>& rows) {
  GeoTable t(schema);
  for (const auto& r : rows) t.append_row(r);
  return t;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

/// Central difference of f at x along coordinate i.
inline double central_diff(const std::function<double()>& f, double& x, double h = 1e-5) {
  const double keep = x;
  x = keep + h;
  const double fp = f();
  x = keep - h;
  const double fm = f();
  x = keep;
  return (fp - fm) / (2 * h);
}

inline geosynth::RegionGeometry square_geometry(double lo = 0.0, double hi = 1.0) {
  geosynth::RegionGeometry g;
  g.region = geosynth::make_rectangle(lo, lo, hi, hi);
  return g;
}

}  // namespace testkit
