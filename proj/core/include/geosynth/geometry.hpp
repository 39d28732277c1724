#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "geosynth/table.hpp"

namespace geosynth {

struct Point {
  double lon = 0.0;
  double lat = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Closed ring: first vertex equals last.
using Ring = std::vector<Point>;

struct BBox {
  double min_lon = 0.0;
  double min_lat = 0.0;
  double max_lon = 0.0;
  double max_lat = 0.0;
};

/// One outer ring plus holes.
struct PolygonPart {
  Ring outer;
  std::vector<Ring> holes;
};

/// Possibly multi-part polygon in lon/lat degrees. Membership follows the
/// even-odd rule over all rings; points on an edge count as inside.
class Polygon {
 public:
  Polygon() = default;
  explicit Polygon(std::vector<PolygonPart> parts);

  const std::vector<PolygonPart>& parts() const { return parts_; }
  const BBox& bbox() const { return bbox_; }
  bool empty() const { return parts_.empty(); }

  bool contains(double lon, double lat) const;
  double area() const;  // square degrees

  nlohmann::json to_geojson() const;
  static Polygon from_geojson(const nlohmann::json& geometry);

 private:
  std::vector<PolygonPart> parts_;
  BBox bbox_;
};

/// Rectangle helper, mostly for tests and synthetic data.
Polygon make_rectangle(double min_lon, double min_lat, double max_lon, double max_lat);

inline constexpr std::string_view kNoSubregion = "_none";

struct RegionGeometry {
  Polygon region;
  std::map<std::string, Polygon> subregions;  // ordered by id

  /// Throws when a subregion vertex or edge midpoint lies outside the region
  /// by more than `tolerance` degrees.
  void validate(double tolerance = 1e-6) const;

  nlohmann::json to_geojson() const;
  /// FeatureCollection; features carrying a "subregion_id" property are
  /// subregions, the others make up the region. Without any region feature
  /// the region is the union of the subregions.
  static RegionGeometry from_geojson(const nlohmann::json& j);
  static RegionGeometry load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

bool point_in_region(double lon, double lat, const Polygon& geom);

/// Distance in degrees from (lon, lat) to the nearest polygon edge.
double distance_to_boundary(double lon, double lat, const Polygon& geom);

/// First subregion (in id order) containing each row, or "_none".
std::vector<std::string> assign_subregion(const GeoTable& table, const RegionGeometry& geom);

/// Rejection sampling over the bounding box.
std::vector<Point> uniform_points_in_polygon(const Polygon& geom, std::size_t n, std::uint64_t seed);

}  // namespace geosynth
