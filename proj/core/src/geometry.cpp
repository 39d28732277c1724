#include "geosynth/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "geosynth/error.hpp"
#include "geosynth/random.hpp"

namespace geosynth {

namespace {

constexpr double kEdgeTolerance = 1e-12;

void check_ring(const Ring& ring) {
  if (ring.size() < 4) fail(ErrorCode::kData, "polygon ring needs at least 4 vertices (closed triangle)");
  if (!(ring.front() == ring.back())) fail(ErrorCode::kData, "polygon ring is not closed");
  for (const auto& p : ring)
    if (!std::isfinite(p.lon) || !std::isfinite(p.lat)) fail(ErrorCode::kData, "non-finite polygon vertex");
}

double ring_signed_area(const Ring& ring) {
  double a = 0.0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i)
    a += ring[i].lon * ring[i + 1].lat - ring[i + 1].lon * ring[i].lat;
  return 0.5 * a;
}

bool on_segment(double x, double y, const Point& a, const Point& b) {
  const double cross = (b.lon - a.lon) * (y - a.lat) - (b.lat - a.lat) * (x - a.lon);
  const double len = std::hypot(b.lon - a.lon, b.lat - a.lat);
  if (std::abs(cross) > kEdgeTolerance * std::max(len, 1.0)) return false;
  return x >= std::min(a.lon, b.lon) - kEdgeTolerance && x <= std::max(a.lon, b.lon) + kEdgeTolerance &&
         y >= std::min(a.lat, b.lat) - kEdgeTolerance && y <= std::max(a.lat, b.lat) + kEdgeTolerance;
}

// Returns +1 for a crossing, 0 otherwise; sets `boundary` when on an edge.
bool ring_toggle(const Ring& ring, double x, double y, bool& boundary) {
  bool inside = false;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    const Point& a = ring[i];
    const Point& b = ring[i + 1];
    if (on_segment(x, y, a, b)) {
      boundary = true;
      return false;
    }
    if ((a.lat > y) != (b.lat > y)) {
      const double xi = a.lon + (y - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
      if (x < xi) inside = !inside;
    }
  }
  return inside;
}

double segment_distance(double x, double y, const Point& a, const Point& b) {
  const double dx = b.lon - a.lon;
  const double dy = b.lat - a.lat;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((x - a.lon) * dx + (y - a.lat) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(x - (a.lon + t * dx), y - (a.lat + t * dy));
}

Ring ring_from_json(const nlohmann::json& j) {
  Ring r;
  for (const auto& p : j) r.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  if (!r.empty() && !(r.front() == r.back())) r.push_back(r.front());
  return r;
}

nlohmann::json ring_to_json(const Ring& r) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : r) out.push_back({p.lon, p.lat});
  return out;
}

PolygonPart part_from_json(const nlohmann::json& rings) {
  PolygonPart part;
  for (std::size_t i = 0; i < rings.size(); ++i) {
    if (i == 0) part.outer = ring_from_json(rings[i]);
    else part.holes.push_back(ring_from_json(rings[i]));
  }
  return part;
}

}  // namespace

Polygon::Polygon(std::vector<PolygonPart> parts) : parts_(std::move(parts)) {
  bbox_ = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& part : parts_) {
    check_ring(part.outer);
    for (const auto& h : part.holes) check_ring(h);
    for (const auto& p : part.outer) {
      bbox_.min_lon = std::min(bbox_.min_lon, p.lon);
      bbox_.max_lon = std::max(bbox_.max_lon, p.lon);
      bbox_.min_lat = std::min(bbox_.min_lat, p.lat);
      bbox_.max_lat = std::max(bbox_.max_lat, p.lat);
    }
  }
  if (parts_.empty()) bbox_ = {};
}

bool Polygon::contains(double lon, double lat) const {
  if (parts_.empty()) return false;
  if (lon < bbox_.min_lon - kEdgeTolerance || lon > bbox_.max_lon + kEdgeTolerance ||
      lat < bbox_.min_lat - kEdgeTolerance || lat > bbox_.max_lat + kEdgeTolerance)
    return false;
  bool inside = false;
  bool boundary = false;
  for (const auto& part : parts_) {
    if (ring_toggle(part.outer, lon, lat, boundary)) inside = !inside;
    if (boundary) return true;
    for (const auto& h : part.holes) {
      if (ring_toggle(h, lon, lat, boundary)) inside = !inside;
      if (boundary) return true;
    }
  }
  return inside;
}

double Polygon::area() const {
  double a = 0.0;
  for (const auto& part : parts_) {
    a += std::abs(ring_signed_area(part.outer));
    for (const auto& h : part.holes) a -= std::abs(ring_signed_area(h));
  }
  return std::max(a, 0.0);
}

nlohmann::json Polygon::to_geojson() const {
  auto polys = nlohmann::json::array();
  for (const auto& part : parts_) {
    auto rings = nlohmann::json::array();
    rings.push_back(ring_to_json(part.outer));
    for (const auto& h : part.holes) rings.push_back(ring_to_json(h));
    polys.push_back(std::move(rings));
  }
  if (polys.size() == 1) return {{"type", "Polygon"}, {"coordinates", polys[0]}};
  return {{"type", "MultiPolygon"}, {"coordinates", polys}};
}

Polygon Polygon::from_geojson(const nlohmann::json& geometry) {
  const auto type = geometry.at("type").get<std::string>();
  std::vector<PolygonPart> parts;
  if (type == "Polygon") {
    parts.push_back(part_from_json(geometry.at("coordinates")));
  } else if (type == "MultiPolygon") {
    for (const auto& p : geometry.at("coordinates")) parts.push_back(part_from_json(p));
  } else {
    fail(ErrorCode::kData, "unsupported GeoJSON geometry type '" + type + "'");
  }
  return Polygon(std::move(parts));
}

Polygon make_rectangle(double min_lon, double min_lat, double max_lon, double max_lat) {
  Ring r{{min_lon, min_lat}, {max_lon, min_lat}, {max_lon, max_lat}, {min_lon, max_lat}, {min_lon, min_lat}};
  return Polygon({PolygonPart{std::move(r), {}}});
}

bool point_in_region(double lon, double lat, const Polygon& geom) { return geom.contains(lon, lat); }

double distance_to_boundary(double lon, double lat, const Polygon& geom) {
  double best = std::numeric_limits<double>::infinity();
  auto scan = [&](const Ring& r) {
    for (std::size_t i = 0; i + 1 < r.size(); ++i) best = std::min(best, segment_distance(lon, lat, r[i], r[i + 1]));
  };
  for (const auto& part : geom.parts()) {
    scan(part.outer);
    for (const auto& h : part.holes) scan(h);
  }
  return best;
}

void RegionGeometry::validate(double tolerance) const {
  if (region.empty()) fail(ErrorCode::kData, "geometry has no region polygon");
  auto check = [&](const std::string& id, double x, double y) {
    if (!region.contains(x, y) && distance_to_boundary(x, y, region) > tolerance)
      fail(ErrorCode::kData, "subregion '" + id + "' extends outside the region");
  };
  for (const auto& [id, poly] : subregions) {
    auto scan = [&](const Ring& r) {
      for (std::size_t i = 0; i + 1 < r.size(); ++i) {
        check(id, r[i].lon, r[i].lat);
        check(id, 0.5 * (r[i].lon + r[i + 1].lon), 0.5 * (r[i].lat + r[i + 1].lat));
      }
    };
    for (const auto& part : poly.parts()) {
      scan(part.outer);
      for (const auto& h : part.holes) scan(h);
    }
  }
}

nlohmann::json RegionGeometry::to_geojson() const {
  auto features = nlohmann::json::array();
  features.push_back({{"type", "Feature"}, {"properties", {{"role", "region"}}}, {"geometry", region.to_geojson()}});
  for (const auto& [id, poly] : subregions)
    features.push_back({{"type", "Feature"}, {"properties", {{"subregion_id", id}}}, {"geometry", poly.to_geojson()}});
  return {{"type", "FeatureCollection"}, {"features", features}};
}

RegionGeometry RegionGeometry::from_geojson(const nlohmann::json& j) {
  RegionGeometry g;
  std::vector<PolygonPart> region_parts;
  std::vector<PolygonPart> union_parts;
  try {
    if (j.at("type").get<std::string>() != "FeatureCollection")
      fail(ErrorCode::kData, "geometry must be a GeoJSON FeatureCollection");
    for (const auto& f : j.at("features")) {
      Polygon poly = Polygon::from_geojson(f.at("geometry"));
      const auto& props = f.contains("properties") && f.at("properties").is_object() ? f.at("properties")
                                                                                      : nlohmann::json::object();
      if (props.contains("subregion_id")) {
        const auto& idj = props.at("subregion_id");
        const std::string id = idj.is_string() ? idj.get<std::string>() : idj.dump();
        if (id == kNoSubregion) fail(ErrorCode::kData, "subregion id '_none' is reserved");
        if (!g.subregions.emplace(id, poly).second) fail(ErrorCode::kData, "duplicate subregion id '" + id + "'");
        union_parts.insert(union_parts.end(), poly.parts().begin(), poly.parts().end());
      } else {
        region_parts.insert(region_parts.end(), poly.parts().begin(), poly.parts().end());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kData, std::string("malformed GeoJSON: ") + e.what());
  }
  g.region = Polygon(region_parts.empty() ? std::move(union_parts) : std::move(region_parts));
  g.validate();
  return g;
}

RegionGeometry RegionGeometry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open geometry file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kData, "geometry file " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_geojson(j);
}

void RegionGeometry::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << to_geojson().dump(1) << '\n';
}

std::vector<std::string> assign_subregion(const GeoTable& table, const RegionGeometry& geom) {
  std::vector<std::string> out(table.rows(), std::string(kNoSubregion));
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (const auto& [id, poly] : geom.subregions) {
      if (poly.contains(table.lon(r), table.lat(r))) {
        out[r] = id;
        break;
      }
    }
  }
  return out;
}

std::vector<Point> uniform_points_in_polygon(const Polygon& geom, std::size_t n, std::uint64_t seed) {
  if (geom.empty() || !(geom.area() > 0.0)) fail(ErrorCode::kDegenerate, "polygon has zero area");
  constexpr std::uint64_t kCheckAfter = 10'000'000;
  constexpr double kMinAcceptance = 1e-4;
  Rng rng = make_rng(derive_seed(seed, 0x901));
  const BBox& b = geom.bbox();
  std::vector<Point> out;
  out.reserve(n);
  std::uint64_t proposals = 0;
  while (out.size() < n) {
    const double x = uniform(rng, b.min_lon, b.max_lon);
    const double y = uniform(rng, b.min_lat, b.max_lat);
    ++proposals;
    if (geom.contains(x, y)) out.push_back({x, y});
    if (proposals >= kCheckAfter && static_cast<double>(out.size()) < kMinAcceptance * static_cast<double>(proposals))
      fail(ErrorCode::kDegenerate, "rejection sampling acceptance below 1e-4; polygon is degenerate");
  }
  return out;
}

}  // namespace geosynth
