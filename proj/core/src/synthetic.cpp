#include "geosynth/synthetic.hpp"

#include <array>
#include <cmath>
#include <string>

#include "geosynth/random.hpp"

namespace geosynth::synth {

namespace {

constexpr double kMinLon = 12.3;
constexpr double kMinLat = 41.7;
constexpr double kTile = 0.1;
constexpr int kTiles = 4;

// Lake inside tile (2, 2).
constexpr double kLake[4] = {12.52, 41.92, 12.58, 41.98};

struct Cluster {
  double lon, lat, sd_lon, sd_lat, weight, premium;
};

constexpr std::array<Cluster, 5> kClusters{{
    {12.48, 41.89, 0.030, 0.022, 0.34, 0.55},  // centre
    {12.38, 41.78, 0.018, 0.020, 0.18, -0.25},
    {12.63, 41.77, 0.022, 0.016, 0.16, 0.05},
    {12.36, 42.03, 0.020, 0.025, 0.14, 0.30},
    {12.64, 42.04, 0.016, 0.021, 0.18, -0.10},
}};

Ring rect_ring(double x0, double y0, double x1, double y1) {
  return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}};
}

}  // namespace

Schema city_schema() {
  ColumnSpec lon{"lon", ColumnKind::kLongitude, {}, std::nullopt};
  ColumnSpec lat{"lat", ColumnKind::kLatitude, {}, std::nullopt};
  ColumnSpec price{"price", ColumnKind::kNumeric, {}, Bounds{1.0, 1e8}};
  ColumnSpec surface{"surface", ColumnKind::kNumeric, {}, Bounds{10.0, 1000.0}};
  ColumnSpec garage{"garage", ColumnKind::kBoolean, {}, std::nullopt};
  return Schema({lon, lat, price, surface, garage});
}

RegionGeometry city_geometry() {
  const double x1 = kMinLon + kTiles * kTile;
  const double y1 = kMinLat + kTiles * kTile;
  const Ring lake = rect_ring(kLake[0], kLake[1], kLake[2], kLake[3]);
  RegionGeometry g;
  g.region = Polygon({PolygonPart{rect_ring(kMinLon, kMinLat, x1, y1), {lake}}});
  for (int i = 0; i < kTiles; ++i)
    for (int j = 0; j < kTiles; ++j) {
      const double x = kMinLon + i * kTile;
      const double y = kMinLat + j * kTile;
      PolygonPart part{rect_ring(x, y, x + kTile, y + kTile), {}};
      if (kLake[0] > x && kLake[2] < x + kTile && kLake[1] > y && kLake[3] < y + kTile) part.holes.push_back(lake);
      const std::string id = std::string("tile_") + static_cast<char>('a' + j) + std::to_string(i + 1);
      g.subregions.emplace(id, Polygon({part}));
    }
  return g;
}

City make_city(std::size_t rows, std::uint64_t seed) {
  City city{GeoTable(city_schema()), city_geometry()};
  Rng rng = make_rng(derive_seed(seed, 0xc17));
  std::array<double, kClusters.size()> cdf{};
  double acc = 0.0;
  for (std::size_t k = 0; k < kClusters.size(); ++k) cdf[k] = acc += kClusters[k].weight;

  std::array<double, 5> row{};
  while (city.table.rows() < rows) {
    const double u = uniform01(rng) * acc;
    std::size_t k = 0;
    while (k + 1 < kClusters.size() && u > cdf[k]) ++k;
    const Cluster& c = kClusters[k];
    const double lon = c.lon + c.sd_lon * standard_normal(rng);
    const double lat = c.lat + c.sd_lat * standard_normal(rng);
    if (!city.geometry.region.contains(lon, lat)) continue;

    // Surfaces shrink towards cluster cores; prices carry a cluster premium
    // plus a smooth east-west gradient.
    const double dx = (lon - c.lon) / c.sd_lon;
    const double dy = (lat - c.lat) / c.sd_lat;
    const double r2 = dx * dx + dy * dy;
    const double log_surface = std::log(75.0) + 0.12 * std::sqrt(r2) + 0.3 * standard_normal(rng);
    const double surface = std::clamp(std::exp(log_surface), 12.0, 900.0);
    const double log_price = 12.2 + 0.8 * std::log(surface / 75.0) + c.premium * std::exp(-0.25 * r2) +
                             1.5 * (lon - 12.5) + 0.12 * standard_normal(rng);
    const double z = -0.8 + 1.4 * std::log(surface / 75.0) + 0.35 * std::sqrt(r2);
    const bool garage = uniform01(rng) < 1.0 / (1.0 + std::exp(-z));
    row = {lon, lat, std::exp(log_price), surface, garage ? 1.0 : 0.0};
    city.table.append_row(row);
  }
  return city;
}

}  // namespace geosynth::synth
