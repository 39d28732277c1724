#pragma once

#include <cstdint>

#include "geosynth/geometry.hpp"
#include "geosynth/table.hpp"

namespace geosynth::synth {

/// Toy housing market on a 0.4 x 0.4 degree square with a lake: five
/// clustered neighbourhoods, a log-price with spatial structure, a lognormal
/// surface and a garage flag that depends on both.
struct City {
  GeoTable table;
  RegionGeometry geometry;
};

Schema city_schema();
/// Region with the lake hole and a 4 x 4 grid of named tiles.
RegionGeometry city_geometry();
City make_city(std::size_t rows, std::uint64_t seed);

}  // namespace geosynth::synth
