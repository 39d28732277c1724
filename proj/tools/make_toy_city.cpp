// Writes the bundled toy city: city.csv, schema.json, geometry.geojson.
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "geosynth/synthetic.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_toy_city <dir> [rows=5000] [seed=7]\n";
    return 2;
  }
  namespace fs = std::filesystem;
  const fs::path dir = argv[1];
  const std::size_t rows = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 5000;
  const std::uint64_t seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 7;
  try {
    fs::create_directories(dir);
    const auto city = geosynth::synth::make_city(rows, seed);
    geosynth::write_table(dir / "city.csv", city.table);
    std::ofstream(dir / "schema.json") << city.table.schema().to_json().dump(1) << "\n";
    city.geometry.save(dir / "geometry.geojson");
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 3;
  }
  return 0;
}
