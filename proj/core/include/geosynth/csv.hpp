#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace geosynth::csv {

/// Reads one RFC-4180 record. Returns nullopt at end of input.
std::optional<std::vector<std::string>> read_record(std::istream& in);

void write_record(std::ostream& out, const std::vector<std::string>& fields);

std::string quote(const std::string& field);

}  // namespace geosynth::csv
