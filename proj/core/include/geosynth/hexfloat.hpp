#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

/// Bit-exact text encoding of doubles ("%a" hex floats) for checkpoints.
namespace geosynth::hex {

std::string encode(double v);
double decode(const std::string& s);

nlohmann::json encode_matrix(const Eigen::MatrixXd& m);
Eigen::MatrixXd decode_matrix(const nlohmann::json& j);

nlohmann::json encode_vector(const std::vector<double>& v);
std::vector<double> decode_vector(const nlohmann::json& j);

}  // namespace geosynth::hex
