#include "geosynth/autodiff.hpp"

namespace geosynth::nn {

std::vector<double> ScalarTape::backward(std::span<const std::pair<Var, double>> seeds) const {
  std::vector<double> adj(nodes_.size(), 0.0);
  for (const auto& [v, s] : seeds) adj[v.index()] += s;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    const double g = adj[i];
    if (g == 0.0) continue;
    const Node& n = nodes_[i];
    if (n.a != i) adj[n.a] += n.da * g;
    if (n.b != i && n.db != 0.0) adj[n.b] += n.db * g;
  }
  return adj;
}

}  // namespace geosynth::nn
