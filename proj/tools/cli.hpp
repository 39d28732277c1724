#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geosynth/error.hpp"
#include "geosynth/generators.hpp"
#include "geosynth/metrics.hpp"

namespace geosynth::cli {

namespace fs = std::filesystem;

/// Sub-seed offsets added to the master seed.
inline constexpr std::uint64_t kFitSeedOffset = 0;
inline constexpr std::uint64_t kSampleSeedOffset = 1;
inline constexpr std::uint64_t kMetricsSeedOffset = 2;
inline constexpr std::uint64_t kSplitSeedOffset = 3;

/// Everything a command needs. Relative paths resolve against the directory
/// of the config file they came from.
struct RunConfig {
  std::string dataset;
  std::string schema;
  std::string geometry;  // optional for evaluate and plot
  gen::GeneratorKind kind = gen::GeneratorKind::kNfVae;
  gen::GeneratorConfig model;
  std::size_t n_synth = 0;  // 0: as many rows as the real table
  metrics::EvalConfig metrics;
  std::uint64_t seed = 0;
  std::string out = "geosynth_out";
  std::vector<gen::GeneratorKind> benchmark_kinds = gen::all_kinds();
  std::vector<std::uint64_t> benchmark_seeds{0, 1, 2};
  std::size_t workers = 1;
  std::string plot_feature;
  std::size_t plot_points = 1000;

  fs::path base_dir;  // not serialized

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j, const fs::path& base_dir = {});
  static RunConfig load(const fs::path& path);

  fs::path resolve(const std::string& p) const;
};

int exit_code_for(ErrorCode code);

struct LoadedInputs {
  GeoTable table;
  std::size_t rejected_rows = 0;
  std::optional<RegionGeometry> geometry;
};

/// Reads the dataset, schema and (when configured) geometry.
LoadedInputs load_inputs(const RunConfig& config, bool need_geometry);

/// Fits the configured kind and writes out/bundle plus out/fit_log.json.
void cmd_fit(const RunConfig& config, const fs::path& out);
/// Writes out/synthetic.csv with n rows sampled from a bundle.
void cmd_generate(const fs::path& bundle, std::size_t n, std::uint64_t seed, const fs::path& out);

struct EvaluateSource {
  std::optional<fs::path> synth_csv;
  std::optional<fs::path> bundle;
  std::optional<gen::GeneratorKind> kind;
};

/// Writes out/report.json and out/report.csv.
metrics::EvaluationReport cmd_evaluate(const RunConfig& config, const EvaluateSource& source, const fs::path& out);

/// Runs every (kind, seed) cell not already present under out/runs and
/// writes out/comparison.csv with per-kind median rows.
void cmd_benchmark(const RunConfig& config, const fs::path& out);

/// Side-by-side SVG scatter maps of real and synthetic rows.
void cmd_plot(const RunConfig& config, const fs::path& synth_csv, const fs::path& out);
std::string render_plot(const GeoTable& real, const GeoTable& synth, const RegionGeometry* geometry,
                        const std::string& feature, std::size_t max_points, std::uint64_t seed);

/// Full command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace geosynth::cli
