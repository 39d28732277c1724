#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "geosynth/stats.hpp"

namespace geosynth::cli {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  // Write then rename so an interrupted run never leaves a partial file.
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) fail(ErrorCode::kIo, "cannot write " + path.string());
    f << text;
    if (!f) fail(ErrorCode::kIo, "write failed for " + path.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::kIo, "cannot move " + tmp.string() + " to " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, path.string() + " is not valid JSON: " + e.what());
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string shortest(double v) {
  std::ostringstream os;
  os << nlohmann::json(v).dump();
  return os.str();
}

std::string cell_name(gen::GeneratorKind kind, std::uint64_t seed) {
  return std::string(gen::to_string(kind)) + "_seed" + std::to_string(seed);
}

metrics::EvalConfig eval_config(const RunConfig& c, std::uint64_t master) {
  metrics::EvalConfig e = c.metrics;
  e.seed = master + kMetricsSeedOffset;
  e.split_seed = master + kSplitSeedOffset;
  e.generator = c.model;
  return e;
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  nlohmann::json kinds = nlohmann::json::array();
  for (auto k : benchmark_kinds) kinds.push_back(gen::to_string(k));
  const auto m = metrics.to_json();
  return {{"dataset", dataset},
          {"schema", schema},
          {"geometry", geometry},
          {"generator", gen::to_string(kind)},
          {"model", model.to_json()},
          {"n_synth", n_synth},
          {"metrics",
           {{"n_proj", m.at("n_proj")},
            {"p", m.at("p")},
            {"grid_cell", m.at("grid_cell")},
            {"moran", m.at("moran")},
            {"price_column", m.at("price_column")},
            {"privacy", m.at("privacy")},
            {"privacy_n_synth", m.at("privacy_n_synth")}}},
          {"seed", seed},
          {"out", out},
          {"benchmark", {{"kinds", kinds}, {"seeds", benchmark_seeds}, {"workers", workers}}},
          {"plot", {{"feature", plot_feature}, {"max_points", plot_points}}}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  try {
    if (!j.is_object()) fail(ErrorCode::kConfig, "config must be a JSON object");
    c.dataset = j.value("dataset", c.dataset);
    c.schema = j.value("schema", c.schema);
    c.geometry = j.value("geometry", c.geometry);
    if (j.contains("generator")) c.kind = gen::kind_from_string(j.at("generator").get<std::string>());
    if (j.contains("model")) c.model = gen::GeneratorConfig::from_json(j.at("model"));
    c.n_synth = j.value("n_synth", c.n_synth);
    if (j.contains("metrics")) c.metrics = metrics::EvalConfig::from_json(j.at("metrics"));
    c.seed = j.value("seed", c.seed);
    c.out = j.value("out", c.out);
    if (j.contains("benchmark")) {
      const auto& b = j.at("benchmark");
      if (b.contains("kinds")) {
        c.benchmark_kinds.clear();
        for (const auto& k : b.at("kinds")) c.benchmark_kinds.push_back(gen::kind_from_string(k.get<std::string>()));
      }
      c.benchmark_seeds = b.value("seeds", c.benchmark_seeds);
      c.workers = b.value("workers", c.workers);
    }
    if (j.contains("plot")) {
      c.plot_feature = j.at("plot").value("feature", c.plot_feature);
      c.plot_points = j.at("plot").value("max_points", c.plot_points);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("invalid config: ") + e.what());
  }
  if (c.workers == 0) fail(ErrorCode::kConfig, "workers must be at least 1");
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  return from_json(read_json(path), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

fs::path RunConfig::resolve(const std::string& p) const {
  const fs::path path(p);
  if (path.is_absolute() || base_dir.empty()) return path;
  return base_dir / path;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUsage:
    case ErrorCode::kConfig:
    case ErrorCode::kIo:
      return 2;
    case ErrorCode::kNumeric:
    case ErrorCode::kStaleTape:
      return 4;
    default:
      return 3;
  }
}

LoadedInputs load_inputs(const RunConfig& config, bool need_geometry) {
  if (config.dataset.empty()) fail(ErrorCode::kConfig, "config does not name a dataset");
  if (config.schema.empty()) fail(ErrorCode::kConfig, "config does not name a schema");
  const Schema schema = Schema::load(config.resolve(config.schema));
  auto loaded = load_table(config.resolve(config.dataset), schema);
  LoadedInputs in{std::move(loaded.table), loaded.rejected_rows, std::nullopt};
  if (!config.geometry.empty()) {
    in.geometry = RegionGeometry::load(config.resolve(config.geometry));
    in.geometry->validate();
  } else if (need_geometry) {
    fail(ErrorCode::kConfig, "config does not name a geometry file");
  }
  return in;
}

void cmd_fit(const RunConfig& config, const fs::path& out) {
  const auto in = load_inputs(config, true);
  const auto g = gen::FittedGenerator::fit(config.kind, in.table, *in.geometry, config.model,
                                           config.seed + kFitSeedOffset);
  g.save(out / "bundle");
  nlohmann::json log = {{"kind", gen::to_string(config.kind)},
                        {"seed", config.seed},
                        {"fit_seed", config.seed + kFitSeedOffset},
                        {"rows", in.table.rows()},
                        {"rejected_rows", in.rejected_rows},
                        {"flow_epoch_loss", g.flow_history()},
                        {"vae_epoch_loss", g.vae_history()}};
  write_text(out / "fit_log.json", log.dump(1) + "\n");
}

void cmd_generate(const fs::path& bundle, std::size_t n, std::uint64_t seed, const fs::path& out) {
  const auto g = gen::FittedGenerator::load(bundle);
  const GeoTable t = g.sample(n, seed + kSampleSeedOffset);
  std::ostringstream os;
  write_table(os, t);
  write_text(out / "synthetic.csv", os.str());
}

metrics::EvaluationReport cmd_evaluate(const RunConfig& config, const EvaluateSource& source, const fs::path& out) {
  const auto in = load_inputs(config, false);
  metrics::EvalConfig ec = eval_config(config, config.seed);
  metrics::EvalInputs ei;
  ei.real = &in.table;
  ei.geometry = in.geometry ? &*in.geometry : nullptr;
  GeoTable synth;
  if (source.bundle) {
    const auto g = gen::FittedGenerator::load(*source.bundle);
    if (!(g.schema() == in.table.schema())) fail(ErrorCode::kSchema, "bundle schema differs from the dataset schema");
    synth = g.sample(config.n_synth ? config.n_synth : in.table.rows(), config.seed + kSampleSeedOffset);
    ei.kind = g.kind();
    ec.generator = g.config();
  } else if (source.synth_csv) {
    synth = load_table(*source.synth_csv, in.table.schema()).table;
    ei.kind = source.kind;
  } else {
    fail(ErrorCode::kUsage, "evaluate needs --synth or --bundle");
  }
  ei.synth = &synth;
  auto report = metrics::evaluate(ei, ec);
  write_text(out / "report.json", report.to_json().dump(1) + "\n");
  write_text(out / "report.csv", metrics::EvaluationReport::csv_header() + "\n" + report.csv_row() + "\n");
  return report;
}

void cmd_benchmark(const RunConfig& config, const fs::path& out) {
  if (config.benchmark_kinds.empty()) fail(ErrorCode::kConfig, "benchmark needs at least one generator kind");
  if (config.benchmark_seeds.empty()) fail(ErrorCode::kConfig, "benchmark needs at least one seed");
  const auto in = load_inputs(config, true);
  const RegionGeometry& geom = *in.geometry;

  struct Cell {
    gen::GeneratorKind kind;
    std::uint64_t seed;
    fs::path path;
  };
  std::vector<Cell> cells;
  for (auto k : config.benchmark_kinds)
    for (auto s : config.benchmark_seeds) cells.push_back({k, s, out / "runs" / (cell_name(k, s) + ".json")});

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (!fs::exists(cells[i].path)) todo.push_back(i);

  auto run_cell = [&](const Cell& c) {
    metrics::EvaluationReport rep;
    try {
      const auto g = gen::FittedGenerator::fit(c.kind, in.table, geom, config.model, c.seed + kFitSeedOffset);
      const GeoTable synth = g.sample(config.n_synth ? config.n_synth : in.table.rows(), c.seed + kSampleSeedOffset);
      metrics::EvalInputs ei{&in.table, &synth, &geom, c.kind, {}};
      rep = metrics::evaluate(ei, eval_config(config, c.seed));
    } catch (const std::exception& e) {
      rep.generator_kind = gen::to_string(c.kind);
      rep.n_real = in.table.rows();
      rep.seed = c.seed + kMetricsSeedOffset;
      rep.config = eval_config(config, c.seed).to_json();
      rep.config_hash = metrics::fnv1a_hex(rep.config.dump());
      const auto* ge = dynamic_cast<const Error*>(&e);
      const std::string msg = std::string(ge ? to_string(ge->code()) : "error") + ": generation failed: " + e.what();
      for (const auto& name : metrics::EvaluationReport::field_names()) rep.fields[name] = {std::nullopt, msg};
    }
    nlohmann::json j = rep.to_json();
    j["master_seed"] = c.seed;
    write_text(c.path, j.dump(1) + "\n");
  };

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::optional<Error> io_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= todo.size()) return;
      try {
        run_cell(cells[todo[k]]);
      } catch (const Error& e) {
        std::lock_guard lock(error_mutex);
        if (!io_error) io_error = e;
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(config.workers, todo.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (io_error) throw *io_error;

  // Comparison table in fixed (kind, seed) order, then per-kind medians.
  const auto& names = metrics::EvaluationReport::field_names();
  std::string csv = "generator_kind,seed,n_real,n_synth";
  for (const auto& n : names) csv += "," + n;
  csv += "\n";
  std::map<std::string, std::map<std::string, std::vector<double>>> by_kind;
  for (const auto& c : cells) {
    const auto rep = metrics::EvaluationReport::from_json(read_json(c.path));
    csv += rep.generator_kind + "," + std::to_string(c.seed) + "," + std::to_string(rep.n_real) + "," +
           std::to_string(rep.n_synth);
    for (const auto& n : names) {
      csv += ",";
      const auto it = rep.fields.find(n);
      if (it != rep.fields.end() && it->second.ok()) {
        csv += shortest(*it->second.value);
        by_kind[rep.generator_kind][n].push_back(*it->second.value);
      }
    }
    csv += "\n";
  }
  for (auto k : config.benchmark_kinds) {
    const std::string kind = gen::to_string(k);
    csv += kind + ",median,,";
    for (const auto& n : names) {
      csv += ",";
      const auto& vals = by_kind[kind][n];
      if (!vals.empty()) csv += shortest(stats::median(vals));
    }
    csv += "\n";
  }
  write_text(out / "comparison.csv", csv);
}

std::string render_plot(const GeoTable& real, const GeoTable& synth, const RegionGeometry* geometry,
                        const std::string& feature, std::size_t max_points, std::uint64_t seed) {
  const auto col = real.schema().find(feature);
  if (!col) fail(ErrorCode::kConfig, "unknown feature '" + feature + "'");
  const ColumnSpec& spec = real.schema()[*col];

  BBox box{1e300, 1e300, -1e300, -1e300};
  auto grow = [&](double lon, double lat) {
    box.min_lon = std::min(box.min_lon, lon);
    box.max_lon = std::max(box.max_lon, lon);
    box.min_lat = std::min(box.min_lat, lat);
    box.max_lat = std::max(box.max_lat, lat);
  };
  if (geometry && !geometry->region.empty()) {
    const auto& b = geometry->region.bbox();
    grow(b.min_lon, b.min_lat);
    grow(b.max_lon, b.max_lat);
  }
  for (const GeoTable* t : {&real, &synth})
    for (std::size_t r = 0; r < t->rows(); ++r) grow(t->lon(r), t->lat(r));
  if (real.empty() && synth.empty()) box = {0, 0, 1, 1};
  const double w = std::max(box.max_lon - box.min_lon, 1e-9);
  const double h = std::max(box.max_lat - box.min_lat, 1e-9);

  constexpr double kPanel = 420.0;
  constexpr double kMargin = 30.0;
  const double scale = (kPanel - 2 * kMargin) / std::max(w, h);
  auto px = [&](double lon, double off) { return off + kMargin + (lon - box.min_lon) * scale; };
  auto py = [&](double lat) { return kMargin + 20.0 + (box.max_lat - lat) * scale; };

  // Colour: discrete palette, or a blue-to-red ramp over the real range.
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  double lo = 0.0, hi = 1.0;
  if (!spec.is_discrete() && !real.empty()) {
    const auto c = real.column(*col);
    lo = *std::min_element(c.begin(), c.end());
    hi = *std::max_element(c.begin(), c.end());
  }
  auto colour = [&](double v) -> std::string {
    if (spec.is_discrete()) return kPalette[static_cast<std::size_t>(v) % 10];
    const double t = hi > lo ? std::clamp((v - lo) / (hi - lo), 0.0, 1.0) : 0.5;
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(40 + 200 * t), 60, static_cast<int>(220 - 190 * t));
    return buf;
  };

  auto pick = [&](const GeoTable& t, std::uint64_t s) {
    std::vector<std::size_t> idx(t.rows());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (idx.size() <= max_points) return idx;
    Rng rng = make_rng(s);
    for (std::size_t i = 0; i < max_points; ++i)
      std::swap(idx[i], idx[i + static_cast<std::size_t>(uniform_index(rng, idx.size() - i))]);
    idx.resize(max_points);
    std::sort(idx.begin(), idx.end());
    return idx;
  };

  std::ostringstream svg;
  const double width = 2 * kPanel;
  const double height = kPanel + 60.0;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << fmt(width) << "\" height=\""
      << fmt(height) << "\" viewBox=\"0 0 " << fmt(width) << " " << fmt(height) << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const GeoTable* tables[] = {&real, &synth};
  const char* titles[] = {"real", "synthetic"};
  for (int p = 0; p < 2; ++p) {
    const double off = p * kPanel;
    svg << "<text x=\"" << fmt(off + kPanel / 2) << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"14\">" << titles[p] << " (" << feature << ")</text>\n";
    if (geometry)
      for (const auto& part : geometry->region.parts()) {
        svg << "<path fill=\"#f4f4f4\" fill-rule=\"evenodd\" stroke=\"#444\" stroke-width=\"1\" d=\"";
        auto ring = [&](const Ring& r) {
          for (std::size_t i = 0; i < r.size(); ++i)
            svg << (i ? " L" : "M") << fmt(px(r[i].lon, off)) << " " << fmt(py(r[i].lat));
          svg << " Z ";
        };
        ring(part.outer);
        for (const auto& hole : part.holes) ring(hole);
        svg << "\"/>\n";
      }
    const GeoTable& t = *tables[p];
    for (std::size_t r : pick(t, derive_seed(seed, 0x91, static_cast<std::uint64_t>(p))))
      svg << "<circle cx=\"" << fmt(px(t.lon(r), off)) << "\" cy=\"" << fmt(py(t.lat(r))) << "\" r=\"1.6\" fill=\""
          << colour(t.at(r, *col)) << "\" fill-opacity=\"0.8\"/>\n";
  }
  // Legend
  const double ly = kPanel + 40.0;
  if (spec.is_discrete()) {
    for (std::size_t l = 0; l < spec.level_count(); ++l) {
      const double lx = kMargin + 110.0 * static_cast<double>(l);
      const std::string label = spec.kind == ColumnKind::kBoolean ? (l == 0 ? "false" : "true") : spec.categories[l];
      svg << "<circle cx=\"" << fmt(lx) << "\" cy=\"" << fmt(ly) << "\" r=\"5\" fill=\"" << colour(static_cast<double>(l))
          << "\"/>\n<text x=\"" << fmt(lx + 10) << "\" y=\"" << fmt(ly + 4)
          << "\" font-family=\"sans-serif\" font-size=\"12\">" << label << "</text>\n";
    }
  } else {
    svg << "<text x=\"" << fmt(kMargin) << "\" y=\"" << fmt(ly + 4) << "\" font-family=\"sans-serif\" font-size=\"12\">"
        << feature << ": " << shortest(lo) << " (blue) to " << shortest(hi) << " (red)</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void cmd_plot(const RunConfig& config, const fs::path& synth_csv, const fs::path& out) {
  const auto in = load_inputs(config, false);
  if (config.plot_feature.empty()) fail(ErrorCode::kConfig, "plot needs a feature (--feature)");
  if (!in.table.schema().find(config.plot_feature))
    fail(ErrorCode::kConfig, "unknown feature '" + config.plot_feature + "'");
  const GeoTable synth = load_table(synth_csv, in.table.schema()).table;
  write_text(out / "plot.svg", render_plot(in.table, synth, in.geometry ? &*in.geometry : nullptr, config.plot_feature,
                                           config.plot_points, config.seed + kMetricsSeedOffset));
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

int run(int argc, const char* const* argv) {
  CLI::App app{"geosynth: geolocated synthetic populations"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> workers;
  app.add_option("--config", config_path, "run configuration (JSON)");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out", out, "output directory");
  app.add_option("--workers", workers, "benchmark worker threads");

  auto* fit = app.add_subcommand("fit", "fit a generator and write a bundle");
  std::string kind;
  fit->add_option("--kind", kind, "generator kind (overrides the config)");

  auto* generate = app.add_subcommand("generate", "sample a synthetic CSV from a bundle");
  std::string bundle;
  std::optional<std::size_t> n;
  generate->add_option("--bundle", bundle, "bundle directory")->required();
  generate->add_option("-n,--n", n, "number of rows");

  auto* evaluate = app.add_subcommand("evaluate", "score synthetic data against the real table");
  std::string synth_csv;
  std::string eval_bundle;
  std::string eval_kind;
  evaluate->add_option("--synth", synth_csv, "synthetic CSV");
  evaluate->add_option("--bundle", eval_bundle, "bundle directory (enables privacy)");
  evaluate->add_option("--kind", eval_kind, "generator kind used for the privacy refit");

  auto* benchmark = app.add_subcommand("benchmark", "compare generator kinds over several seeds");
  std::string kinds_arg;
  std::string seeds_arg;
  benchmark->add_option("--kinds", kinds_arg, "comma-separated generator kinds");
  benchmark->add_option("--seeds", seeds_arg, "comma-separated master seeds");

  auto* plot = app.add_subcommand("plot", "write an SVG scatter map");
  std::string plot_synth;
  std::string feature;
  plot->add_option("--synth", plot_synth, "synthetic CSV")->required();
  plot->add_option("--feature", feature, "column used for colour");

  for (auto* sub : {fit, generate, evaluate, benchmark, plot}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) config = RunConfig::load(config_path);
    else if (!generate->parsed()) fail(ErrorCode::kUsage, "--config is required");
    if (seed) config.seed = *seed;
    if (workers) config.workers = *workers;
    if (config.workers == 0) fail(ErrorCode::kUsage, "--workers must be at least 1");
    const fs::path out_dir = out.empty() ? config.resolve(config.out) : fs::path(out);

    auto split_list = [](const std::string& s) {
      std::vector<std::string> parts;
      std::stringstream ss(s);
      for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) parts.push_back(item);
      return parts;
    };

    if (fit->parsed()) {
      if (!kind.empty()) config.kind = gen::kind_from_string(kind);
      cmd_fit(config, out_dir);
      std::cout << "bundle written to " << (out_dir / "bundle").string() << "\n";
    } else if (generate->parsed()) {
      const std::size_t rows = n ? *n : config.n_synth;
      if (!n && config.n_synth == 0) fail(ErrorCode::kUsage, "generate needs --n (or n_synth in the config)");
      cmd_generate(bundle, rows, config.seed, out_dir);
      std::cout << rows << " rows written to " << (out_dir / "synthetic.csv").string() << "\n";
    } else if (evaluate->parsed()) {
      EvaluateSource src;
      if (!synth_csv.empty()) src.synth_csv = fs::path(synth_csv);
      if (!eval_bundle.empty()) src.bundle = fs::path(eval_bundle);
      if (!eval_kind.empty()) src.kind = gen::kind_from_string(eval_kind);
      if (src.synth_csv && src.bundle) fail(ErrorCode::kUsage, "pass either --synth or --bundle, not both");
      const auto rep = cmd_evaluate(config, src, out_dir);
      std::cout << metrics::EvaluationReport::csv_header() << "\n" << rep.csv_row() << "\n";
      if (rep.all_failed()) {
        std::cerr << nlohmann::json{{"error", "evaluation"}, {"message", "every metric failed"}}.dump() << "\n";
        return 3;
      }
    } else if (benchmark->parsed()) {
      if (!kinds_arg.empty()) {
        config.benchmark_kinds.clear();
        for (const auto& k : split_list(kinds_arg)) config.benchmark_kinds.push_back(gen::kind_from_string(k));
      }
      if (!seeds_arg.empty()) {
        config.benchmark_seeds.clear();
        for (const auto& s : split_list(seeds_arg)) {
          std::uint64_t v = 0;
          const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
          if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(ErrorCode::kUsage, "bad seed '" + s + "'");
          config.benchmark_seeds.push_back(v);
        }
      }
      cmd_benchmark(config, out_dir);
      std::cout << "comparison written to " << (out_dir / "comparison.csv").string() << "\n";
    } else if (plot->parsed()) {
      if (!feature.empty()) config.plot_feature = feature;
      cmd_plot(config, plot_synth, out_dir);
      std::cout << "plot written to " << (out_dir / "plot.svg").string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << nlohmann::json{{"error", to_string(e.code())}, {"message", e.what()}}.dump() << "\n";
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << nlohmann::json{{"error", "config"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace geosynth::cli
