#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "geosynth/synthetic.hpp"

using namespace geosynth;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void dump(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

// A 600-row city with tiny models so every command runs in seconds.
struct Workspace {
  fs::path dir;

  explicit Workspace(const std::string& name) : dir(fs::temp_directory_path() / ("geosynth_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto city = synth::make_city(600, 3);
    write_table(dir / "city.csv", city.table);
    dump(dir / "schema.json", city.table.schema().to_json().dump());
    city.geometry.save(dir / "geometry.geojson");
    write_config(config_json());
  }
  ~Workspace() { fs::remove_all(dir); }

  static nlohmann::json config_json() {
    return {{"dataset", "city.csv"},
            {"schema", "schema.json"},
            {"geometry", "geometry.geojson"},
            {"generator", "nf_vae"},
            {"model",
             {{"flow", {{"arch", {{"layers", 2}, {"hidden", {8}}}}, {"train", {{"epochs", 2}}}}},
              {"vae", {{"arch", {{"encoder_hidden", {8}}, {"decoder_hidden", {8}}}}, {"train", {{"epochs", 2}}}}}}},
            {"metrics", {{"n_proj", 50}, {"grid_cell", 0.05}}},
            {"seed", 4},
            {"out", "out"},
            {"benchmark", {{"kinds", {"global_shuffle", "copula"}}, {"seeds", {0, 1}}}},
            {"plot", {{"feature", "garage"}, {"max_points", 200}}}};
  }
  void write_config(const nlohmann::json& j) const { dump(dir / "config.json", j.dump()); }
  std::string config() const { return (dir / "config.json").string(); }
  fs::path out() const { return dir / "out"; }

  int run(std::vector<std::string> args) const {
    args.insert(args.begin(), "geosynth");
    return cli::run(args);
  }
};

}  // namespace

TEST_CASE("run config survives a JSON round trip") {
  auto j = Workspace::config_json();
  const auto a = cli::RunConfig::from_json(j, "/base");
  const auto b = cli::RunConfig::from_json(a.to_json(), "/base");
  CHECK(a.to_json() == b.to_json());
  CHECK(a.resolve("city.csv") == fs::path("/base/city.csv"));
  CHECK(a.model.flow_arch.layers == 2);
  CHECK(a.benchmark_seeds == std::vector<std::uint64_t>{0, 1});
  j["benchmark"]["workers"] = 0;
  CHECK_THROWS_AS(cli::RunConfig::from_json(j), Error);
  j = Workspace::config_json();
  j["generator"] = "no_such_kind";
  CHECK_THROWS_AS(cli::RunConfig::from_json(j), Error);
}

TEST_CASE("exit codes for usage, config and data problems") {
  Workspace ws("exit");
  CHECK(ws.run({}) == 2);
  CHECK(ws.run({"fit"}) == 2);
  CHECK(ws.run({"fly", "--config", ws.config()}) == 2);
  CHECK(ws.run({"generate"}) == 2);

  auto j = Workspace::config_json();
  j["schema"] = "missing.json";
  ws.write_config(j);
  CHECK(ws.run({"fit", "--config", ws.config()}) == 2);

  dump(ws.dir / "config.json", "{not json");
  CHECK(ws.run({"fit", "--config", ws.config()}) == 2);

  // Header that does not match the schema is a data error.
  ws.write_config(Workspace::config_json());
  dump(ws.dir / "city.csv", "a,b\n1,2\n");
  CHECK(ws.run({"fit", "--config", ws.config(), "--kind", "global_shuffle"}) == 3);
}

TEST_CASE("fit, generate, evaluate and plot are deterministic") {
  Workspace ws("pipeline");
  const auto out = ws.out().string();
  REQUIRE(ws.run({"fit", "--config", ws.config(), "--out", out}) == 0);
  const auto log = nlohmann::json::parse(slurp(ws.out() / "fit_log.json"));
  CHECK(log.at("kind") == "nf_vae");
  CHECK(log.at("rows") == 600);
  CHECK(log.at("vae_epoch_loss").size() == 2);
  const std::string vae = slurp(ws.out() / "bundle" / "vae.json");

  const auto bundle = (ws.out() / "bundle").string();
  REQUIRE(ws.run({"generate", "--config", ws.config(), "--bundle", bundle, "-n", "300", "--out", out}) == 0);
  const std::string csv = slurp(ws.out() / "synthetic.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 301);

  REQUIRE(ws.run({"fit", "--config", ws.config(), "--out", out}) == 0);
  CHECK(slurp(ws.out() / "bundle" / "vae.json") == vae);
  REQUIRE(ws.run({"generate", "--config", ws.config(), "--bundle", bundle, "-n", "300", "--out", out}) == 0);
  CHECK(slurp(ws.out() / "synthetic.csv") == csv);

  const auto synth = (ws.out() / "synthetic.csv").string();
  REQUIRE(ws.run({"evaluate", "--config", ws.config(), "--synth", synth, "--out", out}) == 0);
  const auto rep = metrics::EvaluationReport::from_json(nlohmann::json::parse(slurp(ws.out() / "report.json")));
  CHECK(rep.fields.at("d_geo").ok());
  CHECK(rep.fields.at("d_utility").ok());
  CHECK_FALSE(rep.fields.at("rho_privacy").ok());
  CHECK(rep.seeds.at("privacy") == 4 + cli::kSplitSeedOffset);

  REQUIRE(ws.run({"plot", "--config", ws.config(), "--synth", synth, "--out", out}) == 0);
  const std::string svg = slurp(ws.out() / "plot.svg");
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find(">true<") != std::string::npos);
  CHECK(svg.find(">false<") != std::string::npos);
  REQUIRE(ws.run({"plot", "--config", ws.config(), "--synth", synth, "--out", out}) == 0);
  CHECK(slurp(ws.out() / "plot.svg") == svg);
}

TEST_CASE("generate with zero rows writes only the header") {
  Workspace ws("empty");
  const auto out = ws.out().string();
  REQUIRE(ws.run({"fit", "--config", ws.config(), "--kind", "copula", "--out", out}) == 0);
  REQUIRE(ws.run({"generate", "--bundle", (ws.out() / "bundle").string(), "-n", "0", "--out", out}) == 0);
  const std::string csv = slurp(ws.out() / "synthetic.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1);
  CHECK(csv.rfind("lon,", 0) == 0);
}

TEST_CASE("evaluate without geometry marks geometry-dependent metrics unavailable") {
  Workspace ws("nogeo");
  auto j = Workspace::config_json();
  j.erase("geometry");
  ws.write_config(j);
  const auto out = ws.out().string();
  const auto real = (ws.dir / "city.csv").string();
  REQUIRE(ws.run({"evaluate", "--config", ws.config(), "--synth", real, "--kind", "copula", "--out", out}) == 0);
  const auto rep = metrics::EvaluationReport::from_json(nlohmann::json::parse(slurp(ws.out() / "report.json")));
  CHECK(*rep.fields.at("d_geo").value == 0.0);
  CHECK(*rep.fields.at("novelty").value == 0.0);
  CHECK(rep.fields.at("d_utility").error.find("unavailable") != std::string::npos);
  CHECK(rep.fields.at("rho_privacy").error.find("unavailable") != std::string::npos);
  CHECK(ws.run({"benchmark", "--config", ws.config(), "--out", out}) == 2);
}

TEST_CASE("benchmark writes medians and resumes finished cells") {
  Workspace ws("bench");
  const auto out = ws.out().string();
  REQUIRE(ws.run({"benchmark", "--config", ws.config(), "--workers", "2", "--out", out}) == 0);
  const std::string table = slurp(ws.out() / "comparison.csv");
  std::istringstream lines(table);
  std::vector<std::string> rows;
  for (std::string l; std::getline(lines, l);) rows.push_back(l);
  REQUIRE(rows.size() == 1 + 4 + 2);
  CHECK(rows[0].rfind("generator_kind,seed,n_real,n_synth,d_geo", 0) == 0);
  CHECK(rows[1].rfind("global_shuffle,0,", 0) == 0);
  CHECK(rows[5].rfind("global_shuffle,median,,", 0) == 0);
  CHECK(rows[6].rfind("copula,median,,", 0) == 0);

  // Finished cells are kept as they are; a removed cell is recomputed identically.
  const auto cell = ws.out() / "runs" / "copula_seed1.json";
  const std::string before = slurp(cell);
  dump(ws.out() / "runs" / "global_shuffle_seed0.json", slurp(ws.out() / "runs" / "global_shuffle_seed0.json"));
  fs::remove(cell);
  REQUIRE(ws.run({"benchmark", "--config", ws.config(), "--out", out}) == 0);
  CHECK(slurp(cell) == before);
  CHECK(slurp(ws.out() / "comparison.csv") == table);
}

TEST_CASE("plot renders categorical and continuous colourings") {
  const auto city = synth::make_city(300, 1);
  const auto a = cli::render_plot(city.table, city.table, &city.geometry, "surface", 100, 2);
  CHECK(a == cli::render_plot(city.table, city.table, &city.geometry, "surface", 100, 2));
  CHECK(a.find("</svg>") != std::string::npos);
  const auto plain = cli::render_plot(city.table, city.table, nullptr, "garage", 100, 2);
  CHECK(plain.find("<circle") != std::string::npos);
  CHECK_THROWS_AS(cli::render_plot(city.table, city.table, nullptr, "nope", 100, 2), Error);
}
