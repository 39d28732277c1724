// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "geosynth/diffnet.hpp"
#include "geosynth/flow.hpp"
#include "geosynth/generators.hpp"
#include "geosynth/metrics.hpp"
#include "geosynth/random.hpp"
#include "geosynth/stats.hpp"
#include "geosynth/vae.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace geosynth;
namespace fs = std::filesystem;
using Eigen::MatrixXd;

namespace {

const fs::path kData = GEOSYNTH_DATA_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
  return m;
}

cli::RunConfig city_config() { return cli::RunConfig::load(kData / "toy_city" / "config.json"); }

// ---------------------------------------------------------------------------

Outcome gradients() {
  double dense = 0, coupling = 0, vae_loss = 0;
  for (std::uint64_t draw = 0; draw < 100; ++draw) {
    Rng rng = make_rng(derive_seed(1, draw));
    {
      nn::ParamStore store;
      const int in = 2 + static_cast<int>(uniform_index(rng, 4)), hid = 3 + static_cast<int>(uniform_index(rng, 6));
      const int out = 1 + static_cast<int>(uniform_index(rng, 4));
      const auto act = draw % 2 ? nn::Activation::kTanh : nn::Activation::kRelu;
      const auto oa = draw % 3 ? nn::OutputActivation::kIdentity : nn::OutputActivation::kSoftplus;
      nn::DenseNet net(store, "n", {in, hid, out}, act, oa, rng);
      const MatrixXd x = gaussian(5, in, rng), r = gaussian(5, out, rng);
      store.zero_grads();
      nn::DenseTape tape;
      net.forward(store, x, &tape);
      net.backward(store, tape, r);
      dense = std::max(dense, testkit::check_store(store, [&] { return net.forward(store, x).cwiseProduct(r).sum(); }).worst);
    }
    {
      flow::FlowArch arch;
      arch.layers = 2;
      arch.hidden = {8};
      MatrixXd x = 1.5 * gaussian(16, 2, rng);
      flow::FlowModel m(arch, flow::CoordScaler::fit(x), derive_seed(2, draw));
      m.params().zero_grads();
      m.nll_backward(x);
      coupling = std::max(coupling, testkit::check_store(m.params(), [&] { return -m.log_likelihood(x).mean(); }, 3).worst);
    }
    {
      vae::VaeArch arch;
      arch.encoder_hidden = {8};
      arch.decoder_hidden = {8};
      vae::VaeModel m(6, {0, 1}, arch, {}, derive_seed(3, draw));
      const MatrixXd x = gaussian(12, 6, rng);
      m.params().zero_grads();
      m.loss(x, draw);
      vae_loss = std::max(vae_loss, testkit::check_store(m.params(), [&] { return m.loss(x, draw, false).total; }, 2).worst);
    }
  }
  const double worst = std::max({dense, coupling, vae_loss});
  return {worst < 1e-4, "worst relative error dense " + num(dense) + ", coupling " + num(coupling) + ", vae " +
                            num(vae_loss) + " (< 1e-4, 100 draws each)"};
}

Outcome bijectivity() {
  Rng rng = make_rng(21);
  MatrixXd mix(2000, 2);
  for (Eigen::Index i = 0; i < mix.rows(); ++i) {
    const bool left = uniform01(rng) < 0.5;
    mix(i, 0) = (left ? -1.5 : 1.5) + 0.5 * standard_normal(rng);
    mix(i, 1) = (left ? -0.5 : 0.8) + 0.6 * standard_normal(rng);
  }
  nn::TrainConfig cfg = gen::GeneratorConfig::default_flow_train();
  cfg.epochs = 20;
  cfg.seed = 4;
  flow::FlowArch arch;
  arch.layers = 6;
  arch.hidden = {32, 32};
  const auto trained = flow::train_flow(mix, cfg, arch).model;
  const flow::FlowModel untrained(flow::FlowArch{}, flow::CoordScaler{}, 5);

  double round = 0, anti = 0;
  for (const flow::FlowModel* m : {&untrained, &trained}) {
    MatrixXd x(10000, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform(rng, -6.0, 6.0);
    const auto fwd = m->coords_to_latent(x);
    const auto inv = m->latent_to_coords_with_logdet(fwd.latent);
    round = std::max(round, (inv.latent - x).cwiseAbs().maxCoeff());
    anti = std::max(anti, (fwd.logdet + inv.logdet).cwiseAbs().maxCoeff());
    const MatrixXd z = 1.5 * gaussian(10000, 2, rng);
    const auto back = m->latent_to_coords_with_logdet(z);
    const auto again = m->coords_to_latent(back.latent);
    round = std::max(round, (again.latent - z).cwiseAbs().maxCoeff());
    anti = std::max(anti, (again.logdet + back.logdet).cwiseAbs().maxCoeff());
  }
  return {round < 1e-8 && anti < 1e-8,
          "max round-trip error " + num(round) + ", logdet asymmetry " + num(anti) + " (< 1e-8, 2 x 10^4 points per model)"};
}

Outcome density() {
  Rng rng = make_rng(31);
  const MatrixXd train = gaussian(5000, 2, rng);
  const MatrixXd held = gaussian(20000, 2, rng);
  nn::TrainConfig cfg = gen::GeneratorConfig::default_flow_train();
  cfg.seed = 32;
  const auto t = flow::train_flow(train, cfg, flow::FlowArch{});
  const double target = 1.0 + std::log(2.0 * std::numbers::pi);
  const double nll = -t.model.log_likelihood(held).mean();
  const double nll_train = -t.model.log_likelihood(train).mean();
  return {std::abs(nll - target) < 0.05, "held-out mean NLL " + num(nll) + " (train " + num(nll_train) +
                                             "), target " + num(target) + " +- 0.05"};
}

Outcome axioms() {
  const auto cfg = city_config();
  const auto in = cli::load_inputs(cfg, true);
  const GeoTable& real = in.table;
  const auto basis = metrics::pca_fit(real);
  const double dg = metrics::sliced_wasserstein(real.coords(), real.coords(), 1000, 2.0, 1);
  const double ds = metrics::spatial_autocorr_distance(real, real, basis, cfg.metrics.moran);
  const double dl = metrics::local_feature_distance(real, real, basis, cfg.metrics.grid);
  const double du = metrics::utility_distance(real, real, *in.geometry, "price");

  Rng rng = make_rng(41);
  const MatrixXd a = gaussian(2000, 2, rng);
  const double t = 0.5;
  MatrixXd b = a;
  b.col(0).array() += t;
  const double sw = metrics::sliced_wasserstein(a, b, 1000, 2.0, 42);
  const double rel = std::abs(sw / (2.0 * t / std::numbers::pi) - 1.0);
  const bool zero = dg == 0.0 && ds == 0.0 && dl == 0.0 && du == 0.0;
  return {zero && rel < 0.03, "self-distances " + num(dg) + "/" + num(ds) + "/" + num(dl) + "/" + num(du) +
                                  " (exactly 0); translation SW off 2t/pi by " + num(100 * rel) + "% (< 3%)"};
}

GeoTable random_table(std::size_t n, int features, Rng& rng) {
  std::vector<ColumnSpec> cols(2 + static_cast<std::size_t>(features));
  cols[0].name = "lon";
  cols[0].kind = ColumnKind::kLongitude;
  cols[1].name = "lat";
  cols[1].kind = ColumnKind::kLatitude;
  for (int f = 0; f < features; ++f) cols[2 + static_cast<std::size_t>(f)].name = "f" + std::to_string(f);
  GeoTable t{Schema(cols)};
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<double> v{uniform01(rng), uniform01(rng)};
    for (int f = 0; f < features; ++f) v.push_back(v[0] * (f + 1) + standard_normal(rng));
    t.append_row(v);
  }
  return t;
}

Outcome brute_force() {
  Rng rng = make_rng(51);
  double moran = 0, grid = 0;
  bool auc_exact = true;
  for (int k = 0; k < 20; ++k) {
    const int features = 1 + k % 3;
    const auto real = random_table(50 + uniform_index(rng, 151), features, rng);
    const auto synth = random_table(50 + uniform_index(rng, 151), features, rng);
    const auto basis = metrics::pca_fit(real);
    metrics::MoranConfig mc;
    mc.percentile = 0.05;
    moran = std::max(moran, std::abs(metrics::spatial_autocorr_distance(real, synth, basis, mc) -
                                     oracle::moran_distance_direct(real, synth, basis, 0.05)));
    const double cell = 0.34;  // 3 x 3 = 9 cells on the unit square
    grid = std::max(grid, std::abs(metrics::local_feature_distance(real, synth, basis, {cell}) -
                                   oracle::grid_distance_direct(real, synth, basis, cell)));
  }
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 2 + uniform_index(rng, 499);
    std::vector<double> s(n);
    std::vector<bool> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = k % 2 ? uniform01(rng) : static_cast<double>(uniform_index(rng, 10));
      y[i] = uniform01(rng) < 0.3;
    }
    y[0] = true;
    y[1] = false;
    auc_exact = auc_exact && metrics::auc_roc(s, y) == oracle::auc_pairs(s, y);
  }
  return {moran < 1e-9 && grid < 1e-9 && auc_exact,
          "max deviation Moran " + num(moran) + ", grid " + num(grid) + " (< 1e-9, 20 instances N <= 200); AUC " +
              (auc_exact ? "exact" : "MISMATCH") + " on 200 instances n <= 500"};
}

Outcome hedonic() {
  const auto cfg = city_config();
  auto in = cli::load_inputs(cfg, true);
  GeoTable t = in.table;
  const auto& geom = *in.geometry;
  const auto ids = assign_subregion(t, geom);
  std::vector<std::string> levels(ids.begin(), ids.end());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  std::map<std::string, double> mu;
  for (std::size_t k = 0; k < levels.size(); ++k) mu[levels[k]] = k == 0 ? 0.0 : 0.07 * static_cast<double>(k) * (k % 2 ? 1 : -1);
  const std::size_t price = t.schema().index_of("price"), surface = t.schema().index_of("surface");
  const std::size_t garage = t.schema().index_of("garage");
  const double w0 = 10.8, w_surface = 0.009, w_garage = 0.15;
  for (std::size_t r = 0; r < t.rows(); ++r)
    t.set(r, price, std::exp(w0 + w_surface * t.at(r, surface) + w_garage * t.at(r, garage) + mu.at(ids[r])));
  const auto m = metrics::hedonic_fit(t, geom, "price");
  double err = std::max({std::abs(m.intercept - w0), std::abs(m.coefficients(0) - w_surface),
                         std::abs(m.coefficients(1) - w_garage)});
  for (const auto& [id, v] : mu) err = std::max(err, std::abs(m.fixed_effects.at(id) - v));
  const double du = metrics::utility_distance(t, t, geom, "price");
  return {err < 1e-6 && du == 0.0, "max coefficient error " + num(err) + " over " + std::to_string(levels.size()) +
                                       " subregions (< 1e-6); d_U(D, D) = " + num(du)};
}

Outcome privacy() {
  const auto cfg = city_config();
  const auto in = cli::load_inputs(cfg, true);
  const auto& geom = *in.geometry;
  metrics::GeneratorFn memorize = [](const GeoTable& train, std::size_t, std::uint64_t) { return train; };
  // Uniform over the region and over each column's observed range or levels.
  metrics::GeneratorFn independent = [&geom](const GeoTable& train, std::size_t n, std::uint64_t seed) {
    const auto pts = uniform_points_in_polygon(geom.region, n, seed);
    Rng rng = make_rng(derive_seed(seed, 7));
    const Schema& s = train.schema();
    GeoTable out(s);
    for (std::size_t r = 0; r < n; ++r) {
      std::vector<double> row(s.size());
      for (std::size_t c = 0; c < s.size(); ++c) {
        const auto col = train.column(c);
        const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
        if (s[c].kind == ColumnKind::kLongitude) row[c] = pts[r].lon;
        else if (s[c].kind == ColumnKind::kLatitude) row[c] = pts[r].lat;
        else if (s[c].is_discrete()) row[c] = static_cast<double>(uniform_index(rng, s[c].level_count()));
        else if (s[c].kind == ColumnKind::kInteger) row[c] = *lo + static_cast<double>(uniform_index(rng, static_cast<std::uint64_t>(*hi - *lo) + 1));
        else row[c] = uniform(rng, *lo, *hi);
      }
      out.append_row(row);
    }
    return out;
  };
  double mem = 0, ind = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    mem += metrics::privacy_score(in.table, memorize, 0, seed) / 10;
    ind += metrics::privacy_score(in.table, independent, 0, seed) / 10;
  }
  return {mem >= 0.2 && std::abs(ind) <= 0.05,
          "mean rho memorizing " + num(mem) + " (>= 0.2), independent " + num(ind) + " (|.| <= 0.05), 10 seeds"};
}

struct OrderingRun {
  std::vector<double> geo_nfvae, geo_vae, sp_nfvae, sp_copula, sp_nfcopula;
  GeoTable nf_vae_seed0;
};

Outcome ordering(OrderingRun& run) {
  const auto cfg = city_config();
  const auto in = cli::load_inputs(cfg, true);
  const std::size_t n = cfg.n_synth ? cfg.n_synth : in.table.rows();
  int geo_wins = 0, copula_wins = 0, nfcopula_wins = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto score = [&](gen::GeneratorKind kind) {
      const auto g = gen::FittedGenerator::fit(kind, in.table, *in.geometry, cfg.model, s + cli::kFitSeedOffset);
      const GeoTable synth = g.sample(n, s + cli::kSampleSeedOffset);
      metrics::EvalConfig ec = cfg.metrics;
      ec.seed = s + cli::kMetricsSeedOffset;
      ec.split_seed = s + cli::kSplitSeedOffset;
      ec.privacy = false;
      ec.generator = cfg.model;
      metrics::EvalInputs ei;
      ei.real = &in.table;
      ei.synth = &synth;
      ei.geometry = &*in.geometry;
      ei.kind = kind;
      const auto rep = metrics::evaluate(ei, ec);
      if (kind == gen::GeneratorKind::kNfVae && s == 0) run.nf_vae_seed0 = synth;
      return std::make_pair(rep.fields.at("d_geo").value.value_or(NAN), rep.fields.at("d_spatial").value.value_or(NAN));
    };
    const auto nfv = score(gen::GeneratorKind::kNfVae);
    const auto vo = score(gen::GeneratorKind::kVaeOnly);
    const auto cop = score(gen::GeneratorKind::kCopula);
    const auto nfc = score(gen::GeneratorKind::kNfCopula);
    run.geo_nfvae.push_back(nfv.first);
    run.geo_vae.push_back(vo.first);
    run.sp_nfvae.push_back(nfv.second);
    run.sp_copula.push_back(cop.second);
    run.sp_nfcopula.push_back(nfc.second);
    geo_wins += nfv.first < vo.first;
    copula_wins += nfv.second < cop.second;
    nfcopula_wins += nfv.second < nfc.second;
    std::printf("  seed %llu: d_geo nf_vae %s vae_only %s | d_spatial nf_vae %s copula %s nf_copula %s\n",
                static_cast<unsigned long long>(s), num(nfv.first).c_str(), num(vo.first).c_str(),
                num(nfv.second).c_str(), num(cop.second).c_str(), num(nfc.second).c_str());
    std::fflush(stdout);
  }
  return {geo_wins >= 9 && copula_wins >= 7 && nfcopula_wins >= 7,
          "d_geo nf_vae < vae_only in " + std::to_string(geo_wins) + "/10 (>= 9, medians " +
              num(stats::median(run.geo_nfvae)) + " vs " + num(stats::median(run.geo_vae)) +
              "); d_spatial nf_vae < copula in " + std::to_string(copula_wins) + "/10, < nf_copula in " +
              std::to_string(nfcopula_wins) + "/10 (>= 7, medians " + num(stats::median(run.sp_nfvae)) + " vs " +
              num(stats::median(run.sp_copula)) + " / " + num(stats::median(run.sp_nfcopula)) + ")"};
}

Outcome novelty(const OrderingRun& run) {
  const auto cfg = city_config();
  const auto in = cli::load_inputs(cfg, true);
  const auto g = gen::FittedGenerator::fit(gen::GeneratorKind::kLocalShuffle, in.table, *in.geometry, cfg.model, 0);
  const double local = gen::novelty_rate(in.table, g.sample(in.table.rows(), 1));
  const double nfv = gen::novelty_rate(in.table, run.nf_vae_seed0);
  return {local == 0.0 && nfv > 0.0, "local_shuffle novelty " + num(local) + " (exactly 0), nf_vae " + num(nfv) + " (> 0)"};
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream f(e.path(), std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    files[fs::relative(e.path(), root).string()] = s.str();
  }
  return files;
}

Outcome determinism() {
  const fs::path work = fs::temp_directory_path() / "geosynth_acceptance_determinism";
  fs::remove_all(work);
  fs::create_directories(work);
  for (const char* f : {"city.csv", "schema.json", "geometry.geojson"}) fs::copy_file(kData / "toy_city" / f, work / f);
  auto j = nlohmann::json::parse(std::ifstream(kData / "toy_city" / "config.json"));
  // Short schedules: determinism does not depend on training length.
  j["model"]["flow"]["train"]["epochs"] = 3;
  j["model"]["vae"]["train"] = {{"epochs", 3}};
  j["metrics"]["n_proj"] = 200;
  j["benchmark"] = {{"kinds", {"global_shuffle", "local_shuffle", "copula"}}, {"seeds", {0, 1}}, {"workers", 1}};
  j["n_synth"] = 2000;
  std::ofstream(work / "config.json") << j.dump();
  const std::string config = (work / "config.json").string();

  auto pass = [&](const std::string& tag, const std::string& workers) {
    const std::string out = (work / tag).string();
    const std::string bundle = (work / tag / "bundle").string();
    const std::vector<std::vector<std::string>> cmds{
        {"fit", "--config", config, "--out", out},
        {"generate", "--config", config, "--bundle", bundle, "--out", out},
        {"evaluate", "--config", config, "--bundle", bundle, "--out", out + "/eval_bundle"},
        {"evaluate", "--config", config, "--synth", out + "/synthetic.csv", "--out", out + "/eval_csv"},
        {"plot", "--config", config, "--synth", out + "/synthetic.csv", "--out", out},
        {"benchmark", "--config", config, "--workers", workers, "--out", out + "/bench"}};
    for (auto args : cmds) {
      args.insert(args.begin(), "geosynth");
      if (cli::run(args) != 0) return false;
    }
    return true;
  };
  const bool ran = pass("a", "1") && pass("b", "2");
  std::string detail;
  bool same = ran;
  if (ran) {
    const auto a = snapshot(work / "a"), b = snapshot(work / "b");
    same = a == b;
    detail = std::to_string(a.size()) + " output files from fit/generate/evaluate/plot/benchmark";
    for (const auto& [name, content] : a)
      if (!b.count(name) || b.at(name) != content) detail += "; differs: " + name;
    detail += same ? " byte-identical across re-runs (benchmark with 1 vs 2 workers)" : "";
  } else {
    detail = "a command failed";
  }
  fs::remove_all(work);
  return {same, detail};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0: no separate budget
    std::function<Outcome()> run;
  };
  OrderingRun ordering_run;
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", 60, gradients},
      {2, "flow bijectivity", 60, bijectivity},
      {3, "flow density sanity", 300, density},
      {4, "metric axioms", 120, axioms},
      {5, "brute-force equivalence", 120, brute_force},
      {6, "hedonic oracle", 30, hedonic},
      {7, "privacy calibration", 600, privacy},
      {8, "ordering reproduction", 3600, [&] { return ordering(ordering_run); }},
      {9, "novelty", 300, [&] { return novelty(ordering_run); }},
      {10, "determinism", 0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = c.budget_s == 0 || secs <= c.budget_s;
    const bool ok = o.pass && in_budget;
    failed += !ok;
    std::string timing = num(secs) + " s";
    if (c.budget_s > 0) timing += " / " + num(c.budget_s) + " s budget";
    if (!in_budget) timing += " OVER BUDGET";
    std::printf("%s criterion %d (%s): %s [%s]\n", ok ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
