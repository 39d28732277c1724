#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "geosynth/error.hpp"
#include "geosynth/generators.hpp"
#include "geosynth/metrics.hpp"
#include "geosynth/random.hpp"
#include "geosynth/stats.hpp"
#include "helpers.hpp"

using namespace geosynth;
using namespace geosynth::gen;
using testkit::col;

namespace {

Schema toy_schema() {
  return Schema({col("lon", ColumnKind::kLongitude), col("lat", ColumnKind::kLatitude),
                 col("size", ColumnKind::kNumeric), col("garage", ColumnKind::kBoolean),
                 col("kind", ColumnKind::kCategorical, {"a", "b", "c"})});
}

// Two Gaussian blobs in the unit square, 70/30, with features tied to the blob.
GeoTable two_clusters(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  GeoTable t(toy_schema());
  while (t.rows() < n) {
    const bool first = uniform01(rng) < 0.7;
    const double lon = (first ? 0.25 : 0.75) + 0.05 * standard_normal(rng);
    const double lat = (first ? 0.3 : 0.7) + 0.05 * standard_normal(rng);
    if (lon <= 0 || lon >= 1 || lat <= 0 || lat >= 1) continue;
    const double size = (first ? 60 : 110) + 10 * standard_normal(rng);
    const double garage = uniform01(rng) < (first ? 0.2 : 0.7) ? 1.0 : 0.0;
    const double kind = static_cast<double>(uniform_index(rng, first ? 2 : 3));
    t.append_row(std::vector<double>{lon, lat, size, garage, kind});
  }
  return t;
}

RegionGeometry halves() {
  RegionGeometry g = testkit::square_geometry();
  g.subregions["east"] = make_rectangle(0.5, 0, 1, 1);
  g.subregions["west"] = make_rectangle(0, 0, 0.5, 1);
  return g;
}

GeneratorConfig small_config() {
  GeneratorConfig c;
  c.flow_arch.layers = 4;
  c.flow_arch.hidden = {16, 16};
  c.flow_train.epochs = 40;
  c.vae_arch.encoder_hidden = {32, 32};
  c.vae_arch.decoder_hidden = {32, 32};
  c.vae_train.epochs = 60;
  return c;
}

std::vector<double> features_of(const GeoTable& t, std::size_t r) {
  std::vector<double> f;
  for (std::size_t c = 0; c < t.cols(); ++c)
    if (!t.schema()[c].is_coordinate()) f.push_back(t.at(r, c));
  return f;
}

bool all_inside(const GeoTable& t, const Polygon& p) {
  for (std::size_t r = 0; r < t.rows(); ++r)
    if (!point_in_region(t.lon(r), t.lat(r), p)) return false;
  return true;
}

double box_share(const GeoTable& t, double lon0, double lon1, double lat0, double lat1) {
  std::size_t k = 0;
  for (std::size_t r = 0; r < t.rows(); ++r) k += t.lon(r) >= lon0 && t.lon(r) <= lon1 && t.lat(r) >= lat0 && t.lat(r) <= lat1;
  return static_cast<double>(k) / static_cast<double>(t.rows());
}

// Chi-square statistic and its 0.999 critical value for 2 degrees of freedom.
constexpr double kChi2Df2At999 = 13.815510557964274;

}  // namespace

TEST_CASE("kind names round trip") {
  for (auto k : all_kinds()) CHECK(kind_from_string(to_string(k)) == k);
  CHECK(all_kinds().size() == 6);
  CHECK_THROWS_AS(kind_from_string("gan"), Error);
}

TEST_CASE("global shuffle keeps the source and region") {
  const auto data = two_clusters(300, 1);
  const auto g = FittedGenerator::fit(GeneratorKind::kGlobalShuffle, data, halves(), {}, 3);
  CHECK(g.source() == data);
  CHECK(g.geometry().region.area() == doctest::Approx(1.0));
}

TEST_CASE("local shuffle needs subregions") {
  const auto data = two_clusters(300, 1);
  try {
    FittedGenerator::fit(GeneratorKind::kLocalShuffle, data, testkit::square_geometry(), {}, 3);
    FAIL("expected a configuration error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
  }
}

TEST_CASE("every kind returns exactly n rows inside the region") {
  const auto data = two_clusters(400, 2);
  const auto geom = halves();
  for (auto kind : all_kinds()) {
    const auto g = FittedGenerator::fit(kind, data, geom, small_config(), 5);
    for (std::size_t n : {0, 1, 7, 1000}) {
      const auto s = g.sample(n, 9);
      CHECK(s.rows() == n);
      CHECK(all_inside(s, geom.region));
      CHECK(s.schema() == data.schema());
    }
    CHECK(g.sample(50, 4) == g.sample(50, 4));
  }
}

TEST_CASE("region closure on a region with a hole") {
  const auto data = two_clusters(400, 3);
  RegionGeometry geom;
  PolygonPart part;
  part.outer = make_rectangle(0, 0, 1, 1).parts()[0].outer;
  part.holes.push_back(make_rectangle(0.2, 0.25, 0.3, 0.35).parts()[0].outer);
  geom.region = Polygon({part});
  for (auto kind : {GeneratorKind::kCopula, GeneratorKind::kNfCopula, GeneratorKind::kGlobalShuffle})
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto g = FittedGenerator::fit(kind, data, geom, small_config(), seed);
      CHECK(all_inside(g.sample(800, seed), geom.region));
    }
}

TEST_CASE("global shuffle resamples source feature rows") {
  const auto data = two_clusters(200, 4);
  const auto s = global_shuffle_sample(data, halves(), 500, 8);
  std::set<std::vector<double>> source;
  for (std::size_t r = 0; r < data.rows(); ++r) source.insert(features_of(data, r));
  for (std::size_t r = 0; r < s.rows(); ++r) CHECK(source.count(features_of(s, r)) == 1);
  double mx = 0;
  for (std::size_t r = 0; r < s.rows(); ++r) mx += s.lon(r) / 500.0;
  CHECK(std::abs(mx - 0.5) < 0.05);
}

TEST_CASE("local shuffle places rows in their source subregion") {
  const auto data = two_clusters(300, 5);
  const auto geom = halves();
  const auto s = local_shuffle_sample(data, geom, 2000, 3);
  std::map<std::vector<double>, std::set<std::string>> home;
  const auto ids = assign_subregion(data, geom);
  for (std::size_t r = 0; r < data.rows(); ++r) home[features_of(data, r)].insert(ids[r]);
  const auto out_ids = assign_subregion(s, geom);
  for (std::size_t r = 0; r < s.rows(); ++r) {
    const auto it = home.find(features_of(s, r));
    REQUIRE(it != home.end());
    CHECK(it->second.count(out_ids[r]) == 1);
  }
  CHECK(novelty_rate(data, s) == 0.0);
}

TEST_CASE("local shuffle with one subregion equal to the region matches global shuffle features") {
  const auto data = two_clusters(150, 6);
  RegionGeometry one = testkit::square_geometry();
  one.subregions["all"] = make_rectangle(0, 0, 1, 1);
  const auto a = local_shuffle_sample(data, one, 300, 11);
  const auto b = global_shuffle_sample(data, one, 300, 11);
  for (std::size_t r = 0; r < a.rows(); ++r) CHECK(features_of(a, r) == features_of(b, r));
}

TEST_CASE("shuffle feature laws pass a chi-square test") {
  const auto data = two_clusters(500, 7);
  std::array<double, 3> p{};
  for (std::size_t r = 0; r < data.rows(); ++r) p[static_cast<std::size_t>(data.at(r, 4))] += 1.0 / 500.0;
  const std::size_t n = 10000;
  for (int which = 0; which < 2; ++which) {
    const auto s = which ? local_shuffle_sample(data, halves(), n, 2) : global_shuffle_sample(data, halves(), n, 2);
    std::array<double, 3> obs{};
    for (std::size_t r = 0; r < s.rows(); ++r) obs[static_cast<std::size_t>(s.at(r, 4))] += 1.0;
    double chi2 = 0.0;
    for (int k = 0; k < 3; ++k) chi2 += std::pow(obs[k] - n * p[k], 2) / (n * p[k]);
    CHECK(chi2 < kChi2Df2At999);
  }
}

TEST_CASE("copula reproduces a numeric marginal") {
  Eigen::MatrixXd data(100, 1);
  for (int i = 0; i < 100; ++i) data(i, 0) = i + 1;
  const auto st = CopulaState::fit(data, {false});
  const Eigen::MatrixXd s = st.sample(10000, 3);
  std::vector<double> src(data.data(), data.data() + 100), got(s.data(), s.data() + s.size());
  for (int d = 1; d < 10; ++d) {
    const double q = d / 10.0;
    CHECK(std::abs(stats::quantile(got, q) - stats::quantile(src, q)) / 99.0 < 0.05);
  }
}

TEST_CASE("copula keeps perfect dependence") {
  Eigen::MatrixXd data(200, 2);
  for (int i = 0; i < 200; ++i) {
    data(i, 0) = i * 0.5;
    data(i, 1) = std::exp(i / 50.0);
  }
  const auto st = CopulaState::fit(data, {false, false});
  const Eigen::MatrixXd s = st.sample(5000, 7);
  std::vector<double> a(s.col(0).data(), s.col(0).data() + s.rows()), b(s.col(1).data(), s.col(1).data() + s.rows());
  const auto ra = stats::average_ranks(a), rb = stats::average_ranks(b);
  const Eigen::Map<const Eigen::VectorXd> va(ra.data(), static_cast<Eigen::Index>(ra.size()));
  const Eigen::Map<const Eigen::VectorXd> vb(rb.data(), static_cast<Eigen::Index>(rb.size()));
  const Eigen::VectorXd ca = va.array() - va.mean(), cb = vb.array() - vb.mean();
  CHECK(ca.dot(cb) / (ca.norm() * cb.norm()) > 0.99);
}

TEST_CASE("copula categorical frequencies") {
  Eigen::MatrixXd data(100, 1);
  for (int i = 0; i < 100; ++i) data(i, 0) = i < 70 ? 1.0 : 0.0;
  const auto st = CopulaState::fit(data, {true});
  const Eigen::MatrixXd s = st.sample(10000, 5);
  const double share = (s.array() == 1.0).cast<double>().mean();
  CHECK(std::abs(share - 0.7) < 0.02);
  CHECK(((s.array() == 0.0) || (s.array() == 1.0)).all());
}

TEST_CASE("copula state json round trip") {
  const auto data = two_clusters(300, 8);
  const auto g = FittedGenerator::fit(GeneratorKind::kCopula, data, halves(), {}, 1);
  REQUIRE(g.copula());
  const auto back = CopulaState::from_json(nlohmann::json::parse(g.copula()->to_json().dump()));
  CHECK(back.sample(100, 2) == g.copula()->sample(100, 2));
}

TEST_CASE("repair_correlation yields a unit-diagonal PSD matrix") {
  Eigen::Matrix3d c;
  c << 1, 0.9, -0.9,  //
      0.9, 1, 0.9,    //
      -0.9, 0.9, 1;
  const Eigen::MatrixXd r = repair_correlation(c);
  CHECK((r.diagonal().array() == 1.0).all());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
  CHECK(es.eigenvalues().minCoeff() > -1e-12);
  CHECK((r - r.transpose()).norm() == 0.0);
}

TEST_CASE("novelty rate edge cases") {
  const auto data = two_clusters(100, 9);
  CHECK(novelty_rate(data, data) == 0.0);
  GeoTable fake(data.schema());
  fake.append_row(std::vector<double>{0.5, 0.5, 12345.0, 1.0, 2.0});
  CHECK(novelty_rate(data, fake) == 1.0);
}

TEST_CASE("local shuffle output is never novel") {
  const auto data = two_clusters(300, 10);
  const auto g = FittedGenerator::fit(GeneratorKind::kLocalShuffle, data, halves(), {}, 2);
  CHECK(novelty_rate(data, g.sample(1000, 3)) == 0.0);
}

TEST_CASE("bundles reload and reproduce samples") {
  const auto data = two_clusters(300, 11);
  const auto dir = std::filesystem::temp_directory_path() / "geosynth_bundle_test";
  for (auto kind : all_kinds()) {
    std::filesystem::remove_all(dir);
    const auto g = FittedGenerator::fit(kind, data, halves(), small_config(), 4);
    g.save(dir);
    const auto back = FittedGenerator::load(dir);
    CHECK(back.kind() == kind);
    CHECK(back.sample(200, 6) == g.sample(200, 6));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("fitting is deterministic for a fixed seed") {
  const auto data = two_clusters(300, 12);
  const auto a = FittedGenerator::fit(GeneratorKind::kNfVae, data, halves(), small_config(), 8);
  const auto b = FittedGenerator::fit(GeneratorKind::kNfVae, data, halves(), small_config(), 8);
  CHECK(a.flow_model()->params() == b.flow_model()->params());
  CHECK(a.vae_model()->params() == b.vae_model()->params());
  CHECK(a.sample(100, 1) == b.sample(100, 1));
}

TEST_CASE("too few rows for neural kinds") {
  const auto data = two_clusters(50, 13);
  CHECK_THROWS_AS(FittedGenerator::fit(GeneratorKind::kNfVae, data, halves(), small_config(), 0), Error);
}

TEST_CASE("flow-based kinds beat global shuffle on coordinates and keep cluster shares") {
  int nf_vae_wins = 0, nf_copula_wins = 0, share_ok = 0;
  const auto geom = halves();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto data = two_clusters(1000, 100 + seed);
    const auto coords = data.coords();
    auto sw = [&](const GeoTable& s) { return metrics::sliced_wasserstein(coords, s.coords(), 200, 2.0, seed); };
    const double base = sw(FittedGenerator::fit(GeneratorKind::kGlobalShuffle, data, geom, {}, seed).sample(1000, seed + 1));
    const auto nfv = FittedGenerator::fit(GeneratorKind::kNfVae, data, geom, small_config(), seed).sample(1000, seed + 1);
    const auto nfc = FittedGenerator::fit(GeneratorKind::kNfCopula, data, geom, small_config(), seed).sample(1000, seed + 1);
    nf_vae_wins += sw(nfv) < base;
    nf_copula_wins += sw(nfc) < base;
    const double a_real = box_share(data, 0.1, 0.4, 0.15, 0.45), b_real = box_share(data, 0.6, 0.9, 0.55, 0.85);
    const double a_syn = box_share(nfv, 0.1, 0.4, 0.15, 0.45), b_syn = box_share(nfv, 0.6, 0.9, 0.55, 0.85);
    share_ok += std::abs(a_real - a_syn) <= 0.1 && std::abs(b_real - b_syn) <= 0.1;
  }
  CHECK(nf_vae_wins >= 9);
  CHECK(nf_copula_wins >= 9);
  CHECK(share_ok == 10);
}
