#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "geosynth/error.hpp"
#include "geosynth/flow.hpp"
#include "geosynth/random.hpp"
#include "gradcheck.hpp"

using namespace geosynth;
using namespace geosynth::flow;

namespace {

RQSpline random_spline(Rng& rng, int bins = 8, double bound = 3.0) {
  RQSpline s;
  s.bins = bins;
  s.half_width = bound;
  for (int i = 0; i < spline_param_count(bins); ++i) s.raw.push_back(2.0 * standard_normal(rng));
  return s;
}

FlowArch small_arch() {
  FlowArch a;
  a.layers = 4;
  a.hidden = {16, 16};
  return a;
}

Matrix banana(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Matrix x(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double a = standard_normal(rng);
    const double b = standard_normal(rng);
    x(i, 0) = 12.5 + 0.05 * a;
    x(i, 1) = 41.9 + 0.03 * (a * a + b);
  }
  return x;
}

Matrix mixture(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Matrix x(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const bool left = uniform01(rng) < 0.5;
    x(i, 0) = (left ? -1.5 : 1.5) + 0.5 * standard_normal(rng);
    x(i, 1) = (left ? -0.5 : 0.8) + 0.6 * standard_normal(rng);
  }
  return x;
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("spline tails are the identity") {
  Rng rng = make_rng(1);
  const auto s = random_spline(rng);
  for (double x : {-7.0, -3.0001, 3.5, 12.0})
    for (auto dir : {Direction::kForward, Direction::kInverse}) {
      const auto r = rq_spline_apply(x, s, dir);
      CHECK(r.y == x);
      CHECK(r.log_abs_derivative == 0.0);
    }
}

TEST_CASE("identity spline leaves points unchanged") {
  const auto s = RQSpline::identity(8, 4.0);
  const auto r = rq_spline_apply(0.3, s, Direction::kForward);
  CHECK(std::abs(r.y - 0.3) < 1e-12);
  CHECK(std::abs(r.log_abs_derivative) < 1e-12);
}

TEST_CASE("random spline inverse undoes forward") {
  Rng rng = make_rng(2);
  for (int k = 0; k < 10; ++k) {
    const auto s = random_spline(rng);
    for (int i = 0; i < 100; ++i) {
      const double x = uniform(rng, -3.0, 3.0);
      const auto f = rq_spline_apply(x, s, Direction::kForward);
      const auto b = rq_spline_apply(f.y, s, Direction::kInverse);
      CHECK(std::abs(b.y - x) < 1e-10);
      CHECK(std::abs(f.log_abs_derivative + b.log_abs_derivative) < 1e-9);
    }
  }
}

TEST_CASE("spline forward is strictly increasing") {
  Rng rng = make_rng(3);
  const auto s = random_spline(rng);
  for (int i = 0; i < 1000; ++i) {
    double a = uniform(rng, -4, 4), b = uniform(rng, -4, 4);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    CHECK(rq_spline_apply(a, s, Direction::kForward).y < rq_spline_apply(b, s, Direction::kForward).y);
  }
}

TEST_CASE("spline log derivative matches finite differences") {
  Rng rng = make_rng(4);
  const auto s = random_spline(rng);
  for (int i = 0; i < 200; ++i) {
    const double x = uniform(rng, -2.9, 2.9);
    const double h = 1e-6;
    const double fd = (rq_spline_apply(x + h, s, Direction::kForward).y - rq_spline_apply(x - h, s, Direction::kForward).y) / (2 * h);
    CHECK(std::abs(std::log(fd) - rq_spline_apply(x, s, Direction::kForward).log_abs_derivative) < 1e-5);
  }
}

TEST_CASE("wrong parameter count is a shape error") {
  RQSpline s = RQSpline::identity(8, 4.0);
  s.raw.pop_back();
  CHECK_THROWS_AS(rq_spline_apply(0.0, s, Direction::kForward), Error);
}

TEST_CASE("identity-initialized flow is standardization") {
  const Matrix x = banana(50, 1);
  const auto scaler = CoordScaler::fit(x);
  FlowModel m(small_arch(), scaler, 7, true);
  const auto r = m.coords_to_latent(x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    CHECK(std::abs(r.latent(i, 0) - (x(i, 0) - scaler.mean[0]) / scaler.stddev[0]) < 1e-12);
    CHECK(std::abs(r.latent(i, 1) - (x(i, 1) - scaler.mean[1]) / scaler.stddev[1]) < 1e-12);
    CHECK(std::abs(r.logdet(i) + std::log(scaler.stddev[0] * scaler.stddev[1])) < 1e-12);
  }
  const Matrix origin = Matrix::Zero(1, 2);
  const Matrix back = m.latent_to_coords(origin);
  CHECK(std::abs(back(0, 0) - scaler.mean[0]) < 1e-12);
  CHECK(std::abs(back(0, 1) - scaler.mean[1]) < 1e-12);
}

TEST_CASE("identity flow at the mean with unit scale gives the standard normal peak") {
  CoordScaler unit;
  unit.mean = {3.0, -2.0};
  FlowModel m(small_arch(), unit, 0, true);
  Matrix at(1, 2);
  at << 3.0, -2.0;
  CHECK(std::abs(m.log_likelihood(at)(0) - std::log(1.0 / (2 * std::numbers::pi))) < 1e-12);
}

TEST_CASE("untrained flow round trip and logdet antisymmetry") {
  Rng rng = make_rng(5);
  CoordScaler unit;
  FlowModel m(FlowArch{}, unit, 11);
  Matrix x(2000, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform(rng, -10, 10);
  const auto fwd = m.coords_to_latent(x);
  const auto inv = m.latent_to_coords_with_logdet(fwd.latent);
  CHECK(max_abs(inv.latent - x) < 1e-8);
  CHECK(max_abs(fwd.logdet + inv.logdet) < 1e-8);
}

TEST_CASE("flow logdet agrees with a numeric Jacobian") {
  const Matrix x = banana(40, 2);
  FlowModel m(small_arch(), CoordScaler::fit(x), 3);
  const auto r = m.coords_to_latent(x);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Matrix2d jac;
    for (int c = 0; c < 2; ++c) {
      Matrix p = x.row(i), q = x.row(i);
      p(0, c) += h;
      q(0, c) -= h;
      jac.col(c) = ((m.coords_to_latent(p).latent - m.coords_to_latent(q).latent) / (2 * h)).transpose();
    }
    CHECK(std::abs(std::log(std::abs(jac.determinant())) - r.logdet(i)) < 1e-4);
  }
}

TEST_CASE("batched evaluation equals per-row evaluation") {
  const Matrix x = banana(30, 3);
  FlowModel m(small_arch(), CoordScaler::fit(x), 5);
  const auto z = m.coords_to_latent(x).latent;
  const Matrix all = m.latent_to_coords(z);
  for (Eigen::Index i = 0; i < x.rows(); ++i) CHECK(m.latent_to_coords(z.row(i)) == all.row(i));
  const Vector ll = m.log_likelihood(x);
  Matrix rev = x.colwise().reverse();
  CHECK(std::abs(m.log_likelihood(rev).sum() - ll.sum()) < 1e-9);
}

TEST_CASE("flow parameter gradients match central differences") {
  const Matrix x = banana(64, 4);
  FlowModel m(small_arch(), CoordScaler::fit(x), 9);
  auto& ps = m.params();
  ps.zero_grads();
  m.nll_backward(x);
  const auto rep = testkit::check_store(ps, [&] { return -m.log_likelihood(x).mean(); }, 7);
  CHECK(rep.checked > 50);
  CHECK(rep.worst < 1e-4);
}

TEST_CASE("training lowers NLL and is deterministic") {
  const Matrix x = mixture(2000, 6);
  nn::TrainConfig cfg;
  cfg.learning_rate = 5e-3;
  cfg.batch_size = 256;
  cfg.epochs = 25;
  cfg.seed = 1;
  const auto a = train_flow(x, cfg, small_arch());
  CHECK(a.history.epoch_loss.back() < a.history.epoch_loss.front());

  // Latents of a well-fit flow look standard normal.
  const Matrix z = a.model.coords_to_latent(x).latent;
  const Matrix centered = z.rowwise() - z.colwise().mean();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(z.rows() - 1);
  CHECK(max_abs(cov - Matrix::Identity(2, 2)) < 0.15);

  // Density integrates to one over the support.
  const int g = 200;
  const double lo = -5, hi = 5, step = (hi - lo) / g;
  Matrix grid(g * g, 2);
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j) grid.row(i * g + j) << lo + (i + 0.5) * step, lo + (j + 0.5) * step;
  const double mass = a.model.log_likelihood(grid).array().exp().sum() * step * step;
  CHECK(std::abs(mass - 1.0) < 0.02);

  const auto inv = a.model.latent_to_coords_with_logdet(z);
  CHECK(max_abs(inv.latent - x) < 1e-8);

  const auto b = train_flow(x, cfg, small_arch());
  CHECK(a.model.params() == b.model.params());
}

TEST_CASE("flow checkpoints round trip") {
  const Matrix x = banana(200, 8);
  FlowModel m(small_arch(), CoordScaler::fit(x), 12);
  const auto back = FlowModel::from_json(nlohmann::json::parse(m.to_json().dump()));
  CHECK(back.coords_to_latent(x).latent == m.coords_to_latent(x).latent);
  CHECK(back.to_json() == m.to_json());
}

TEST_CASE("train_flow input checks") {
  nn::TrainConfig cfg;
  CHECK_THROWS_AS(train_flow(Matrix::Zero(50, 2), cfg, FlowArch{}), Error);
  Matrix bad = banana(200, 1);
  bad(3, 1) = std::nan("");
  CHECK_THROWS_AS(train_flow(bad, cfg, FlowArch{}), Error);
  FlowArch arch;
  arch.bins = 1;
  CHECK_THROWS_AS(arch.validate(), Error);
}
