#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace geosynth::nn {

class Var;

/// Linear tape for scalar reverse-mode differentiation. Every node stores up
/// to two parents with their local partial derivatives.
class ScalarTape {
 public:
  Var variable(double value);
  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  /// Runs the reverse sweep. `seeds` pairs output nodes with their adjoints;
  /// the returned vector holds the adjoint of every node.
  std::vector<double> backward(std::span<const std::pair<Var, double>> seeds) const;

  std::uint32_t push(std::uint32_t a, double da, std::uint32_t b, double db) {
    nodes_.push_back({a, b, da, db});
    return static_cast<std::uint32_t>(nodes_.size() - 1);
  }

 private:
  struct Node {
    std::uint32_t a;
    std::uint32_t b;
    double da;
    double db;
  };
  std::vector<Node> nodes_;
};

class Var {
 public:
  Var() = default;
  Var(ScalarTape* tape, std::uint32_t index, double value) : tape_(tape), index_(index), value_(value) {}

  double value() const { return value_; }
  std::uint32_t index() const { return index_; }
  ScalarTape* tape() const { return tape_; }

 private:
  ScalarTape* tape_ = nullptr;
  std::uint32_t index_ = 0;
  double value_ = 0.0;
};

inline Var ScalarTape::variable(double value) {
  const auto i = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({i, i, 0.0, 0.0});
  return Var(this, i, value);
}

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

namespace detail {
inline Var unary(const Var& x, double value, double dx) {
  return Var(x.tape(), x.tape()->push(x.index(), dx, x.index(), 0.0), value);
}
inline Var binary(const Var& x, double dx, const Var& y, double dy, double value) {
  return Var(x.tape(), x.tape()->push(x.index(), dx, y.index(), dy), value);
}
}  // namespace detail

inline Var operator+(const Var& a, const Var& b) { return detail::binary(a, 1.0, b, 1.0, a.value() + b.value()); }
inline Var operator-(const Var& a, const Var& b) { return detail::binary(a, 1.0, b, -1.0, a.value() - b.value()); }
inline Var operator*(const Var& a, const Var& b) {
  return detail::binary(a, b.value(), b, a.value(), a.value() * b.value());
}
inline Var operator/(const Var& a, const Var& b) {
  const double inv = 1.0 / b.value();
  return detail::binary(a, inv, b, -a.value() * inv * inv, a.value() * inv);
}
inline Var operator-(const Var& a) { return detail::unary(a, -a.value(), -1.0); }

inline Var operator+(const Var& a, double b) { return detail::unary(a, a.value() + b, 1.0); }
inline Var operator+(double a, const Var& b) { return b + a; }
inline Var operator-(const Var& a, double b) { return detail::unary(a, a.value() - b, 1.0); }
inline Var operator-(double a, const Var& b) { return detail::unary(b, a - b.value(), -1.0); }
inline Var operator*(const Var& a, double b) { return detail::unary(a, a.value() * b, b); }
inline Var operator*(double a, const Var& b) { return b * a; }
inline Var operator/(const Var& a, double b) { return detail::unary(a, a.value() / b, 1.0 / b); }
inline Var operator/(double a, const Var& b) {
  return detail::unary(b, a / b.value(), -a / (b.value() * b.value()));
}

inline Var exp(const Var& x) {
  const double e = std::exp(x.value());
  return detail::unary(x, e, e);
}
inline Var log(const Var& x) { return detail::unary(x, std::log(x.value()), 1.0 / x.value()); }
inline Var log1p(const Var& x) { return detail::unary(x, std::log1p(x.value()), 1.0 / (1.0 + x.value())); }
inline Var sqrt(const Var& x) {
  const double s = std::sqrt(x.value());
  return detail::unary(x, s, 0.5 / s);
}

/// log(1 + e^x) without overflow; works for double and Var.
template <typename T>
T softplus(const T& x) {
  using std::exp;
  using std::log1p;
  if (value_of(x) > 0.0) return x + log1p(exp(-x));
  return log1p(exp(x));
}

}  // namespace geosynth::nn
