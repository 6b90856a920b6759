#pragma once

#include <cmath>

namespace dynnet {

// Forward-mode dual number carrying a value and its derivative with respect
// to a single scalar input.
struct DualScalar {
  double value = 0.0;
  double tangent = 0.0;

  constexpr DualScalar() = default;
  constexpr DualScalar(double v, double dv = 0.0) : value(v), tangent(dv) {}

  static constexpr DualScalar variable(double v) { return {v, 1.0}; }

  constexpr DualScalar& operator+=(DualScalar o) {
    value += o.value;
    tangent += o.tangent;
    return *this;
  }
  constexpr DualScalar& operator-=(DualScalar o) {
    value -= o.value;
    tangent -= o.tangent;
    return *this;
  }
  constexpr DualScalar& operator*=(DualScalar o) {
    tangent = value * o.tangent + tangent * o.value;
    value *= o.value;
    return *this;
  }
};

constexpr DualScalar operator+(DualScalar a, DualScalar b) { return a += b; }
constexpr DualScalar operator-(DualScalar a, DualScalar b) { return a -= b; }
constexpr DualScalar operator*(DualScalar a, DualScalar b) { return a *= b; }
constexpr DualScalar operator-(DualScalar a) { return {-a.value, -a.tangent}; }

constexpr DualScalar operator/(DualScalar a, DualScalar b) {
  return {a.value / b.value, (a.tangent * b.value - a.value * b.tangent) / (b.value * b.value)};
}

inline DualScalar sin(DualScalar a) { return {std::sin(a.value), a.tangent * std::cos(a.value)}; }
inline DualScalar cos(DualScalar a) { return {std::cos(a.value), -a.tangent * std::sin(a.value)}; }
inline DualScalar exp(DualScalar a) {
  const double e = std::exp(a.value);
  return {e, a.tangent * e};
}

}  // namespace dynnet
