#include "dynnet/sincos.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>

namespace dynnet {

namespace {

constexpr double kTwoOverPi = 6.36619772367581382433e-01;
// pi/2 split so that q * kPio2Hi and q * kPio2Mid are exact for |q| < 2^20.
constexpr double kPio2Hi = 1.57079632673412561417e+00;
constexpr double kPio2Mid = 6.07710050630396597660e-11;
constexpr double kPio2Lo = 2.02226624871116645580e-21;
constexpr double kRoundMagic = 6755399441055744.0;  // 1.5 * 2^52
constexpr double kMaxArg = 1647099.0;                // ~ 2^20 * pi/2

constexpr double S1 = -1.66666666666666324348e-01;
constexpr double S2 = 8.33333333332248946124e-03;
constexpr double S3 = -1.98412698298579493134e-04;
constexpr double S4 = 2.75573137070700676789e-06;
constexpr double S5 = -2.50507602534068634195e-08;
constexpr double S6 = 1.58969099521155010221e-10;

constexpr double C1 = 4.16666666666666019037e-02;
constexpr double C2 = -1.38888888888741095749e-03;
constexpr double C3 = 2.48015872894767294178e-05;
constexpr double C4 = -2.75573143513906633035e-07;
constexpr double C5 = 2.08757232129817482790e-09;
constexpr double C6 = -1.13596475577881948265e-11;

inline void sincos_reduced(double x, double& s, double& c) {
  const double shifted = x * kTwoOverPi + kRoundMagic;
  std::uint64_t bits;
  std::memcpy(&bits, &shifted, sizeof bits);
  const double q = shifted - kRoundMagic;
  const auto quadrant = static_cast<std::uint32_t>(bits) & 3u;

  const double r = ((x - q * kPio2Hi) - q * kPio2Mid) - q * kPio2Lo;
  const double z = r * r;
  const double ks = r + r * z * (S1 + z * (S2 + z * (S3 + z * (S4 + z * (S5 + z * S6)))));
  const double kc = 1.0 - 0.5 * z + z * z * (C1 + z * (C2 + z * (C3 + z * (C4 + z * (C5 + z * C6)))));

  const bool swap = quadrant & 1u;
  const double sv = swap ? kc : ks;
  const double cv = swap ? ks : kc;
  s = (quadrant & 2u) ? -sv : sv;
  c = ((quadrant + 1u) & 2u) ? -cv : cv;
}

}  // namespace

void sincos_array(const double* x, double* s, double* c, std::size_t n) {
  bool in_range = true;
  for (std::size_t i = 0; i < n; ++i) in_range &= std::abs(x[i]) < kMaxArg;
  if (!in_range) {
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::sin(x[i]);
      c[i] = std::cos(x[i]);
    }
    return;
  }
  for (std::size_t i = 0; i < n; ++i) sincos_reduced(x[i], s[i], c[i]);
}

}  // namespace dynnet
