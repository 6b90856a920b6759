#pragma once

#include <cstddef>

namespace dynnet {

/// Elementwise sin and cos for arguments with |x| < 2^20 * pi/2.
///
/// Cody-Waite reduction by pi/2 followed by the fdlibm minimax kernels; the
/// loop is branch-free so the compiler can vectorize it. Agrees with
/// std::sin / std::cos to a few ulp. Larger arguments fall back to libm.
void sincos_array(const double* x, double* s, double* c, std::size_t n);

}  // namespace dynnet
