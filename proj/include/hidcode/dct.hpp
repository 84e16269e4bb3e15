#pragma once

namespace hidcode {

// Orthonormal 8x8 type-II DCT, separable. in/out may not alias.
// Layout is row-major: index = y*8 + x spatial, v*8 + u frequency.
void dct8x8_forward(const float* in, float* out);
void dct8x8_inverse(const float* in, float* out);

}  // namespace hidcode
