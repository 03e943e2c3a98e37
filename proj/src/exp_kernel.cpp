// Compiled with -ffast-math (see src/CMakeLists.txt) so GCC emits the
// vectorized libmvec exp. Keep this translation unit to pure elementwise maps:
// fast-math must not leak into code that relies on strict IEEE semantics.
#include <cmath>
#include <cstdint>

namespace woc::kern {

void batch_exp(double* __restrict dst, const double* __restrict src, int64_t n) {
    for (int64_t i = 0; i < n; ++i) dst[i] = std::exp(src[i]);
}

} // namespace woc::kern
