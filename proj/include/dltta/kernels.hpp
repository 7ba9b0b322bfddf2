#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace dltta::kernels {

// Function table for the hot inner loops. All backends implement identical
// contracts on double buffers; reductions may reassociate, so cross-backend
// agreement is tolerance-checked for dot/sum/sq_l2/axpy/mul_add and required
// to be bit-exact for the single-op elementwise kernels.
struct Backend {
  const char* name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  double (*max)(const double* x, std::size_t n);   // -inf for n == 0
  double (*sq_l2)(const double* a, const double* b, std::size_t n);

  void (*axpy)(double* y, double a, const double* x, std::size_t n);  // y += a*x
  void (*scale)(double* x, double a, std::size_t n);                  // x *= a
  void (*add)(double* y, const double* x, std::size_t n);             // y += x
  void (*sub)(double* out, const double* a, const double* b, std::size_t n);
  void (*mul_add)(double* y, const double* a, const double* b, std::size_t n);  // y += a.*b
  void (*relu)(double* out, const double* x, std::size_t n);
  // dx[i] = out[i] > 0 ? dy[i] : 0
  void (*relu_bwd)(double* dx, const double* out, const double* dy, std::size_t n);
};

const Backend& scalar();

// Currently selected backend. The default is the widest ISA the CPU supports,
// overridable up-front with the DLTTA_KERNELS environment variable.
const Backend& active();

// Force a backend by name ("scalar", "avx2", "neon"). Returns false when the
// backend is not compiled in or the CPU lacks the ISA.
bool select(std::string_view name);

std::vector<const Backend*> available();

// nullptr when unavailable on this build/CPU
const Backend* avx2_backend();
const Backend* neon_backend();

}  // namespace dltta::kernels
