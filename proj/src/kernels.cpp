#include "cmet/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cmet::kernels {

namespace {
Backend g_backend = Backend::serial;
}

void set_backend(Backend b) { g_backend = b; }
Backend backend() { return g_backend; }

bool openmp_available() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

template <class S>
void matmul_nn(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate) {
  if (g_backend == Backend::openmp)
    omp::matmul_nn(a, b, c, m, k, n, accumulate);
  else
    serial::matmul_nn(a, b, c, m, k, n, accumulate);
}

template <class S>
void matmul_nt(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate) {
  if (g_backend == Backend::openmp)
    omp::matmul_nt(a, b, c, m, k, n, accumulate);
  else
    serial::matmul_nt(a, b, c, m, k, n, accumulate);
}

template <class S>
void matmul_tn(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate) {
  if (g_backend == Backend::openmp)
    omp::matmul_tn(a, b, c, m, k, n, accumulate);
  else
    serial::matmul_tn(a, b, c, m, k, n, accumulate);
}

template <class S>
void conv1d(const S* x, const S* w, const S* bias, S* y, int t_in, int c_in, int c_out, int ksize,
            int stride, int pad) {
  if (g_backend == Backend::openmp)
    omp::conv1d(x, w, bias, y, t_in, c_in, c_out, ksize, stride, pad);
  else
    serial::conv1d(x, w, bias, y, t_in, c_in, c_out, ksize, stride, pad);
}

template <class S>
void softmax_lines(const S* x, S* y, size_t outer, int len, size_t inner) {
  if (g_backend == Backend::openmp)
    omp::softmax_lines(x, y, outer, len, inner);
  else
    serial::softmax_lines(x, y, outer, len, inner);
}

template <class S>
void layer_norm_rows(const S* x, const S* gain, const S* bias, S eps, S* y, S* mean, S* rstd,
                     int rows, int cols) {
  if (g_backend == Backend::openmp)
    omp::layer_norm_rows(x, gain, bias, eps, y, mean, rstd, rows, cols);
  else
    serial::layer_norm_rows(x, gain, bias, eps, y, mean, rstd, rows, cols);
}

template <class S>
void gelu(const S* x, S* y, size_t n) {
  if (g_backend == Backend::openmp)
    omp::gelu(x, y, n);
  else
    serial::gelu(x, y, n);
}

template <class S>
void add(const S* a, const S* b, S* y, size_t n) {
  if (g_backend == Backend::openmp)
    omp::add(a, b, y, n);
  else
    serial::add(a, b, y, n);
}

template <class S>
void mul(const S* a, const S* b, S* y, size_t n) {
  if (g_backend == Backend::openmp)
    omp::mul(a, b, y, n);
  else
    serial::mul(a, b, y, n);
}

#define CMET_INSTANTIATE_DISPATCH(S)                                                            \
  template void matmul_nn<S>(const S*, const S*, S*, int, int, int, bool);                      \
  template void matmul_nt<S>(const S*, const S*, S*, int, int, int, bool);                      \
  template void matmul_tn<S>(const S*, const S*, S*, int, int, int, bool);                      \
  template void conv1d<S>(const S*, const S*, const S*, S*, int, int, int, int, int, int);      \
  template void softmax_lines<S>(const S*, S*, size_t, int, size_t);                            \
  template void layer_norm_rows<S>(const S*, const S*, const S*, S, S*, S*, S*, int, int);      \
  template void gelu<S>(const S*, S*, size_t);                                                  \
  template void add<S>(const S*, const S*, S*, size_t);                                         \
  template void mul<S>(const S*, const S*, S*, size_t);

CMET_INSTANTIATE_DISPATCH(float)
CMET_INSTANTIATE_DISPATCH(double)

}  // namespace cmet::kernels
