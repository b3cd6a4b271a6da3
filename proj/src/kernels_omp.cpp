#include <cmath>

#include "cmet/kernels.hpp"

// OpenMP twins of the serial kernels. Each output element is computed by a
// single thread with the same local accumulation order as the reference, so
// the results match bit for bit regardless of thread count.

namespace cmet::kernels::omp {

template <class S>
void matmul_nn(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      S acc = 0;
      for (int p = 0; p < k; ++p) acc += a[(size_t)i * k + p] * b[(size_t)p * n + j];
      if (accumulate)
        c[(size_t)i * n + j] += acc;
      else
        c[(size_t)i * n + j] = acc;
    }
  }
}

template <class S>
void matmul_nt(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      S acc = 0;
      for (int p = 0; p < k; ++p) acc += a[(size_t)i * k + p] * b[(size_t)j * k + p];
      if (accumulate)
        c[(size_t)i * n + j] += acc;
      else
        c[(size_t)i * n + j] = acc;
    }
  }
}

template <class S>
void matmul_tn(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      S acc = 0;
      for (int p = 0; p < k; ++p) acc += a[(size_t)p * m + i] * b[(size_t)p * n + j];
      if (accumulate)
        c[(size_t)i * n + j] += acc;
      else
        c[(size_t)i * n + j] = acc;
    }
  }
}

template <class S>
void conv1d(const S* x, const S* w, const S* bias, S* y, int t_in, int c_in, int c_out, int ksize,
            int stride, int pad) {
  const int t_out = (t_in + 2 * pad - ksize) / stride + 1;
#pragma omp parallel for collapse(2) schedule(static)
  for (int t = 0; t < t_out; ++t) {
    for (int co = 0; co < c_out; ++co) {
      S acc = bias ? bias[co] : S(0);
      for (int kk = 0; kk < ksize; ++kk) {
        const int ti = t * stride - pad + kk;
        if (ti < 0 || ti >= t_in) continue;
        for (int ci = 0; ci < c_in; ++ci)
          acc += x[(size_t)ti * c_in + ci] * w[((size_t)kk * c_in + ci) * c_out + co];
      }
      y[(size_t)t * c_out + co] = acc;
    }
  }
}

template <class S>
void softmax_lines(const S* x, S* y, size_t outer, int len, size_t inner) {
  const long long lines = (long long)outer * (long long)inner;
#pragma omp parallel for schedule(static)
  for (long long l = 0; l < lines; ++l) {
    const size_t o = (size_t)l / inner;
    const size_t i = (size_t)l % inner;
    const size_t base = o * (size_t)len * inner + i;
    S mx = x[base];
    for (int a = 1; a < len; ++a) mx = std::max(mx, x[base + (size_t)a * inner]);
    S denom = 0;
    for (int a = 0; a < len; ++a) {
      const S e = std::exp(x[base + (size_t)a * inner] - mx);
      y[base + (size_t)a * inner] = e;
      denom += e;
    }
    for (int a = 0; a < len; ++a) y[base + (size_t)a * inner] /= denom;
  }
}

template <class S>
void layer_norm_rows(const S* x, const S* gain, const S* bias, S eps, S* y, S* mean, S* rstd,
                     int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const S* xr = x + (size_t)r * cols;
    S mu = 0;
    for (int c = 0; c < cols; ++c) mu += xr[c];
    mu /= (S)cols;
    S var = 0;
    for (int c = 0; c < cols; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= (S)cols;
    const S rs = S(1) / std::sqrt(var + eps);
    mean[r] = mu;
    rstd[r] = rs;
    S* yr = y + (size_t)r * cols;
    for (int c = 0; c < cols; ++c) yr[c] = (xr[c] - mu) * rs * gain[c] + bias[c];
  }
}

template <class S>
void gelu(const S* x, S* y, size_t n) {
  const S inv_sqrt2 = S(0.7071067811865475244);
  const long long nn = (long long)n;
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < nn; ++i) y[i] = S(0.5) * x[i] * (S(1) + std::erf(x[i] * inv_sqrt2));
}

template <class S>
void add(const S* a, const S* b, S* y, size_t n) {
  const long long nn = (long long)n;
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < nn; ++i) y[i] = a[i] + b[i];
}

template <class S>
void mul(const S* a, const S* b, S* y, size_t n) {
  const long long nn = (long long)n;
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < nn; ++i) y[i] = a[i] * b[i];
}

#define CMET_INSTANTIATE_OMP(S)                                                                 \
  template void matmul_nn<S>(const S*, const S*, S*, int, int, int, bool);                      \
  template void matmul_nt<S>(const S*, const S*, S*, int, int, int, bool);                      \
  template void matmul_tn<S>(const S*, const S*, S*, int, int, int, bool);                      \
  template void conv1d<S>(const S*, const S*, const S*, S*, int, int, int, int, int, int);      \
  template void softmax_lines<S>(const S*, S*, size_t, int, size_t);                            \
  template void layer_norm_rows<S>(const S*, const S*, const S*, S, S*, S*, S*, int, int);      \
  template void gelu<S>(const S*, S*, size_t);                                                  \
  template void add<S>(const S*, const S*, S*, size_t);                                         \
  template void mul<S>(const S*, const S*, S*, size_t);

CMET_INSTANTIATE_OMP(float)
CMET_INSTANTIATE_OMP(double)

}  // namespace cmet::kernels::omp
