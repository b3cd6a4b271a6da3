#pragma once

#include <cstddef>

namespace cmet::kernels {

// Runtime-selectable compute backend. The OpenMP variants assign every
// output element to exactly one thread and keep the per-element accumulation
// order identical to the serial reference, so both backends produce
// bit-identical results for any thread count; tests assert this.
enum class Backend { serial, openmp };

void set_backend(Backend b);
Backend backend();
bool openmp_available();
int max_threads();
void set_threads(int n);

namespace serial {

// c[m x n] = a[m x k] * b[k x n]            (accumulate: c +=)
template <class S>
void matmul_nn(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate);

// c[m x n] = a[m x k] * b[n x k]^T
template <class S>
void matmul_nt(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate);

// c[m x n] = a[k x m]^T * b[k x n]
template <class S>
void matmul_tn(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate);

// y[t_out x c_out] from x[t_in x c_in], w[ksize x c_in x c_out], optional
// bias[c_out]; zero padding outside [0, t_in).
template <class S>
void conv1d(const S* x, const S* w, const S* bias, S* y, int t_in, int c_in, int c_out,
            int ksize, int stride, int pad);

// Softmax along the middle extent of an (outer, len, inner) view, with
// max-subtraction.
template <class S>
void softmax_lines(const S* x, S* y, size_t outer, int len, size_t inner);

// Row-wise layer norm; mean/rstd (1/sqrt(var+eps)) saved for backward.
template <class S>
void layer_norm_rows(const S* x, const S* gain, const S* bias, S eps, S* y, S* mean, S* rstd,
                     int rows, int cols);

template <class S>
void gelu(const S* x, S* y, size_t n);

template <class S>
void add(const S* a, const S* b, S* y, size_t n);

template <class S>
void mul(const S* a, const S* b, S* y, size_t n);

}  // namespace serial

namespace omp {

template <class S>
void matmul_nn(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate);
template <class S>
void matmul_nt(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate);
template <class S>
void matmul_tn(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate);
template <class S>
void conv1d(const S* x, const S* w, const S* bias, S* y, int t_in, int c_in, int c_out,
            int ksize, int stride, int pad);
template <class S>
void softmax_lines(const S* x, S* y, size_t outer, int len, size_t inner);
template <class S>
void layer_norm_rows(const S* x, const S* gain, const S* bias, S eps, S* y, S* mean, S* rstd,
                     int rows, int cols);
template <class S>
void gelu(const S* x, S* y, size_t n);
template <class S>
void add(const S* a, const S* b, S* y, size_t n);
template <class S>
void mul(const S* a, const S* b, S* y, size_t n);

}  // namespace omp

// Dispatching entry points used by the autodiff ops.
template <class S>
void matmul_nn(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate = false);
template <class S>
void matmul_nt(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate = false);
template <class S>
void matmul_tn(const S* a, const S* b, S* c, int m, int k, int n, bool accumulate = false);
template <class S>
void conv1d(const S* x, const S* w, const S* bias, S* y, int t_in, int c_in, int c_out, int ksize,
            int stride, int pad);
template <class S>
void softmax_lines(const S* x, S* y, size_t outer, int len, size_t inner);
template <class S>
void layer_norm_rows(const S* x, const S* gain, const S* bias, S eps, S* y, S* mean, S* rstd,
                     int rows, int cols);
template <class S>
void gelu(const S* x, S* y, size_t n);
template <class S>
void add(const S* a, const S* b, S* y, size_t n);
template <class S>
void mul(const S* a, const S* b, S* y, size_t n);

}  // namespace cmet::kernels
