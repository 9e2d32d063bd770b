#pragma once

// Dense numeric kernels shared by the model, search and projection code.
//
// Each kernel exists twice: a plain serial loop nest (the reference) and an
// OpenMP version. Both visit the reduction dimension in the same order, so
// the two produce bit-identical results for any thread count; the tests
// assert this and the benchmark compares their speed.

#include <cstddef>
#include <span>

namespace tilevae::kernels {

enum class Exec { serial, parallel };

/// Row-major matrix view. `rows * cols == data.size()`.
template <class T>
struct Matrix {
  std::span<T> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<T> row(std::size_t r) const { return data.subspan(r * cols, cols); }
};

using ConstMatrix = Matrix<const double>;
using MutMatrix = Matrix<double>;

#define TILEVAE_KERNEL_DECLS                                                              \
  /* Y = X * W + 1 b^T with W stored fan_in x fan_out. Zero inputs are skipped. */        \
  void affine_forward(ConstMatrix x, ConstMatrix w, std::span<const double> b,            \
                      MutMatrix y);                                                       \
  /* dX = dY * W^T */                                                                     \
  void affine_backward_input(ConstMatrix dy, ConstMatrix w, MutMatrix dx);                \
  /* dW += scale * X^T dY ; db += scale * 1^T dY */                                       \
  void affine_accumulate_grad(ConstMatrix x, ConstMatrix dy, double scale, MutMatrix dw,  \
                              std::span<double> db);                                      \
  /* D(i,j) = |p_i - p_j|^2 */                                                            \
  void pairwise_sq_dists(ConstMatrix points, MutMatrix out);                              \
  /* Student-t kernel num(i,j) = 1/(1+|y_i-y_j|^2), zero diagonal. Returns sum of num. */ \
  double student_t_kernel(ConstMatrix y, MutMatrix num);                                  \
  /* t-SNE gradient: g_i = 4 sum_j (exag*P_ij - num_ij/z) num_ij (y_i - y_j) */            \
  void tsne_gradient(ConstMatrix p, ConstMatrix num, double z, double exaggeration,       \
                     ConstMatrix y, MutMatrix grad);

namespace serial {
TILEVAE_KERNEL_DECLS
}
namespace omp {
TILEVAE_KERNEL_DECLS
}

#undef TILEVAE_KERNEL_DECLS

inline void affine_forward(Exec e, ConstMatrix x, ConstMatrix w, std::span<const double> b,
                           MutMatrix y) {
  e == Exec::serial ? serial::affine_forward(x, w, b, y) : omp::affine_forward(x, w, b, y);
}
inline void affine_backward_input(Exec e, ConstMatrix dy, ConstMatrix w, MutMatrix dx) {
  e == Exec::serial ? serial::affine_backward_input(dy, w, dx)
                    : omp::affine_backward_input(dy, w, dx);
}
inline void affine_accumulate_grad(Exec e, ConstMatrix x, ConstMatrix dy, double scale,
                                   MutMatrix dw, std::span<double> db) {
  e == Exec::serial ? serial::affine_accumulate_grad(x, dy, scale, dw, db)
                    : omp::affine_accumulate_grad(x, dy, scale, dw, db);
}
inline void pairwise_sq_dists(Exec e, ConstMatrix points, MutMatrix out) {
  e == Exec::serial ? serial::pairwise_sq_dists(points, out) : omp::pairwise_sq_dists(points, out);
}
inline double student_t_kernel(Exec e, ConstMatrix y, MutMatrix num) {
  return e == Exec::serial ? serial::student_t_kernel(y, num) : omp::student_t_kernel(y, num);
}
inline void tsne_gradient(Exec e, ConstMatrix p, ConstMatrix num, double z, double exaggeration,
                          ConstMatrix y, MutMatrix grad) {
  e == Exec::serial ? serial::tsne_gradient(p, num, z, exaggeration, y, grad)
                    : omp::tsne_gradient(p, num, z, exaggeration, y, grad);
}

/// Process-wide default used by operations that do not take an Exec argument.
Exec default_exec();
void set_default_exec(Exec e);

}  // namespace tilevae::kernels
