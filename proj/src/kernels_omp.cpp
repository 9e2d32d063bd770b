#include "tilevae/kernels.hpp"

#include <vector>

// Work is split across independent output rows only; every reduction runs
// serially inside one iteration in the same order as the serial kernels.

namespace tilevae::kernels::omp {

namespace {
using Index = long long;
}

void affine_forward(ConstMatrix x, ConstMatrix w, std::span<const double> b, MutMatrix y) {
  const Index rows = static_cast<Index>(x.rows);
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < rows; ++r) {
    double* out = &y(r, 0);
    for (std::size_t j = 0; j < w.cols; ++j) out[j] = b[j];
    for (std::size_t i = 0; i < x.cols; ++i) {
      const double xi = x(r, i);
      if (xi == 0.0) continue;
      const double* wi = &w(i, 0);
      for (std::size_t j = 0; j < w.cols; ++j) out[j] += xi * wi[j];
    }
  }
}

void affine_backward_input(ConstMatrix dy, ConstMatrix w, MutMatrix dx) {
  const Index rows = static_cast<Index>(dy.rows);
  const Index fan_in = static_cast<Index>(w.rows);
#pragma omp parallel for collapse(2) schedule(static)
  for (Index r = 0; r < rows; ++r) {
    for (Index i = 0; i < fan_in; ++i) {
      const double* g = &dy(r, 0);
      const double* wi = &w(i, 0);
      double acc = 0.0;
      for (std::size_t j = 0; j < w.cols; ++j) acc += g[j] * wi[j];
      dx(r, i) = acc;
    }
  }
}

void affine_accumulate_grad(ConstMatrix x, ConstMatrix dy, double scale, MutMatrix dw,
                            std::span<double> db) {
  const Index fan_in = static_cast<Index>(x.cols);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < fan_in; ++i) {
    double* row = &dw(i, 0);
    for (std::size_t r = 0; r < x.rows; ++r) {
      const double xi = x(r, i);
      if (xi == 0.0) continue;
      const double s = scale * xi;
      const double* g = &dy(r, 0);
      for (std::size_t j = 0; j < dy.cols; ++j) row[j] += s * g[j];
    }
  }
  const Index fan_out = static_cast<Index>(dy.cols);
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < fan_out; ++j) {
    double acc = 0.0;
    for (std::size_t r = 0; r < dy.rows; ++r) acc += dy(r, j);
    db[j] += scale * acc;
  }
}

void pairwise_sq_dists(ConstMatrix points, MutMatrix out) {
  const Index n = static_cast<Index>(points.rows);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < points.cols; ++k) {
        const double d = points(i, k) - points(j, k);
        acc += d * d;
      }
      out(i, j) = acc;
    }
  }
}

double student_t_kernel(ConstMatrix y, MutMatrix num) {
  const Index n = static_cast<Index>(y.rows);
  std::vector<double> row_sums(y.rows, 0.0);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (i == j) {
        num(i, j) = 0.0;
        continue;
      }
      double d2 = 0.0;
      for (std::size_t k = 0; k < y.cols; ++k) {
        const double d = y(i, k) - y(j, k);
        d2 += d * d;
      }
      const double v = 1.0 / (1.0 + d2);
      num(i, j) = v;
      row_sum += v;
    }
    row_sums[i] = row_sum;
  }
  double total = 0.0;
  for (double s : row_sums) total += s;
  return total;
}

void tsne_gradient(ConstMatrix p, ConstMatrix num, double z, double exaggeration, ConstMatrix y,
                   MutMatrix grad) {
  const Index n = static_cast<Index>(y.rows);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < y.cols; ++k) grad(i, k) = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double q = num(i, j) / z;
      const double mult = (exaggeration * p(i, j) - q) * num(i, j);
      for (std::size_t k = 0; k < y.cols; ++k) grad(i, k) += mult * (y(i, k) - y(j, k));
    }
    for (std::size_t k = 0; k < y.cols; ++k) grad(i, k) *= 4.0;
  }
}

}  // namespace tilevae::kernels::omp
