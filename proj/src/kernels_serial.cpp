#include "tilevae/kernels.hpp"

#include <atomic>

namespace tilevae::kernels {

namespace {
std::atomic<Exec> g_default{Exec::parallel};
}

Exec default_exec() { return g_default.load(); }
void set_default_exec(Exec e) { g_default.store(e); }

namespace serial {

void affine_forward(ConstMatrix x, ConstMatrix w, std::span<const double> b, MutMatrix y) {
  for (std::size_t r = 0; r < x.rows; ++r) {
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
  for (std::size_t r = 0; r < dy.rows; ++r) {
    const double* g = &dy(r, 0);
    for (std::size_t i = 0; i < w.rows; ++i) {
      const double* wi = &w(i, 0);
      double acc = 0.0;
      for (std::size_t j = 0; j < w.cols; ++j) acc += g[j] * wi[j];
      dx(r, i) = acc;
    }
  }
}

void affine_accumulate_grad(ConstMatrix x, ConstMatrix dy, double scale, MutMatrix dw,
                            std::span<double> db) {
  for (std::size_t i = 0; i < x.cols; ++i) {
    double* row = &dw(i, 0);
    for (std::size_t r = 0; r < x.rows; ++r) {
      const double xi = x(r, i);
      if (xi == 0.0) continue;
      const double s = scale * xi;
      const double* g = &dy(r, 0);
      for (std::size_t j = 0; j < dy.cols; ++j) row[j] += s * g[j];
    }
  }
  for (std::size_t j = 0; j < dy.cols; ++j) {
    double acc = 0.0;
    for (std::size_t r = 0; r < dy.rows; ++r) acc += dy(r, j);
    db[j] += scale * acc;
  }
}

void pairwise_sq_dists(ConstMatrix points, MutMatrix out) {
  const std::size_t n = points.rows;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
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
  const std::size_t n = y.rows;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
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
    total += row_sum;
  }
  return total;
}

void tsne_gradient(ConstMatrix p, ConstMatrix num, double z, double exaggeration, ConstMatrix y,
                   MutMatrix grad) {
  const std::size_t n = y.rows;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < y.cols; ++k) grad(i, k) = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double q = num(i, j) / z;
      const double mult = (exaggeration * p(i, j) - q) * num(i, j);
      for (std::size_t k = 0; k < y.cols; ++k) grad(i, k) += mult * (y(i, k) - y(j, k));
    }
    for (std::size_t k = 0; k < y.cols; ++k) grad(i, k) *= 4.0;
  }
}

}  // namespace serial
}  // namespace tilevae::kernels
