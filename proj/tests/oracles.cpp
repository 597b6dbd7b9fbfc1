#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oracle {

using ntklab::ActivationTrace;
using ntklab::GradientSet;
using ntklab::LabeledDataset;
using ntklab::Matrix;
using ntklab::NetworkParams;

double slow_forward(const NetworkParams& p, std::span<const double> x) {
  std::size_t m = static_cast<std::size_t>(p.config.width);
  double scale = std::sqrt(2.0 / static_cast<double>(m));
  std::vector<double> h(x.begin(), x.end());
  for (const Matrix& w : p.layers) {
    std::vector<double> next(m, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      double pre = 0.0;
      for (std::size_t j = 0; j < h.size(); ++j) pre += w(r, j) * h[j];
      if (pre >= 0.0) next[r] = scale * pre;
    }
    h = std::move(next);
  }
  double out = 0.0;
  for (std::size_t r = 0; r < m; ++r) out += p.out_signs[r] * h[r];
  return out;
}

GradientSet fd_gradients(const NetworkParams& p, std::span<const double> x, double h) {
  GradientSet g;
  NetworkParams probe = p;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    Matrix grad(p.layers[l].rows(), p.layers[l].cols());
    for (std::size_t r = 0; r < grad.rows(); ++r)
      for (std::size_t c = 0; c < grad.cols(); ++c) {
        double saved = probe.layers[l](r, c);
        probe.layers[l](r, c) = saved + h;
        double up = slow_forward(probe, x);
        probe.layers[l](r, c) = saved - h;
        double down = slow_forward(probe, x);
        probe.layers[l](r, c) = saved;
        grad(r, c) = (up - down) / (2.0 * h);
      }
    g.layers.push_back(std::move(grad));
  }
  return g;
}

double min_preactivation_margin(const NetworkParams& p, std::span<const double> x) {
  std::size_t m = static_cast<std::size_t>(p.config.width);
  double scale = std::sqrt(2.0 / static_cast<double>(m));
  std::vector<double> h(x.begin(), x.end());
  double best = std::numeric_limits<double>::infinity();
  for (const Matrix& w : p.layers) {
    std::vector<double> next(m, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      double pre = 0.0;
      for (std::size_t j = 0; j < h.size(); ++j) pre += w(r, j) * h[j];
      best = std::min(best, std::fabs(pre));
      if (pre >= 0.0) next[r] = scale * pre;
    }
    h = std::move(next);
  }
  return best;
}

double jacobi_spectral_norm(const Matrix& m, double rel_tol) {
  // Work on the transpose when that gives fewer columns.
  std::size_t rows = m.rows(), cols = m.cols();
  bool flip = cols > rows;
  if (flip) std::swap(rows, cols);
  std::vector<std::vector<double>> a(cols, std::vector<double>(rows));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (flip)
        a[i][j] = m(i, j);
      else
        a[j][i] = m(i, j);
    }
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool rotated = false;
    for (std::size_t pcol = 0; pcol + 1 < cols; ++pcol)
      for (std::size_t q = pcol + 1; q < cols; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (std::size_t k = 0; k < rows; ++k) {
          app += a[pcol][k] * a[pcol][k];
          aqq += a[q][k] * a[q][k];
          apq += a[pcol][k] * a[q][k];
        }
        if (std::fabs(apq) <= rel_tol * std::sqrt(app * aqq)) continue;
        rotated = true;
        double zeta = (aqq - app) / (2.0 * apq);
        double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                   (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
        double c = 1.0 / std::sqrt(1.0 + t * t), s = c * t;
        for (std::size_t k = 0; k < rows; ++k) {
          double vp = a[pcol][k], vq = a[q][k];
          a[pcol][k] = c * vp - s * vq;
          a[q][k] = s * vp + c * vq;
        }
      }
    if (!rotated) break;
  }
  double best = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    double sq = 0.0;
    for (std::size_t k = 0; k < rows; ++k) sq += a[j][k] * a[j][k];
    best = std::max(best, sq);
  }
  return std::sqrt(best);
}

Matrix materialize_masked_product(const NetworkParams& p, const ActivationTrace& trace,
                                  int first, int last) {
  if (first < 2 || last < first || last > p.config.depth)
    throw std::invalid_argument("bad layer range");
  std::size_t m = static_cast<std::size_t>(p.config.width);
  double scale = std::sqrt(2.0 / static_cast<double>(m));
  Matrix acc(m, m);
  for (std::size_t i = 0; i < m; ++i) acc(i, i) = 1.0;
  for (int l = first; l <= last; ++l) {
    const Matrix& w = p.layers[l - 1];
    const std::vector<std::uint8_t>& bits = trace.active[l - 1];
    Matrix next(m, m);
    for (std::size_t i = 0; i < m; ++i) {
      if (!bits[i]) continue;
      for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < m; ++k) s += w(i, k) * acc(k, j);
        next(i, j) = scale * s;
      }
    }
    acc = std::move(next);
  }
  return acc;
}

double grid_margin_2d(const std::vector<std::array<double, 2>>& feats, int directions) {
  double best = 0.0;
  for (int k = 0; k < directions; ++k) {
    double theta = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(directions);
    double cx = std::cos(theta), cy = std::sin(theta);
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& f : feats) worst = std::min(worst, cx * f[0] + cy * f[1]);
    best = std::max(best, worst);
  }
  return best;
}

double materialized_rademacher_mean(const NetworkParams& p, const LabeledDataset& data,
                                    double radius,
                                    const std::vector<std::vector<double>>& signs) {
  std::vector<GradientSet> grads;
  grads.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    ActivationTrace trace;
    forward_with_trace(p, data.point(i), trace);
    grads.push_back(layer_gradients(p, trace));
  }
  double n = static_cast<double>(data.size());
  double total = 0.0;
  for (const std::vector<double>& e : signs) {
    double sq = 0.0;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      Matrix sum(p.layers[l].rows(), p.layers[l].cols());
      for (std::size_t i = 0; i < data.size(); ++i)
        for (std::size_t r = 0; r < sum.rows(); ++r)
          for (std::size_t c = 0; c < sum.cols(); ++c)
            sum(r, c) += e[i] * grads[i].layers[l](r, c);
      for (std::size_t r = 0; r < sum.rows(); ++r)
        for (std::size_t c = 0; c < sum.cols(); ++c) sq += sum(r, c) * sum(r, c);
    }
    total += radius / n * std::sqrt(sq);
  }
  return total / static_cast<double>(signs.size());
}

}  // namespace oracle
