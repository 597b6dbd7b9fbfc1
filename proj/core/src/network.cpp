#include "ntklab/network.hpp"

#include <cmath>
#include <string>

#include "ntklab/errors.hpp"
#include "ntklab/rng.hpp"
#include "ntklab/threading.hpp"

namespace ntklab {

void NetworkConfig::validate() const {
  if (depth < 1) throw ConfigError("depth must be >= 1, got " + std::to_string(depth));
  if (width < 2 || width % 2 != 0)
    throw ConfigError("width must be even and >= 2, got " + std::to_string(width));
  if (input_dim < 1)
    throw ConfigError("input_dim must be >= 1, got " + std::to_string(input_dim));
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix& w : layers) n += w.size();
  return n;
}

double GradientSet::squared_frobenius() const {
  long double acc = 0.0L;
  for (const Matrix& g : layers) {
    const double* p = g.data();
    for (std::size_t i = 0; i < g.size(); ++i) acc += static_cast<long double>(p[i]) * p[i];
  }
  return static_cast<double>(acc);
}

double GradientSet::frobenius() const { return std::sqrt(squared_frobenius()); }

NetworkParams init_symmetric(const NetworkConfig& cfg) {
  cfg.validate();
  NetworkParams p;
  p.config = cfg;
  std::size_t m = static_cast<std::size_t>(cfg.width);
  std::size_t half = m / 2;
  CounterRng root(cfg.seed);

  p.layers.reserve(cfg.depth);
  for (int l = 1; l <= cfg.depth; ++l) {
    std::size_t cols = (l == 1) ? static_cast<std::size_t>(cfg.input_dim) : m;
    Matrix w(m, cols);
    CounterRng layer = root.stream(static_cast<std::uint64_t>(l));
    bool last = (l == cfg.depth);
    std::size_t fresh_rows = last ? half : m;
    parallel_for(fresh_rows, [&](std::size_t begin, std::size_t end) {
      for (std::size_t r = begin; r < end; ++r) {
        CounterRng row = layer.stream(r);
        double* out = w.row(r);
        for (std::size_t j = 0; j < cols; ++j) out[j] = row.next_gaussian();
      }
    });
    if (last) {
      for (std::size_t r = 0; r < half; ++r) {
        const double* src = w.row(r);
        double* dst = w.row(r + half);
        for (std::size_t j = 0; j < cols; ++j) dst[j] = src[j];
      }
    }
    p.layers.push_back(std::move(w));
  }

  p.out_signs.resize(m);
  CounterRng signs = root.stream(0);
  for (std::size_t r = 0; r < half; ++r) {
    double s = signs.next_sign();
    p.out_signs[r] = s;
    p.out_signs[r + half] = -s;
  }
  return p;
}

namespace {

void check_input(const NetworkParams& p, std::span<const double> x, InputCheck check) {
  if (x.size() != static_cast<std::size_t>(p.config.input_dim))
    throw ConfigError("input has dim " + std::to_string(x.size()) + ", network expects " +
                      std::to_string(p.config.input_dim));
  if (check == InputCheck::strict) {
    double n = norm(x);
    if (std::abs(n - 1.0) > 1e-12)
      throw ConfigError("input norm " + std::to_string(n) + " is not 1 within 1e-12");
  }
}

// Paired output summation: pairs (r, r + m/2) are added together so that the
// duplicated-row, negated-sign structure of a symmetric last layer cancels
// exactly in floating point.
double paired_output_sum(std::span<const double> signs, std::span<const double> h) {
  std::size_t half = signs.size() / 2;
  double acc = 0.0;
  for (std::size_t r = 0; r < half; ++r)
    acc += signs[r] * h[r] + signs[r + half] * h[r + half];
  return acc;
}

}  // namespace

double forward_with_trace(const NetworkParams& p, std::span<const double> x,
                          ActivationTrace& trace, InputCheck check) {
  check_input(p, x, check);
  std::size_t m = static_cast<std::size_t>(p.config.width);
  int depth = p.config.depth;
  double scale = std::sqrt(2.0 / static_cast<double>(m));

  trace.h.assign(depth + 1, {});
  trace.active.assign(depth, {});
  trace.h[0].assign(x.begin(), x.end());

  std::vector<double> pre(m);
  for (int l = 1; l <= depth; ++l) {
    const Matrix& w = p.layers[l - 1];
    matvec(w, trace.h[l - 1], pre);
    std::vector<double>& h = trace.h[l];
    std::vector<std::uint8_t>& bits = trace.active[l - 1];
    h.assign(m, 0.0);
    bits.assign(m, 0);
    for (std::size_t r = 0; r < m; ++r) {
      if (pre[r] >= 0.0) {
        bits[r] = 1;
        h[r] = scale * pre[r];
      }
    }
  }
  return paired_output_sum(p.out_signs, trace.h[depth]);
}

double forward(const NetworkParams& p, std::span<const double> x, InputCheck check) {
  ActivationTrace trace;
  return forward_with_trace(p, x, trace, check);
}

std::vector<std::vector<double>> backprop_vectors(const NetworkParams& p,
                                                  const ActivationTrace& trace) {
  std::size_t m = static_cast<std::size_t>(p.config.width);
  int depth = p.config.depth;
  if (trace.active.size() != static_cast<std::size_t>(depth) ||
      trace.h.size() != static_cast<std::size_t>(depth) + 1)
    throw ConfigError("trace depth does not match network depth");
  double scale = std::sqrt(2.0 / static_cast<double>(m));

  std::vector<std::vector<double>> v(depth);
  v[depth - 1].assign(m, 0.0);
  for (std::size_t r = 0; r < m; ++r)
    if (trace.active[depth - 1][r]) v[depth - 1][r] = scale * p.out_signs[r];

  std::vector<double> t(m);
  for (int l = depth - 1; l >= 1; --l) {
    matvec_transpose(p.layers[l], v[l], t);
    v[l - 1].assign(m, 0.0);
    for (std::size_t r = 0; r < m; ++r)
      if (trace.active[l - 1][r]) v[l - 1][r] = scale * t[r];
  }
  return v;
}

GradientSet layer_gradients(const NetworkParams& p, const ActivationTrace& trace) {
  std::vector<std::vector<double>> v = backprop_vectors(p, trace);
  GradientSet g;
  g.layers.reserve(p.layers.size());
  for (int l = 1; l <= p.config.depth; ++l) {
    const std::vector<double>& left = v[l - 1];
    const std::vector<double>& right = trace.h[l - 1];
    Matrix grad(left.size(), right.size());
    parallel_for(left.size(), [&](std::size_t begin, std::size_t end) {
      for (std::size_t r = begin; r < end; ++r) {
        double c = left[r];
        double* out = grad.row(r);
        if (c == 0.0) continue;  // rows of inactive units stay exactly zero
        for (std::size_t j = 0; j < right.size(); ++j) out[j] = c * right[j];
      }
    });
    g.layers.push_back(std::move(grad));
  }
  return g;
}

namespace {

void check_same_shape(const NetworkParams& a, const NetworkParams& b) {
  if (a.layers.size() != b.layers.size())
    throw ConfigError("parameter sets have different depths");
  for (std::size_t l = 0; l < a.layers.size(); ++l)
    if (a.layers[l].rows() != b.layers[l].rows() || a.layers[l].cols() != b.layers[l].cols())
      throw ConfigError("layer " + std::to_string(l + 1) + " shapes differ");
}

}  // namespace

double squared_frobenius_distance(const NetworkParams& a, const NetworkParams& b) {
  check_same_shape(a, b);
  long double acc = 0.0L;
  for (std::size_t l = 0; l < a.layers.size(); ++l)
    acc += static_cast<long double>(squared_frobenius_distance(a.layers[l], b.layers[l]));
  return static_cast<double>(acc);
}

double frobenius_distance(const NetworkParams& a, const NetworkParams& b) {
  return std::sqrt(squared_frobenius_distance(a, b));
}

std::vector<double> layer_frobenius_distances(const NetworkParams& a, const NetworkParams& b) {
  check_same_shape(a, b);
  std::vector<double> out;
  out.reserve(a.layers.size());
  for (std::size_t l = 0; l < a.layers.size(); ++l)
    out.push_back(frobenius_distance(a.layers[l], b.layers[l]));
  return out;
}

NetworkParams perturb_layers(const NetworkParams& p, double radius, std::uint64_t seed) {
  if (!(radius >= 0.0)) throw ConfigError("perturbation radius must be >= 0");
  NetworkParams out = p;
  CounterRng root(seed);
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    Matrix& w = out.layers[l];
    Matrix dir(w.rows(), w.cols());
    CounterRng layer = root.stream(l + 1);
    parallel_for(w.rows(), [&](std::size_t begin, std::size_t end) {
      for (std::size_t r = begin; r < end; ++r) {
        CounterRng row = layer.stream(r);
        double* d = dir.row(r);
        for (std::size_t j = 0; j < w.cols(); ++j) d[j] = row.next_gaussian();
      }
    });
    double n = frobenius_norm(dir);
    if (n == 0.0) continue;
    double c = radius / n;
    double* dw = w.data();
    const double* dd = dir.data();
    for (std::size_t i = 0; i < w.size(); ++i) dw[i] += c * dd[i];
  }
  return out;
}

}  // namespace ntklab
