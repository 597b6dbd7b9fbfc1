#include "ntklab/margin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ntklab/errors.hpp"

namespace ntklab {

double TangentFeature::squared_frobenius() const {
  return squared_norm(out_factor) * squared_norm(in_factor);
}

double TangentFeature::dot(const TangentFeature& other) const {
  if (depth != other.depth || out_factor.size() != other.out_factor.size() ||
      in_factor.size() != other.in_factor.size())
    throw ConfigError("tangent features have mismatched shapes");
  return ntklab::dot(out_factor, other.out_factor) * ntklab::dot(in_factor, other.in_factor);
}

std::vector<TangentFeature> tangent_features(const NetworkParams& init,
                                             const LabeledDataset& data) {
  init.config.validate();
  data.validate();
  std::size_t m = static_cast<std::size_t>(init.config.width);
  std::size_t half = m / 2;
  const Matrix& last = init.layers.back();
  for (std::size_t r = 0; r < half; ++r) {
    for (std::size_t j = 0; j < last.cols(); ++j)
      if (last(r, j) != last(r + half, j))
        throw ConfigError("last layer rows are not duplicated; gradients below the last layer "
                          "would not vanish");
    if (init.out_signs[r] != -init.out_signs[r + half])
      throw ConfigError("output signs are not negated across halves");
  }

  double scale = std::sqrt(2.0 / static_cast<double>(m));
  std::vector<TangentFeature> feats;
  feats.reserve(data.size());
  ActivationTrace trace;
  for (std::size_t i = 0; i < data.size(); ++i) {
    forward_with_trace(init, data.point(i), trace);
    TangentFeature f;
    f.depth = init.config.depth;
    f.out_factor.assign(m, 0.0);
    const std::vector<std::uint8_t>& bits = trace.active[init.config.depth - 1];
    for (std::size_t r = 0; r < m; ++r)
      if (bits[r]) f.out_factor[r] = data.labels[i] * scale * init.out_signs[r];
    f.in_factor = trace.h[init.config.depth - 1];
    feats.push_back(std::move(f));
  }
  return feats;
}

MinNormResult min_norm_point(const Matrix& gram, double tol, int max_iterations) {
  std::size_t n = gram.rows();
  if (n == 0 || gram.cols() != n) throw ConfigError("gram matrix must be square and nonempty");
  if (!(tol > 0.0)) throw ConfigError("tol must be > 0");

  MinNormResult res;
  res.weights.assign(n, 0.0);

  std::size_t start = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (gram(i, i) < gram(start, start)) start = i;
  res.weights[start] = 1.0;

  std::vector<double> gl(n);       // (G lambda)_i = <p, phi_i>
  for (std::size_t i = 0; i < n; ++i) gl[i] = gram(i, start);
  double pp = gram(start, start);  // ||p||^2

  for (int it = 1; it <= max_iterations; ++it) {
    res.iterations = it;

    std::size_t fw = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (gl[i] < gl[fw]) fw = i;
    res.dual_gap = std::max(2.0 * (pp - gl[fw]), 0.0);
    if (res.dual_gap <= tol * std::max(1.0, pp)) {
      res.converged = true;
      break;
    }

    std::size_t away = fw;
    bool has_away = false;
    for (std::size_t i = 0; i < n; ++i)
      if (res.weights[i] > 0.0 && (!has_away || gl[i] > gl[away])) {
        away = i;
        has_away = true;
      }

    double fw_gain = pp - gl[fw];      // always >= 0
    double away_gain = gl[away] - pp;

    if (fw_gain >= away_gain) {
      // direction e_fw - lambda, exact line search, cap 1
      double curvature = gram(fw, fw) - 2.0 * gl[fw] + pp;  // ||phi_fw - p||^2
      double t = curvature > 0.0 ? std::clamp(fw_gain / curvature, 0.0, 1.0) : 1.0;
      if (t == 0.0) {
        res.converged = true;  // no representable progress left
        break;
      }
      double old_fw = gl[fw];
      pp = (1.0 - t) * (1.0 - t) * pp + 2.0 * t * (1.0 - t) * old_fw + t * t * gram(fw, fw);
      for (std::size_t i = 0; i < n; ++i) {
        res.weights[i] *= (1.0 - t);
        gl[i] = (1.0 - t) * gl[i] + t * gram(i, fw);
      }
      res.weights[fw] += t;
    } else {
      // direction lambda - e_away, step capped where the away weight hits zero
      double alpha = res.weights[away];
      double t_max = alpha < 1.0 ? alpha / (1.0 - alpha) : std::numeric_limits<double>::infinity();
      double curvature = gram(away, away) - 2.0 * gl[away] + pp;  // ||p - phi_away||^2
      double t = curvature > 0.0 ? std::min(away_gain / curvature, t_max) : t_max;
      t = std::max(t, 0.0);
      if (t == 0.0 || !std::isfinite(t)) {
        res.converged = true;
        break;
      }
      bool drops = t == t_max;
      double old_away = gl[away];
      pp = (1.0 + t) * (1.0 + t) * pp - 2.0 * t * (1.0 + t) * old_away + t * t * gram(away, away);
      for (std::size_t i = 0; i < n; ++i) {
        res.weights[i] *= (1.0 + t);
        gl[i] = (1.0 + t) * gl[i] - t * gram(i, away);
      }
      res.weights[away] -= t;
      if (drops || res.weights[away] < 1e-15) res.weights[away] = 0.0;
    }
  }

  // Report from an exact recomputation; the incremental state drifts slightly.
  double sum = 0.0;
  for (double w : res.weights) sum += w;
  if (sum > 0.0)
    for (double& w : res.weights) w /= sum;
  long double pp_exact = 0.0L;
  std::vector<double> gl_exact(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    long double acc = 0.0L;
    for (std::size_t j = 0; j < n; ++j) acc += static_cast<long double>(gram(i, j)) * res.weights[j];
    gl_exact[i] = static_cast<double>(acc);
    pp_exact += static_cast<long double>(res.weights[i]) * gl_exact[i];
  }
  double min_gl = gl_exact.empty() ? 0.0 : *std::min_element(gl_exact.begin(), gl_exact.end());
  res.norm = std::sqrt(std::max(static_cast<double>(pp_exact), 0.0));
  res.dual_gap = std::max(2.0 * (static_cast<double>(pp_exact) - min_gl), 0.0);
  return res;
}

MarginCertificate solve_margin(const std::vector<TangentFeature>& features, double tol,
                               int max_iterations) {
  if (features.empty()) throw ConfigError("margin needs at least one feature");
  std::size_t n = features.size();
  Matrix gram(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) gram(i, j) = gram(j, i) = features[i].dot(features[j]);

  MinNormResult mn = min_norm_point(gram, tol, max_iterations);

  MarginCertificate cert;
  cert.dual_weights = mn.weights;
  cert.iterations = mn.iterations;
  cert.converged = mn.converged;
  cert.notes.push_back("margin measured on the given sample");

  int depth = features[0].depth;
  std::size_t rows = features[0].out_factor.size();
  std::size_t cols = features[0].in_factor.size();
  cert.w_star.layers.assign(depth, Matrix());

  if (mn.norm <= tol) {
    cert.gamma = 0.0;
    cert.dual_gap = mn.dual_gap;
    cert.w_star.layers[depth - 1] = Matrix(rows, cols);
    cert.notes.push_back("minimum-norm point is at the origin within tol; the hull is not "
                         "separated from zero");
    return cert;
  }

  cert.gamma = mn.norm;
  cert.dual_gap = mn.dual_gap / (2.0 * mn.norm);
  Matrix w(rows, cols);
  for (std::size_t i = 0; i < n; ++i) {
    double c = mn.weights[i] / mn.norm;
    if (c == 0.0) continue;
    for (std::size_t r = 0; r < rows; ++r) {
      double cr = c * features[i].out_factor[r];
      if (cr == 0.0) continue;
      double* row = w.row(r);
      for (std::size_t j = 0; j < cols; ++j) row[j] += cr * features[i].in_factor[j];
    }
  }
  cert.w_star.layers[depth - 1] = std::move(w);
  return cert;
}

ReferenceModel build_reference(const NetworkParams& init, const MarginCertificate& cert,
                               const LabeledDataset& data, int horizon) {
  if (horizon < 2) throw ConfigError("horizon must be >= 2");
  if (!(cert.gamma > 0.0)) throw ConfigError("reference model needs a positive margin");
  const Matrix& shift = cert.w_star.layers.back();
  const Matrix& last = init.layers.back();
  if (shift.rows() != last.rows() || shift.cols() != last.cols())
    throw ConfigError("margin certificate does not match the network shape");

  ReferenceModel ref;
  ref.shift_norm = 2.0 * std::log(static_cast<double>(horizon)) / cert.gamma;
  ref.linear_margin = ref.shift_norm * cert.gamma;
  ref.params = init;
  Matrix& target = ref.params.layers.back();
  const double* s = shift.data();
  double* t = target.data();
  for (std::size_t i = 0; i < target.size(); ++i) t[i] += ref.shift_norm * s[i];
  for (std::size_t l = 0; l + 1 < cert.w_star.layers.size(); ++l)
    if (!cert.w_star.layers[l].empty())
      throw ConfigError("margin certificate has nonzero blocks below the last layer");

  ref.margins.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    ref.margins.push_back(data.labels[i] * forward(ref.params, data.point(i)));
  return ref;
}

}  // namespace ntklab
