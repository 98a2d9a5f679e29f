#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "strobe/error.hpp"
#include "strobe/spectral.hpp"

namespace strobe {

// h(f) = A gamma^2 / ((f - f_c)^2 + gamma^2) + offset; gamma is the half width.
struct LorentzianParams {
  double center_hz = 0.0;
  double width_hz = 0.0;
  double amplitude = 0.0;
  double offset = 0.0;
};

inline double lorentzian(double f, const LorentzianParams& p) {
  const double d = f - p.center_hz;
  const double g2 = p.width_hz * p.width_hz;
  return p.amplitude * g2 / (d * d + g2) + p.offset;
}

// d h / d (f_c, gamma, A, offset).
inline Eigen::Vector4d lorentzian_gradient(double f, const LorentzianParams& p) {
  const double d = f - p.center_hz;
  const double g = p.width_hz;
  const double den = d * d + g * g;
  const double den2 = den * den;
  return {2.0 * p.amplitude * g * g * d / den2, 2.0 * p.amplitude * g * d * d / den2, g * g / den, 1.0};
}

struct LorentzianFit {
  LorentzianParams params;
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();  // order: f_c, gamma, A, offset
  double sigma_center_hz = 0.0;
  double sigma_width_hz = 0.0;
  double residual_variance = 0.0;  // sigma_res^2 = RSS/(n - 2)
  double sigma_res = 0.0;
  int iterations = 0;
  std::size_t points = 0;
  // False when the iteration cap was reached while the cost was still
  // creeping down (typically a line narrower than one bin drifting towards
  // zero width); the parameters are then the best point found.
  bool converged = true;
};

struct FitOptions {
  std::optional<LorentzianParams> init;
  int max_iterations = 500;
  double step_tolerance = 1e-12;  // relative parameter change at convergence
};

namespace detail {

struct LmOutcome {
  Eigen::Vector4d beta;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline double lm_cost(const std::vector<double>& x, const std::vector<double>& y, const Eigen::Vector4d& b) {
  const LorentzianParams p{b[0], b[1], b[2], b[3]};
  double c = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - lorentzian(x[i], p);
    c += r * r;
  }
  return c;
}

// Levenberg-Marquardt with Marquardt's diagonal scaling, on data already
// mapped to O(1) coordinates.
inline LmOutcome levenberg_marquardt(const std::vector<double>& x, const std::vector<double>& y, Eigen::Vector4d beta,
                                     const FitOptions& opt) {
  LmOutcome out;
  double cost = lm_cost(x, y, beta);
  double lambda = 1e-3;
  int stalled = 0;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    out.iterations = it;
    const LorentzianParams p{beta[0], beta[1], beta[2], beta[3]};
    Eigen::Matrix4d H = Eigen::Matrix4d::Zero();
    Eigen::Vector4d g = Eigen::Vector4d::Zero();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const Eigen::Vector4d J = lorentzian_gradient(x[i], p);
      const double r = y[i] - lorentzian(x[i], p);
      H.noalias() += J * J.transpose();
      g += J * r;
    }
    bool improved = false;
    while (lambda < 1e20) {
      Eigen::Matrix4d A = H;
      for (int k = 0; k < 4; ++k) A(k, k) += lambda * std::max(H(k, k), 1e-12);
      const Eigen::Vector4d step = A.ldlt().solve(g);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const Eigen::Vector4d trial = beta + step;
      const double trial_cost = lm_cost(x, y, trial);
      if (trial_cost < cost) {
        const double rel = (step.array().abs() / (beta.array().abs() + 1e-12)).maxCoeff();
        beta = trial;
        const double drop = cost - trial_cost;
        cost = trial_cost;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
        stalled = drop <= 1e-12 * cost ? stalled + 1 : 0;
        if (rel < opt.step_tolerance || stalled >= 3 || cost == 0.0) {
          out.converged = true;
        }
        break;
      }
      lambda *= 4.0;
    }
    if (!improved) out.converged = true;  // no descent direction left at machine precision
    if (out.converged) break;
  }
  out.beta = beta;
  out.cost = cost;
  return out;
}

// Initial guess from a boxcar-smoothed copy: peak position, half-power width.
inline Eigen::Vector4d initial_guess(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = y.size();
  const std::size_t half = std::max<std::size_t>(1, n / 15) / 2;
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    double sum = 0.0;
    for (std::size_t k = lo; k < hi; ++k) sum += y[k];
    s[i] = sum / static_cast<double>(hi - lo);
  }
  const auto peak = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
  const double floor = *std::min_element(s.begin(), s.end());
  const double height = s[peak] - floor;
  const double level = floor + 0.5 * height;
  std::size_t left = peak;
  while (left > 0 && s[left] > level) --left;
  std::size_t right = peak;
  while (right + 1 < n && s[right] > level) ++right;
  const double spacing = (x.back() - x.front()) / static_cast<double>(n - 1);
  const double width = std::max(0.5 * (x[right] - x[left]), 0.5 * spacing);
  return {x[peak], width, height, floor};
}

}  // namespace detail

// Fits h(f) to (f_i, v_i). Coordinates are centred and scaled internally; the
// reported covariance is (J^T J)^{-1} sigma_res^2 in physical units.
inline LorentzianFit fit_lorentzian(std::span<const double> freqs, std::span<const double> values,
                                    const FitOptions& options = {}) {
  detail::require(freqs.size() == values.size(), "fit_lorentzian: frequency and value lengths differ");
  detail::require(freqs.size() >= 5, "fit_lorentzian: window needs at least 5 points");
  const auto [vmin, vmax] = std::minmax_element(values.begin(), values.end());
  if (*vmax == *vmin) throw NumericalError("fit_lorentzian: degenerate window, all values equal");

  const std::size_t n = freqs.size();
  const double f0 = 0.5 * (freqs.front() + freqs.back());
  const double fs = 0.5 * std::fabs(freqs.back() - freqs.front());
  const double ys = std::max(std::fabs(*vmax), std::fabs(*vmin));
  detail::require(fs > 0.0, "fit_lorentzian: window has zero frequency span");
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = (freqs[i] - f0) / fs;
    y[i] = values[i] / ys;
  }

  std::vector<Eigen::Vector4d> starts;
  if (options.init) {
    const auto& p = *options.init;
    starts.push_back({(p.center_hz - f0) / fs, p.width_hz / fs, p.amplitude / ys, p.offset / ys});
  } else {
    const Eigen::Vector4d g = detail::initial_guess(x, y);
    for (double factor : {1.0, 3.0, 1.0 / 3.0}) {
      Eigen::Vector4d s = g;
      s[1] *= factor;
      starts.push_back(s);
    }
  }
  detail::LmOutcome best;
  best.cost = std::numeric_limits<double>::infinity();
  int total_iterations = 0;
  for (const auto& s : starts) {
    const auto r = detail::levenberg_marquardt(x, y, s, options);
    total_iterations += r.iterations;
    if (r.converged && std::isfinite(r.cost) && r.cost < best.cost) best = r;
  }
  bool converged = std::isfinite(best.cost);
  if (!converged) {
    for (const auto& s : starts) {
      const auto r = detail::levenberg_marquardt(x, y, s, options);
      if (std::isfinite(r.cost) && r.beta.allFinite() && r.cost < best.cost) best = r;
    }
  }
  if (!std::isfinite(best.cost)) {
    throw NumericalError("fit_lorentzian: no start converged within " + std::to_string(options.max_iterations) +
                         " iterations (" + std::to_string(total_iterations) + " iterations in total)");
  }

  LorentzianFit fit;
  const Eigen::Vector4d& b = best.beta;
  fit.params = {f0 + fs * b[0], fs * std::fabs(b[1]), ys * b[2], ys * b[3]};
  fit.iterations = best.iterations;
  fit.points = n;
  fit.converged = converged;
  const LorentzianParams pn{b[0], std::fabs(b[1]), b[2], b[3]};
  Eigen::Matrix4d H = Eigen::Matrix4d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector4d J = lorentzian_gradient(x[i], pn);
    H.noalias() += J * J.transpose();
  }
  const double res_var_scaled = best.cost / static_cast<double>(n - 2);
  const Eigen::Matrix4d cov_scaled = H.completeOrthogonalDecomposition().pseudoInverse() * res_var_scaled;
  const Eigen::Vector4d unit(fs, fs, ys, ys);
  fit.covariance = unit.asDiagonal() * cov_scaled * unit.asDiagonal();
  fit.residual_variance = res_var_scaled * ys * ys;
  fit.sigma_res = std::sqrt(fit.residual_variance);
  fit.sigma_center_hz = std::sqrt(std::max(0.0, fit.covariance(0, 0)));
  fit.sigma_width_hz = std::sqrt(std::max(0.0, fit.covariance(1, 1)));
  return fit;
}

inline LorentzianFit fit_lorentzian(const PowerSpectrum& spec, BinRange window, const FitOptions& options = {}) {
  window.end = std::min(window.end, spec.size());
  detail::require(window.size() >= 5, "fit_lorentzian: window needs at least 5 bins");
  std::vector<double> f(window.size()), v(window.size());
  for (std::size_t i = 0; i < window.size(); ++i) {
    f[i] = spec.frequency(static_cast<double>(window.begin + i));
    v[i] = spec.power[window.begin + i];
  }
  return fit_lorentzian(f, v, options);
}

// Bins within `half_width_hz` of `center_hz`, clipped to exclude DC and the last bin.
inline BinRange window_around(const PowerSpectrum& spec, double center_hz, double half_width_hz) {
  const double lo = std::ceil((center_hz - half_width_hz) / spec.bin_width_hz);
  const double hi = std::floor((center_hz + half_width_hz) / spec.bin_width_hz);
  const double last = static_cast<double>(spec.size()) - 2.0;
  const auto b = static_cast<std::size_t>(std::clamp(lo, 1.0, last));
  const auto e = static_cast<std::size_t>(std::clamp(hi, 1.0, last)) + 1;
  return {b, std::max(b, e)};
}

}  // namespace strobe
