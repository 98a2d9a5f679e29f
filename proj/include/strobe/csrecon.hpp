#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "strobe/error.hpp"
#include "strobe/nnls.hpp"
#include "strobe/random.hpp"
#include "strobe/spectral.hpp"

namespace strobe {

// One-sided wideband frequency grid: bin m sits at m/T, m = 0..bins-1, so the
// grid reaches bins/T and the equivalent full-rate record has 2*bins samples.
struct WidebandGrid {
  double duration_s = 0.0;  // T
  std::size_t bins = 0;     // M

  double resolution() const { return 1.0 / duration_s; }
  double nyquist_rate() const { return 2.0 * static_cast<double>(bins) / duration_s; }
  double frequency(std::size_t m) const { return static_cast<double>(m) / duration_s; }
  std::size_t bin_of(double f) const { return static_cast<std::size_t>(std::llround(f * duration_s)); }
  std::size_t full_rate_samples() const { return 2 * bins; }

  static WidebandGrid covering(double duration_s, double max_frequency_hz) {
    detail::require(duration_s > 0.0 && max_frequency_hz > 0.0, "wideband grid: duration and max frequency must be > 0");
    return {duration_s, static_cast<std::size_t>(std::ceil(max_frequency_hz * duration_s)) + 1};
  }

  bool operator==(const WidebandGrid& o) const { return duration_s == o.duration_s && bins == o.bins; }
};

// Support restricted to the listed half-open bin ranges, clipped and merged.
inline std::vector<std::size_t> support_columns(const std::vector<BinRange>& support, std::size_t bins) {
  std::set<std::size_t> cols;
  for (const auto& r : support) {
    detail::require(r.begin < r.end && r.end <= bins, "support range must lie within [0, M)");
    for (std::size_t m = r.begin; m < r.end; ++m) cols.insert(m);
  }
  return {cols.begin(), cols.end()};
}

inline std::vector<BinRange> support_from_bands(const WidebandGrid& grid, std::span<const std::pair<double, double>> bands_hz) {
  std::vector<BinRange> out;
  for (const auto& [lo, hi] : bands_hz) {
    detail::require(lo >= 0.0 && hi > lo, "support band must satisfy 0 <= low < high");
    const auto b = static_cast<std::size_t>(std::ceil(lo * grid.duration_s));
    const auto e = std::min(grid.bins, static_cast<std::size_t>(std::floor(hi * grid.duration_s)) + 1);
    detail::require(b < e, "support band is empty on the wideband grid");
    out.push_back({b, e});
  }
  return out;
}

// Maps wideband power X (length M) to the one-sided, length-normalised power
// P_n = |y^_n|^2 / N_i of a record of N_i samples at rate f_s: P = Phi X.
struct SamplingMatrix {
  std::size_t rows = 0;            // floor(N_i/2) + 1
  std::size_t cols = 0;            // M
  SparseMatrix entries;            // rows x cols, zero outside the support
  double source_rate_hz = 0.0;     // f_s^(i)
  double source_duration_s = 0.0;  // T_i = N_i / f_s^(i)
  std::size_t record_length = 0;   // N_i
  double scale = 0.0;              // N_i / (2M)
  WidebandGrid grid;
  std::vector<BinRange> support;
};

// Continuous folded position (in record bins, within [0, N_i/2]) of wideband bin m.
inline double folded_position(const SamplingMatrix& phi, std::size_t m) {
  const long double n = static_cast<long double>(phi.record_length);
  const long double x = static_cast<long double>(m) * n / (static_cast<long double>(phi.source_rate_hz) * phi.grid.duration_s);
  long double r = std::fmod(x, n);
  if (r > n / 2) r = n - r;
  return static_cast<double>(r);
}

// A wideband tone at m/T lands at fractional record bin x = m N_i/(f_s T).
// Its power is split linearly between the two neighbouring bins (weights
// 1 - frac and frac), then the negative-frequency half is folded onto the
// one-sided grid. T_i may differ slightly from T; the fractional position
// absorbs the mismatch.
inline SamplingMatrix build_sampling_matrix(double rate_hz, double record_duration_s, const WidebandGrid& grid,
                                            const std::vector<BinRange>& support) {
  detail::require(rate_hz > 0.0 && record_duration_s > 0.0, "sampling matrix: rate and duration must be > 0");
  detail::require(rate_hz * record_duration_s >= 2.0, "sampling matrix: f_s * T_i must be >= 2");
  detail::require(grid.duration_s > 0.0 && grid.bins >= 1, "sampling matrix: empty wideband grid");
  const auto n = static_cast<std::size_t>(std::llround(rate_hz * record_duration_s));
  const double t_i = static_cast<double>(n) / rate_hz;
  // Edge rule: the record and wideband resolutions must agree to 5%; beyond
  // that one wideband bin would straddle several record bins and the two-point
  // interpolation stops describing the leakage.
  if (std::fabs(t_i / grid.duration_s - 1.0) > 0.05) {
    throw ConfigError("sampling matrix: record duration " + std::to_string(t_i) + " s differs from the wideband T = " +
                      std::to_string(grid.duration_s) + " s by more than 5%");
  }
  const auto cols = support_columns(support, grid.bins);

  SamplingMatrix phi;
  phi.rows = n / 2 + 1;
  phi.cols = grid.bins;
  phi.source_rate_hz = rate_hz;
  phi.source_duration_s = t_i;
  phi.record_length = n;
  phi.scale = static_cast<double>(n) / static_cast<double>(grid.full_rate_samples());
  phi.grid = grid;
  phi.support = support;

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * cols.size());
  const long double nn = static_cast<long double>(n);
  const long double step = nn / (static_cast<long double>(rate_hz) * grid.duration_s);
  auto fold = [n](std::size_t b) { return std::min(b, n - b); };
  for (std::size_t m : cols) {
    const long double x = std::fmod(static_cast<long double>(m) * step, nn);
    const auto b0 = static_cast<std::size_t>(std::floor(x)) % n;
    const double frac = static_cast<double>(x - std::floor(x));
    const std::size_t b1 = (b0 + 1) % n;
    const auto c = static_cast<int>(m);
    triplets.emplace_back(static_cast<int>(fold(b0)), c, (1.0 - frac) * phi.scale);
    if (frac > 0.0) triplets.emplace_back(static_cast<int>(fold(b1)), c, frac * phi.scale);
  }
  phi.entries.resize(static_cast<Eigen::Index>(phi.rows), static_cast<Eigen::Index>(phi.cols));
  phi.entries.setFromTriplets(triplets.begin(), triplets.end());  // duplicates (DC/Nyquist folds) are summed
  phi.entries.makeCompressed();
  return phi;
}

// Pairs of the given wideband columns that share a record bin in `phi`.
inline std::vector<std::pair<std::size_t, std::size_t>> folding_overlaps(const SamplingMatrix& phi,
                                                                         std::span<const std::size_t> columns) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < columns.size(); ++a) {
    for (std::size_t b = a + 1; b < columns.size(); ++b) {
      bool shared = false;
      for (SparseMatrix::InnerIterator ia(phi.entries, static_cast<Eigen::Index>(columns[a])); ia && !shared; ++ia) {
        for (SparseMatrix::InnerIterator ib(phi.entries, static_cast<Eigen::Index>(columns[b])); ib; ++ib) {
          if (ia.row() == ib.row()) {
            shared = true;
            break;
          }
        }
      }
      if (shared) out.emplace_back(columns[a], columns[b]);
    }
  }
  return out;
}

namespace detail {

inline void check_common_grid(std::span<const SamplingMatrix> mats) {
  detail::require(!mats.empty(), "need at least one sampling matrix");
  for (const auto& m : mats) {
    detail::require(m.grid == mats.front().grid, "sampling matrices use different wideband grids");
  }
}

// Vertically stacked matrices restricted to `cols` (in that order).
inline SparseMatrix stack_columns(std::span<const SamplingMatrix> mats, const std::vector<std::size_t>& cols) {
  std::size_t total_rows = 0;
  for (const auto& m : mats) total_rows += m.rows;
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    std::size_t offset = 0;
    for (const auto& m : mats) {
      for (SparseMatrix::InnerIterator it(m.entries, static_cast<Eigen::Index>(cols[c])); it; ++it) {
        t.emplace_back(static_cast<int>(offset + static_cast<std::size_t>(it.row())), static_cast<int>(c), it.value());
      }
      offset += m.rows;
    }
  }
  SparseMatrix s(static_cast<Eigen::Index>(total_rows), static_cast<Eigen::Index>(cols.size()));
  s.setFromTriplets(t.begin(), t.end());
  s.makeCompressed();
  return s;
}

inline std::vector<std::size_t> union_support(std::span<const SamplingMatrix> mats) {
  std::set<std::size_t> cols;
  for (const auto& m : mats) {
    for (std::size_t c : support_columns(m.support, m.cols)) cols.insert(c);
  }
  return {cols.begin(), cols.end()};
}

}  // namespace detail

struct CoherenceReport {
  double mu = 0.0;
  std::size_t column_a = 0;  // wideband bins attaining mu
  std::size_t column_b = 0;
  std::size_t zero_columns = 0;  // support columns with no entries, left out
};

// Mutual coherence of the stacked matrices over the support columns.
inline CoherenceReport coherence(std::span<const SamplingMatrix> mats) {
  detail::require(mats.size() >= 2, "coherence: need at least two sampling matrices");
  detail::check_common_grid(mats);
  const auto cols = detail::union_support(mats);
  SparseMatrix s = detail::stack_columns(mats, cols);
  CoherenceReport rep;
  std::vector<char> zero(cols.size(), 0);
  for (Eigen::Index c = 0; c < s.cols(); ++c) {
    const double norm = s.col(c).norm();
    if (norm == 0.0) {
      zero[static_cast<std::size_t>(c)] = 1;
      ++rep.zero_columns;
    } else {
      s.col(c) /= norm;
    }
  }
  const Eigen::SparseMatrix<double, Eigen::RowMajor> rows = s;
  std::vector<double> acc(cols.size(), 0.0);
  std::vector<std::size_t> touched;
  for (Eigen::Index c = 0; c < s.cols(); ++c) {
    if (zero[static_cast<std::size_t>(c)]) continue;
    for (SparseMatrix::InnerIterator it(s, c); it; ++it) {
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator jt(rows, it.row()); jt; ++jt) {
        if (jt.col() <= c) continue;
        const auto k = static_cast<std::size_t>(jt.col());
        if (acc[k] == 0.0) touched.push_back(k);
        acc[k] += it.value() * jt.value();
      }
    }
    for (std::size_t k : touched) {
      const double v = std::fabs(acc[k]);
      if (v > rep.mu) {
        rep.mu = std::min(v, 1.0);
        rep.column_a = cols[static_cast<std::size_t>(c)];
        rep.column_b = cols[k];
      }
      acc[k] = 0.0;
    }
    touched.clear();
  }
  return rep;
}

struct WidebandSpectrum {
  std::vector<double> components;  // X_m >= 0, length M
  WidebandGrid grid;
  std::vector<BinRange> support;
  double residual_norm = 0.0;
  std::size_t iterations = 0;
  double kkt_violation = 0.0;

  double nyquist_rate() const { return grid.nyquist_rate(); }
  double grid_resolution() const { return grid.resolution(); }
  double frequency(std::size_t m) const { return grid.frequency(m); }
};

struct ReconstructionOptions {
  NnlsOptions nnls;
  // When >= 0, each normalised spectrum has its robust noise floor (median
  // plus this many robust standard deviations) subtracted and is clipped at 0.
  double floor_sigmas = -1.0;
};

// Length-normalised one-sided power P_n = Y_n / N, optionally floor-conditioned.
inline std::vector<double> normalized_power(const PowerSpectrum& spec, double floor_sigmas = -1.0) {
  std::vector<double> p(spec.power.size());
  for (std::size_t j = 0; j < p.size(); ++j) p[j] = spec.power[j] / static_cast<double>(spec.num_samples);
  if (floor_sigmas >= 0.0 && p.size() > 4) {
    std::vector<double> body(p.begin() + 1, p.end() - 1);
    auto median_of = [](std::vector<double> v) {
      const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
      std::nth_element(v.begin(), mid, v.end());
      return *mid;
    };
    const double med = median_of(body);
    for (auto& v : body) v = std::fabs(v - med);
    const double sigma = 1.4826 * median_of(body);
    const double cut = med + floor_sigmas * sigma;
    for (auto& v : p) v = std::max(0.0, v - cut);
  }
  return p;
}

// With `exclude_dc` the first row of every record is removed from the
// system: in measured spectra it holds the squared mean count, not signal.
inline WidebandSpectrum reconstruct_from_power(std::span<const std::vector<double>> powers,
                                               std::span<const SamplingMatrix> mats, const NnlsOptions& nnls = {},
                                               bool exclude_dc = false) {
  detail::require(powers.size() == mats.size(), "reconstruct: number of spectra and matrices differ");
  detail::check_common_grid(mats);
  std::size_t total_rows = 0;
  for (std::size_t i = 0; i < mats.size(); ++i) {
    if (powers[i].size() != mats[i].rows) {
      throw ConfigError("reconstruct: spectrum " + std::to_string(i) + " has " + std::to_string(powers[i].size()) +
                        " bins but its sampling matrix has " + std::to_string(mats[i].rows) + " rows");
    }
    total_rows += mats[i].rows;
  }
  detail::require(total_rows >= 1, "reconstruct: no rows");
  const auto cols = detail::union_support(mats);
  SparseMatrix a = detail::stack_columns(mats, cols);
  Eigen::VectorXd b(static_cast<Eigen::Index>(total_rows));
  std::vector<char> dc_row(total_rows, 0);
  std::size_t off = 0;
  for (const auto& p : powers) {
    dc_row[off] = 1;
    for (double v : p) b[static_cast<Eigen::Index>(off++)] = v;
  }
  if (exclude_dc) {
    a.prune([&](Eigen::Index row, Eigen::Index, double) { return dc_row[static_cast<std::size_t>(row)] == 0; });
    for (std::size_t r = 0; r < total_rows; ++r) {
      if (dc_row[r]) b[static_cast<Eigen::Index>(r)] = 0.0;
    }
  }
  // Solve in unit-norm column coordinates and map back. The feasible set and
  // the optimum are unchanged, but the active-set method then enters columns
  // by normalised correlation. When the interpolated model admits several
  // exact fits (a convex pair of neighbouring columns mimicking a third), this
  // makes it pick the sparsest, best-aligned one.
  SparseMatrix an = a;
  Eigen::VectorXd norms(an.cols());
  for (Eigen::Index c = 0; c < an.cols(); ++c) {
    norms[c] = an.col(c).norm();
    if (norms[c] > 0.0) an.col(c) /= norms[c];
  }
  NnlsResult r = solve_nnls(an, b, nnls);
  for (Eigen::Index c = 0; c < an.cols(); ++c) {
    if (norms[c] > 0.0) r.x[c] /= norms[c];
  }
  WidebandSpectrum w;
  w.grid = mats.front().grid;
  w.support = mats.front().support;
  w.components.assign(w.grid.bins, 0.0);
  for (std::size_t c = 0; c < cols.size(); ++c) w.components[cols[c]] = r.x[static_cast<Eigen::Index>(c)];
  w.residual_norm = r.residual_norm;
  w.iterations = r.iterations;
  w.kkt_violation = r.kkt_violation;
  return w;
}

inline WidebandSpectrum reconstruct(std::span<const PowerSpectrum> spectra, std::span<const SamplingMatrix> mats,
                                    const ReconstructionOptions& options = {}) {
  detail::require(spectra.size() == mats.size(), "reconstruct: number of spectra and matrices differ");
  std::vector<std::vector<double>> powers;
  for (std::size_t i = 0; i < spectra.size(); ++i) {
    const auto& s = spectra[i];
    const auto& m = mats[i];
    const bool same_grid = s.padding == 1 && s.num_samples == m.record_length &&
                           std::fabs(s.sample_rate_hz - m.source_rate_hz) <= 1e-9 * m.source_rate_hz;
    if (!same_grid) {
      throw ConfigError("reconstruct: spectrum " + std::to_string(i) + " (N=" + std::to_string(s.num_samples) +
                        ", f_s=" + std::to_string(s.sample_rate_hz) + " Hz) does not match its sampling matrix (N=" +
                        std::to_string(m.record_length) + ", f_s=" + std::to_string(m.source_rate_hz) + " Hz)");
    }
    powers.push_back(normalized_power(s, options.floor_sigmas));
  }
  return reconstruct_from_power(powers, mats, options.nnls, true);
}

// Local maxima of X above `relative_threshold` * max(X), strongest first.
inline std::vector<std::size_t> wideband_peaks(const WidebandSpectrum& w, double relative_threshold) {
  const auto& x = w.components;
  const double top = x.empty() ? 0.0 : *std::max_element(x.begin(), x.end());
  std::vector<std::size_t> peaks;
  for (std::size_t m = 0; m < x.size(); ++m) {
    if (x[m] <= relative_threshold * top || x[m] == 0.0) continue;
    const double left = m > 0 ? x[m - 1] : 0.0;
    const double right = m + 1 < x.size() ? x[m + 1] : 0.0;
    if (x[m] >= left && x[m] > right) peaks.push_back(m);
  }
  std::sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
  return peaks;
}

// ---- rate design ----------------------------------------------------------

struct RateDesignOptions {
  double base_period_s = 0.0;       // t_a + t_r + minimal t_d
  double max_extra_delay_s = 0.0;   // extra delays drawn uniformly from [0, this)
  std::size_t records = 2;          // p
  std::size_t candidates = 1;       // random designs tried; the least coherent is kept
  std::uint64_t seed = 0;
};

struct RateDesign {
  std::vector<double> rates_hz;
  double coherence = 1.0;
};

inline std::vector<SamplingMatrix> matrices_for_rates(std::span<const double> rates_hz, const WidebandGrid& grid,
                                                      const std::vector<BinRange>& support) {
  std::vector<SamplingMatrix> mats;
  for (double r : rates_hz) {
    const double t_i = std::round(r * grid.duration_s) / r;
    mats.push_back(build_sampling_matrix(r, t_i, grid, support));
  }
  return mats;
}

// Random extra delays (seeded) -> rates; reports the coherence of each
// candidate and keeps the lowest.
inline RateDesign design_rates(const RateDesignOptions& opt, const WidebandGrid& grid, const std::vector<BinRange>& support) {
  detail::require(opt.base_period_s > 0.0 && opt.max_extra_delay_s >= 0.0, "rate design: periods must be positive");
  detail::require(opt.records >= 1 && opt.candidates >= 1, "rate design: need at least one record and candidate");
  Rng rng = stream_rng(opt.seed, streams::kDesign);
  std::uniform_real_distribution<double> extra(0.0, opt.max_extra_delay_s);
  RateDesign best;
  best.coherence = 2.0;
  for (std::size_t c = 0; c < opt.candidates; ++c) {
    RateDesign d;
    for (std::size_t i = 0; i < opt.records; ++i) d.rates_hz.push_back(1.0 / (opt.base_period_s + extra(rng)));
    if (opt.records >= 2) {
      const auto mats = matrices_for_rates(d.rates_hz, grid, support);
      d.coherence = coherence(mats).mu;
    }
    if (d.coherence < best.coherence) best = d;
  }
  return best;
}

// ---- recovery phase diagram ------------------------------------------------

struct RecoveryStudyConfig {
  WidebandGrid grid{1.0, 4096};
  std::vector<std::size_t> sparsities{1, 2, 3};
  std::vector<std::size_t> record_counts{1, 2, 4, 6};
  std::size_t trials = 200;
  std::uint64_t seed = 0;
  RateDesignOptions design{1.0 / 250.0, 1.0 / 150.0 - 1.0 / 250.0, 0, 16, 0};
  double support_threshold = 1e-6;  // relative to the largest recovered component
  double noise_level = 0.0;         // additive Gaussian noise, relative to the mean nonzero row value
};

struct RecoveryCell {
  std::size_t sparsity = 0;
  std::size_t records = 0;
  std::size_t trials = 0;
  std::size_t successes = 0;
  double mean_coherence = 0.0;
  double success_rate() const { return trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0; }
};

// Monte Carlo success rate of exact support recovery. Each trial draws a
// fresh rate design and s tones with random positive powers on the grid
// (excluding DC and the last bin), builds noiseless (or noisy) folded
// spectra Y = Phi X and runs NNLS.
inline std::vector<RecoveryCell> recovery_phase_diagram(const RecoveryStudyConfig& cfg) {
  detail::require(cfg.grid.bins >= 8 && cfg.grid.bins <= 4096, "recovery study: use 8 <= M <= 4096");
  const std::vector<BinRange> support{{1, cfg.grid.bins - 1}};
  std::vector<RecoveryCell> cells;
  for (std::size_t s : cfg.sparsities) {
    for (std::size_t p : cfg.record_counts) {
      RecoveryCell cell{s, p, cfg.trials, 0, 0.0};
      Rng rng = stream_rng(cfg.seed, splitmix64(s * 7919 + p));
      std::uniform_int_distribution<std::size_t> pick(1, cfg.grid.bins - 2);
      std::uniform_real_distribution<double> power(1.0, 2.0);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (std::size_t t = 0; t < cfg.trials; ++t) {
        RateDesignOptions d = cfg.design;
        d.records = p;
        d.seed = rng();
        const RateDesign design = design_rates(d, cfg.grid, support);
        cell.mean_coherence += p >= 2 ? design.coherence : 1.0;
        const auto mats = matrices_for_rates(design.rates_hz, cfg.grid, support);
        std::set<std::size_t> truth;
        while (truth.size() < s) truth.insert(pick(rng));
        Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cfg.grid.bins));
        for (std::size_t m : truth) x[static_cast<Eigen::Index>(m)] = power(rng);
        std::vector<std::vector<double>> ys;
        for (const auto& m : mats) {
          const Eigen::VectorXd y = m.entries * x;
          std::vector<double> v(y.data(), y.data() + y.size());
          if (cfg.noise_level > 0.0) {
            double mean_nz = 0.0;
            std::size_t nz = 0;
            for (double e : v) {
              if (e > 0.0) {
                mean_nz += e;
                ++nz;
              }
            }
            mean_nz = nz ? mean_nz / static_cast<double>(nz) : 1.0;
            for (double& e : v) e = std::max(0.0, e + cfg.noise_level * mean_nz * normal(rng));
          }
          ys.push_back(std::move(v));
        }
        const WidebandSpectrum w = reconstruct_from_power(ys, mats);
        const double top = *std::max_element(w.components.begin(), w.components.end());
        std::set<std::size_t> found;
        for (std::size_t m = 0; m < w.components.size(); ++m) {
          if (w.components[m] > cfg.support_threshold * top) found.insert(m);
        }
        if (found == truth) ++cell.successes;
      }
      cell.mean_coherence /= static_cast<double>(cfg.trials);
      cells.push_back(cell);
    }
  }
  return cells;
}

}  // namespace strobe
