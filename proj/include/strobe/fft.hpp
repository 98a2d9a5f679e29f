#pragma once

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

#include "strobe/error.hpp"

namespace strobe {
namespace detail {

// FFTW's planner is not thread-safe; plan creation and destruction are
// serialised, execution of distinct plans is not.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealDft {
 public:
  explicit RealDft(std::size_t n) : n_(n) {
    in_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
    out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
    if (!in_ || !out_) {
      release();
      throw std::bad_alloc();
    }
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  RealDft(const RealDft&) = delete;
  RealDft& operator=(const RealDft&) = delete;
  ~RealDft() { release(); }

  // |X_j|^2 for j = 0..n/2 of the zero-padded input.
  std::vector<double> power(std::span<const double> x) {
    std::fill(in_, in_ + n_, 0.0);
    std::copy(x.begin(), x.end(), in_);
    fftw_execute(plan_);
    std::vector<double> p(n_ / 2 + 1);
    for (std::size_t j = 0; j < p.size(); ++j) p[j] = out_[j][0] * out_[j][0] + out_[j][1] * out_[j][1];
    return p;
  }

 private:
  void release() {
    std::lock_guard lock(fftw_planner_mutex());
    if (plan_) fftw_destroy_plan(plan_);
    if (in_) fftw_free(in_);
    if (out_) fftw_free(out_);
    plan_ = nullptr;
    in_ = nullptr;
    out_ = nullptr;
  }

  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace detail

// Unnormalised one-sided DFT power |sum_k x_k e^{-2 pi i k j / L}|^2,
// j = 0..floor(L/2), where L = length (>= x.size()) and x is zero-padded.
inline std::vector<double> dft_power(std::span<const double> x, std::size_t length = 0) {
  if (length == 0) length = x.size();
  detail::require(length >= x.size() && length >= 1, "dft_power: transform length must cover the input");
  detail::RealDft dft(length);
  return dft.power(x);
}

}  // namespace strobe
