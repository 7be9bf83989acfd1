#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "peeg/dsp.hpp"
#include "peeg/error.hpp"

namespace peeg::dsp {
namespace {

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

// FFTW's planner is not thread-safe; executing a finished plan on fresh
// buffers is. Plans are cached per length for the life of the process.
fftw_plan plan_for(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, fftw_plan> plans;
  std::lock_guard lock(mu);
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  FftwBuffer<double> in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
  FftwBuffer<fftw_complex> out(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1))));
  fftw_plan p = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
  plans.emplace(n, p);
  return p;
}

}  // namespace

Spectrum welch_psd(std::span<const double> x, double fs, std::size_t window_len, double overlap) {
  if (!(overlap >= 0.0 && overlap < 1.0)) {
    throw Error(Errc::InvalidFilter, "overlap must be in [0, 1)");
  }
  if (window_len < 2 || x.size() < window_len) {
    throw Error(Errc::TooShort, std::to_string(x.size()) + " samples for a " + std::to_string(window_len) +
                                    "-sample window");
  }
  if (!(fs > 0.0)) throw Error(Errc::InvalidFilter, "fs must be positive");

  const std::size_t n = window_len;
  const std::size_t step = std::max<std::size_t>(1, n - static_cast<std::size_t>(std::floor(n * overlap)));
  const std::size_t bins = n / 2 + 1;

  std::vector<double> window(n);
  double window_power = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    window_power += window[i] * window[i];
  }

  FftwBuffer<double> in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
  FftwBuffer<fftw_complex> out(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
  fftw_plan plan = plan_for(n);

  Spectrum s;
  s.fs = fs;
  s.window_len = n;
  s.overlap = overlap;
  s.psd.assign(bins, 0.0);
  for (std::size_t start = 0; start + n <= x.size(); start += step) {
    for (std::size_t i = 0; i < n; ++i) in[i] = x[start + i] * window[i];
    fftw_execute_dft_r2c(plan, in.get(), out.get());
    for (std::size_t k = 0; k < bins; ++k) s.psd[k] += out[k][0] * out[k][0] + out[k][1] * out[k][1];
    ++s.segments;
  }

  const double scale = 1.0 / (fs * window_power * static_cast<double>(s.segments));
  s.freqs.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    const bool edge = k == 0 || (n % 2 == 0 && k == bins - 1);
    s.psd[k] *= scale * (edge ? 1.0 : 2.0);
    s.freqs[k] = static_cast<double>(k) * fs / static_cast<double>(n);
  }
  return s;
}

double bandpower(const Spectrum& s, double low_hz, double high_hz) {
  const double nyquist = s.fs / 2.0;
  if (!(low_hz >= 0.0 && low_hz < high_hz && high_hz <= nyquist + 1e-9)) {
    throw Error(Errc::BadBand, "band [" + std::to_string(low_hz) + ", " + std::to_string(high_hz) +
                                   "] Hz outside [0, fs/2] or empty");
  }
  if (s.freqs.size() < 2) return 0.0;
  const double df = s.freqs[1] - s.freqs[0];
  auto psd_at = [&](double f) {
    const double pos = f / df;
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(pos), s.freqs.size() - 2);
    const double frac = pos - static_cast<double>(k);
    return s.psd[k] * (1.0 - frac) + s.psd[k + 1] * frac;
  };
  // Knots: the band edges plus every bin strictly inside.
  std::vector<std::pair<double, double>> knots;
  knots.emplace_back(low_hz, psd_at(low_hz));
  for (std::size_t k = 0; k < s.freqs.size(); ++k) {
    if (s.freqs[k] > low_hz && s.freqs[k] < high_hz) knots.emplace_back(s.freqs[k], s.psd[k]);
  }
  knots.emplace_back(high_hz, psd_at(std::min(high_hz, s.freqs.back())));
  double area = 0.0;
  for (std::size_t i = 1; i < knots.size(); ++i) {
    area += 0.5 * (knots[i].second + knots[i - 1].second) * (knots[i].first - knots[i - 1].first);
  }
  return area;
}

}  // namespace peeg::dsp
