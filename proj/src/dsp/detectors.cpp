#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "peeg/dsp.hpp"
#include "peeg/error.hpp"

namespace peeg::dsp {
namespace {

void require_length(std::span<const double> x, double fs, double seconds) {
  if (!(fs > 0.0)) throw Error(Errc::InvalidFilter, "fs must be positive");
  if (static_cast<double>(x.size()) < seconds * fs) {
    throw Error(Errc::TooShort, std::to_string(x.size()) + " samples, need at least " +
                                    std::to_string(seconds) + " s");
  }
}

// Band edges above 0.99 * fs/2 are pulled in, with a warning.
FilterSpec band(double low, double high, int order, double fs, std::vector<std::string>& warnings) {
  const double limit = 0.99 * fs / 2.0;
  if (high > limit) {
    warnings.push_back("band edge " + std::to_string(high) + " Hz clamped to " + std::to_string(limit) + " Hz");
    high = limit;
  }
  return {FilterKind::Bandpass, low, high, order, fs};
}

// Centered moving RMS over `width` samples.
std::vector<double> moving_rms(std::span<const double> x, std::size_t width) {
  const std::size_t n = x.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i] * x[i];
  std::vector<double> out(n);
  const std::size_t half = width / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, lo + width);
    out[i] = std::sqrt(std::max(0.0, prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo));
  }
  return out;
}

std::vector<double> moving_mean(std::span<const double> x, std::size_t width) {
  const std::size_t n = x.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  std::vector<double> out(n);
  const std::size_t half = width / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, lo + width);
    out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

std::size_t samples(double seconds, double fs) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(seconds * fs)));
}

}  // namespace

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

double mad(std::span<const double> v, double center) {
  std::vector<double> dev(v.size());
  std::transform(v.begin(), v.end(), dev.begin(), [center](double x) { return std::abs(x - center); });
  return median(std::move(dev));
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

std::string_view to_string(EventType t) noexcept {
  switch (t) {
    case EventType::Blink: return "blink";
    case EventType::Chew: return "chew";
    case EventType::EmgOnset: return "emg_onset";
    case EventType::RPeak: return "r_peak";
  }
  return "unknown";
}

EventList detect_blinks(std::span<const double> x, double fs, const DspConfig& cfg) {
  require_length(x, fs, 1.0);
  EventList out;
  out.kind = EventType::Blink;
  const auto lp = filtfilt(design_filter({FilterKind::Lowpass, 0.0, cfg.blink_lowpass_hz, cfg.blink_order, fs}), x);

  const double base = median(lp);
  const double spread = mad(lp, base);
  const double threshold = base + cfg.blink_k * spread;
  const std::size_t refractory = samples(cfg.blink_refractory_s, fs);

  std::vector<std::size_t> apexes;
  std::vector<double> heights;
  std::size_t i = 0;
  while (i < lp.size()) {
    if (!(lp[i] > threshold)) {
      ++i;
      continue;
    }
    std::size_t apex = i;
    while (i < lp.size() && lp[i] > threshold) {
      if (lp[i] > lp[apex]) apex = i;
      ++i;
    }
    if (!apexes.empty() && apex - apexes.back() < refractory) {
      if (lp[apex] > heights.back()) {
        apexes.back() = apex;
        heights.back() = lp[apex];
      }
      continue;
    }
    apexes.push_back(apex);
    heights.push_back(lp[apex]);
  }
  for (std::size_t k = 0; k < apexes.size(); ++k) {
    out.times.push_back(static_cast<double>(apexes[k]) / fs);
    out.scores.push_back(spread > 0.0 ? (heights[k] - base) / spread : 0.0);
  }
  return out;
}

EventList detect_chews(std::span<const double> x, double fs, const DspConfig& cfg) {
  require_length(x, fs, 1.0);
  EventList out;
  out.kind = EventType::Chew;
  const auto bp = filtfilt(design_filter(band(cfg.chew_low_hz, cfg.chew_high_hz, cfg.chew_order, fs, out.warnings)), x);

  const std::size_t window = samples(cfg.chew_window_s, fs);
  const std::size_t hop = samples(cfg.chew_hop_s, fs);
  std::vector<double> env;
  std::vector<double> centers;
  for (std::size_t start = 0; start + window <= bp.size(); start += hop) {
    double acc = 0.0;
    for (std::size_t i = start; i < start + window; ++i) acc += bp[i] * bp[i];
    env.push_back(std::sqrt(acc / static_cast<double>(window)));
    centers.push_back((static_cast<double>(start) + static_cast<double>(window) / 2.0) / fs);
  }
  if (env.empty()) return out;

  const double base = median(env);
  const double threshold = base + cfg.chew_k * mad(env, base);
  const auto min_frames = static_cast<std::size_t>(std::ceil(cfg.chew_min_duration_s / cfg.chew_hop_s - 1e-9));

  std::size_t i = 0;
  while (i < env.size()) {
    if (!(env[i] > threshold)) {
      ++i;
      continue;
    }
    std::size_t first = i, peak = i, last = i;
    // A single sub-threshold frame inside a burst does not split it.
    while (i < env.size()) {
      if (env[i] > threshold) {
        last = i;
        if (env[i] > env[peak]) peak = i;
        ++i;
      } else if (i + 1 < env.size() && env[i + 1] > threshold) {
        ++i;
      } else {
        break;
      }
    }
    if (last - first + 1 >= min_frames) {
      out.times.push_back(centers[peak]);
      out.scores.push_back(threshold > 0.0 ? env[peak] / threshold : 0.0);
    }
  }
  return out;
}

EventList emg_envelope_onsets(std::span<const double> x, double fs, const DspConfig& cfg) {
  require_length(x, fs, 1.0);
  EventList out;
  out.kind = EventType::EmgOnset;
  auto bp = filtfilt(design_filter(band(cfg.emg_low_hz, cfg.emg_high_hz, cfg.emg_order, fs, out.warnings)), x);
  for (auto& v : bp) v = std::abs(v);
  const auto env = moving_rms(bp, samples(cfg.emg_window_s, fs));

  const double baseline = quantile(env, cfg.emg_baseline_quantile);
  const double threshold = cfg.emg_factor * baseline;
  const std::size_t hold = samples(cfg.emg_min_duration_s, fs);

  // Crossings must persist for `hold` samples; drops shorter than `hold`
  // inside an active burst are ignored.
  bool active = false;
  std::size_t below_run = 0;
  std::size_t i = 0;
  while (i < env.size()) {
    if (!active) {
      if (env[i] > threshold) {
        std::size_t j = i;
        while (j < env.size() && env[j] > threshold) ++j;
        if (j - i >= hold) {
          out.times.push_back(static_cast<double>(i) / fs);
          double peak = 0.0;
          for (std::size_t k = i; k < j; ++k) peak = std::max(peak, env[k]);
          out.scores.push_back(baseline > 0.0 ? peak / baseline : 0.0);
          active = true;
          below_run = 0;
        }
        i = j;
        continue;
      }
      ++i;
    } else {
      if (env[i] > threshold) {
        below_run = 0;
      } else if (++below_run >= hold) {
        active = false;
      }
      ++i;
    }
  }
  return out;
}

HeartRate detect_r_peaks(std::span<const double> x, double fs, const DspConfig& cfg) {
  require_length(x, fs, 5.0);
  HeartRate result;
  result.peaks.kind = EventType::RPeak;
  auto& warnings = result.peaks.warnings;
  const auto bp = filtfilt(design_filter(band(cfg.ecg_low_hz, cfg.ecg_high_hz, cfg.ecg_order, fs, warnings)), x);

  // Five-point centered derivative, squared, then moving-window integration.
  const std::size_t n = bp.size();
  std::vector<double> sq(n, 0.0);
  for (std::size_t i = 2; i + 2 < n; ++i) {
    const double d = (-bp[i - 2] - 2.0 * bp[i - 1] + 2.0 * bp[i + 1] + bp[i + 2]) * fs / 8.0;
    sq[i] = d * d;
  }
  const auto mwi = moving_mean(sq, samples(cfg.ecg_integration_s, fs));

  // Local maxima, at most one per refractory period.
  const std::size_t refractory = samples(cfg.ecg_refractory_s, fs);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(mwi[i] > 0.0) || mwi[i] < mwi[i - 1] || mwi[i] < mwi[i + 1]) continue;
    if (!candidates.empty() && i - candidates.back() < refractory) {
      if (mwi[i] > mwi[candidates.back()]) candidates.back() = i;
      continue;
    }
    candidates.push_back(i);
  }
  if (candidates.empty()) return result;

  // Adaptive signal/noise peak levels, seeded from the first two seconds.
  const std::size_t learn = std::min(n, samples(2.0, fs));
  double spk = 0.25 * *std::max_element(mwi.begin(), mwi.begin() + static_cast<std::ptrdiff_t>(learn));
  double npk = 0.5 * std::accumulate(mwi.begin(), mwi.begin() + static_cast<std::ptrdiff_t>(learn), 0.0) /
               static_cast<double>(learn);
  std::vector<std::size_t> beats;
  std::vector<std::size_t> noise_since_beat;
  double rr_mean = 0.0;
  for (std::size_t c : candidates) {
    const double threshold = npk + 0.25 * (spk - npk);
    if (mwi[c] > threshold) {
      // Search back for a missed beat when the gap is implausibly long.
      if (!beats.empty() && rr_mean > 0.0 && static_cast<double>(c - beats.back()) > 1.66 * rr_mean) {
        std::size_t best = 0;
        double best_v = 0.0;
        for (std::size_t m : noise_since_beat) {
          if (mwi[m] > 0.5 * threshold && mwi[m] > best_v && m - beats.back() >= refractory &&
              c - m >= refractory) {
            best = m;
            best_v = mwi[m];
          }
        }
        if (best_v > 0.0) {
          beats.push_back(best);
          spk = 0.25 * mwi[best] + 0.75 * spk;
        }
      }
      if (!beats.empty()) {
        const double rr = static_cast<double>(c - beats.back());
        rr_mean = rr_mean > 0.0 ? 0.875 * rr_mean + 0.125 * rr : rr;
      }
      beats.push_back(c);
      noise_since_beat.clear();
      spk = 0.125 * mwi[c] + 0.875 * spk;
    } else {
      noise_since_beat.push_back(c);
      npk = 0.125 * mwi[c] + 0.875 * npk;
    }
  }

  // R location: largest |band-passed| sample within half an integration window.
  const std::size_t half = samples(cfg.ecg_integration_s, fs) / 2;
  std::vector<std::size_t> r;
  for (std::size_t b : beats) {
    const std::size_t lo = b >= half ? b - half : 0;
    const std::size_t hi = std::min(n - 1, b + half);
    std::size_t best = lo;
    for (std::size_t i = lo; i <= hi; ++i) {
      if (std::abs(bp[i]) > std::abs(bp[best])) best = i;
    }
    if (!r.empty() && best <= r.back()) continue;
    r.push_back(best);
    result.peaks.times.push_back(static_cast<double>(best) / fs);
    result.peaks.scores.push_back(spk > 0.0 ? mwi[b] / spk : 0.0);
  }

  if (r.size() >= 2) {
    std::vector<double> rr;
    for (std::size_t i = 1; i < r.size(); ++i) rr.push_back(static_cast<double>(r[i] - r[i - 1]) / fs);
    result.mean_hr = 60.0 / median(std::move(rr));
  }
  return result;
}

}  // namespace peeg::dsp
