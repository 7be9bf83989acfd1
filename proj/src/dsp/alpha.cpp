#include <algorithm>
#include <cmath>
#include <string>

#include "peeg/dsp.hpp"
#include "peeg/error.hpp"

namespace peeg::dsp {

std::string_view to_string(EyeState s) noexcept {
  return s == EyeState::Closed ? "eyes_closed" : "eyes_open";
}

std::vector<ProtocolInterval> alternating_protocol(double duration_s, double step_s, EyeState first) {
  std::vector<ProtocolInterval> out;
  if (!(step_s > 0.0)) return out;
  EyeState state = first;
  for (double t = 0.0; t < duration_s - 1e-9; t += step_s) {
    out.push_back({t, std::min(duration_s, t + step_s), state});
    state = state == EyeState::Closed ? EyeState::Open : EyeState::Closed;
  }
  return out;
}

AlphaReport score_alpha_protocol(std::span<const double> x, double fs,
                                 std::span<const ProtocolInterval> protocol, const DspConfig& cfg) {
  if (protocol.empty()) throw Error(Errc::TooShort, "empty protocol");
  if (!(fs > 0.0)) throw Error(Errc::InvalidFilter, "fs must be positive");
  const double recording_s = static_cast<double>(x.size()) / fs;
  const double tolerance = 1.0 / fs;

  AlphaReport report;
  for (std::size_t i = 0; i < protocol.size(); ++i) {
    const auto& p = protocol[i];
    if (!(p.end > p.start) || p.start < -tolerance || p.end > recording_s + tolerance) {
      throw Error(Errc::TooShort, "protocol interval [" + std::to_string(p.start) + ", " +
                                      std::to_string(p.end) + ") s outside the " +
                                      std::to_string(recording_s) + " s recording");
    }
    if (i > 0 && p.start < protocol[i - 1].end - tolerance) {
      throw Error(Errc::InvalidFilter, "protocol intervals overlap");
    }
    const auto lo = static_cast<std::size_t>(std::max(0.0, std::round(p.start * fs)));
    const auto hi = std::min(x.size(), static_cast<std::size_t>(std::round(p.end * fs)));
    const std::span<const double> seg = x.subspan(lo, hi - lo);
    const std::size_t window = std::min(cfg.welch_window, seg.size());
    if (window < 16) throw Error(Errc::TooShort, "protocol interval shorter than 16 samples");

    const Spectrum s = welch_psd(seg, fs, window, cfg.welch_overlap);
    AlphaSegment out;
    out.start = p.start;
    out.end = p.end;
    out.mean_alpha_power = bandpower(s, cfg.alpha_low_hz, std::min(cfg.alpha_high_hz, fs / 2.0));
    out.expected = p.label;
    report.segments.push_back(out);
  }

  double log_sum = 0.0;
  bool any_zero = false;
  for (const auto& s : report.segments) {
    if (s.mean_alpha_power > 0.0) log_sum += std::log(s.mean_alpha_power);
    else any_zero = true;
  }
  report.threshold = any_zero ? 0.0 : std::exp(log_sum / static_cast<double>(report.segments.size()));

  double closed_sum = 0.0, open_sum = 0.0;
  std::size_t closed_n = 0, open_n = 0, matches = 0;
  for (auto& s : report.segments) {
    s.label = s.mean_alpha_power > report.threshold ? EyeState::Closed : EyeState::Open;
    if (s.label == s.expected) ++matches;
    if (s.expected == EyeState::Closed) {
      closed_sum += s.mean_alpha_power;
      ++closed_n;
    } else {
      open_sum += s.mean_alpha_power;
      ++open_n;
    }
  }
  report.sequence_match = static_cast<double>(matches) / static_cast<double>(report.segments.size());
  if (closed_n > 0 && open_n > 0 && open_sum > 0.0) {
    report.ratio = (closed_sum / static_cast<double>(closed_n)) / (open_sum / static_cast<double>(open_n));
  }
  return report;
}

}  // namespace peeg::dsp
