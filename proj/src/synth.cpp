#include "peeg/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

#include "peeg/error.hpp"

namespace peeg::synth {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Per-event seed that depends on the event itself, not on its list position,
// so rendering A+B equals rendering A plus rendering B.
std::uint64_t event_seed(std::uint64_t seed, const Event& e) {
  std::uint64_t h = splitmix64(seed ^ 0xE7E7E7E7ull);
  h = splitmix64(h ^ static_cast<std::uint64_t>(e.kind));
  h = splitmix64(h ^ std::bit_cast<std::uint64_t>(e.start));
  h = splitmix64(h ^ std::bit_cast<std::uint64_t>(e.length));
  return h;
}

double hann_unit(double x) { return 0.5 * (1.0 - std::cos(kTwoPi * x)); }

// Cosine on/off ramps of `ramp` seconds inside [0, length).
double ramp_window(double tau, double length, double ramp) {
  ramp = std::min(ramp, length / 2.0);
  if (ramp <= 0.0) return 1.0;
  if (tau < ramp) return 0.5 * (1.0 - std::cos(std::numbers::pi * tau / ramp));
  const double tail = length - tau;
  if (tail < ramp) return 0.5 * (1.0 - std::cos(std::numbers::pi * tail / ramp));
  return 1.0;
}

struct Wave {
  double center;  // relative to R, s (scaled by sqrt(RR) for P and T)
  double amp;     // relative to R amplitude
  double sigma;   // s
  bool rate_scaled;
};

constexpr std::array<Wave, 5> kPqrst = {{
    {-0.200, 0.15, 0.025, true},   // P
    {-0.030, -0.10, 0.010, false},  // Q
    {0.000, 1.00, 0.010, false},    // R
    {0.030, -0.25, 0.010, false},   // S
    {0.250, 0.30, 0.040, true},     // T
}};

double ecg_beat(double rel, double rr) {
  const double scale = std::sqrt(rr);
  double v = 0.0;
  for (const auto& w : kPqrst) {
    const double c = w.rate_scaled ? w.center * scale : w.center;
    const double d = (rel - c) / w.sigma;
    if (std::abs(d) < 8.0) v += w.amp * std::exp(-0.5 * d * d);
  }
  return v;
}

double pink_step(std::array<double, 7>& b, double w) {
  b[0] = 0.99886 * b[0] + w * 0.0555179;
  b[1] = 0.99332 * b[1] + w * 0.0750759;
  b[2] = 0.96900 * b[2] + w * 0.1538520;
  b[3] = 0.86650 * b[3] + w * 0.3104856;
  b[4] = 0.55000 * b[4] + w * 0.5329522;
  b[5] = -0.7616 * b[5] - w * 0.0168980;
  const double out = b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + w * 0.5362;
  b[6] = w * 0.115926;
  return out;
}

// Output variance of the pink + DC-blocker chain for unit-variance white
// input, from the energy of its impulse response.
double pink_gain(double dc_r) {
  std::array<double, 7> b{};
  double x1 = 0.0, y1 = 0.0, energy = 0.0;
  for (int n = 0; n < 200000; ++n) {
    const double x = pink_step(b, n == 0 ? 1.0 : 0.0);
    const double y = x - x1 + dc_r * y1;
    x1 = x;
    y1 = y;
    energy += y * y;
  }
  return std::sqrt(energy);
}

const std::set<std::string, std::less<>>& scalp_labels() {
  static const std::set<std::string, std::less<>> labels = {
      "Fp1", "Fp2", "Fpz", "AF3", "AF4", "AF7", "AF8", "AFz", "F1",  "F2",  "F3",  "F4",  "F5",
      "F6",  "F7",  "F8",  "Fz",  "FC1", "FC2", "FC3", "FC4", "FC5", "FC6", "FCz", "FT7", "FT8",
      "C1",  "C2",  "C3",  "C4",  "C5",  "C6",  "Cz",  "T3",  "T4",  "T5",  "T6",  "T7",  "T8",
      "CP1", "CP2", "CP3", "CP4", "CP5", "CP6", "CPz", "TP7", "TP8", "P1",  "P2",  "P3",  "P4",
      "P5",  "P6",  "P7",  "P8",  "Pz",  "PO3", "PO4", "PO7", "PO8", "POz", "O1",  "O2",  "Oz",
      "A1",  "A2",  "M1",  "M2"};
  return labels;
}

ChannelPlan plan(std::string label, double noise, EventGains gains) {
  ChannelPlan p;
  p.label = std::move(label);
  p.noise_uv_rms = noise;
  p.mains_hz = 50;
  p.mains_uv = 0.0;
  p.event_gain = gains;
  return p;
}

}  // namespace

std::string_view to_string(EventKind kind) noexcept {
  switch (kind) {
    case EventKind::AlphaInterval: return "alpha";
    case EventKind::Blink: return "blink";
    case EventKind::Chew: return "chew";
    case EventKind::EmgBurst: return "emg";
    case EventKind::EcgRun: return "ecg";
  }
  return "unknown";
}

EventKind event_kind_from_string(std::string_view name) {
  for (auto k : {EventKind::AlphaInterval, EventKind::Blink, EventKind::Chew, EventKind::EmgBurst,
                 EventKind::EcgRun}) {
    if (to_string(k) == name) return k;
  }
  throw Error(Errc::InvalidScenario, "unknown event kind '" + std::string(name) + "'");
}

double EventGains::of(EventKind kind) const noexcept {
  switch (kind) {
    case EventKind::AlphaInterval: return alpha;
    case EventKind::Blink: return blink;
    case EventKind::Chew: return chew;
    case EventKind::EmgBurst: return emg;
    case EventKind::EcgRun: return ecg;
  }
  return 0.0;
}

std::size_t Scenario::total_samples() const noexcept {
  return static_cast<std::size_t>(std::llround(duration * fs));
}

bool is_valid_label(std::string_view label) {
  if (scalp_labels().contains(label)) return true;
  for (std::string_view prefix : {"EOG", "EMG", "ECG"}) {
    if (label.starts_with(prefix)) {
      auto rest = label.substr(prefix.size());
      return std::all_of(rest.begin(), rest.end(), [](char c) { return c >= '0' && c <= '9'; });
    }
  }
  return false;
}

void validate(const Scenario& s) {
  if (!ads1299::is_valid_rate(s.fs)) {
    throw Error(Errc::UnsupportedRate, std::to_string(s.fs) + " SPS is not a converter data rate");
  }
  if (!(s.duration > 0.0) || !std::isfinite(s.duration)) {
    throw Error(Errc::InvalidScenario, "duration must be positive");
  }
  for (std::size_t ch = 0; ch < kChannels; ++ch) {
    const auto& c = s.channels[ch];
    if (!is_valid_label(c.label)) {
      throw Error(Errc::InvalidScenario, "channel " + std::to_string(ch + 1) + " label '" + c.label + "'");
    }
    if (!(c.noise_uv_rms >= 0.0) || !(c.mains_uv >= 0.0)) {
      throw Error(Errc::InvalidScenario, "channel " + c.label + " negative noise or mains level");
    }
    if (c.mains_hz != 0 && c.mains_hz != 50 && c.mains_hz != 60) {
      throw Error(Errc::InvalidScenario, "mains_hz must be 0, 50 or 60");
    }
  }
  for (const auto& e : s.events) {
    const std::string what = std::string(to_string(e.kind)) + " event at " + std::to_string(e.start) + " s";
    if (!(e.length > 0.0)) throw Error(Errc::InvalidScenario, what + ": length must be positive");
    if (!(e.amplitude_uv >= 0.0)) throw Error(Errc::InvalidScenario, what + ": negative amplitude");
    if (!(e.start >= 0.0) || !(e.start < s.duration) || e.end() > s.duration + 1e-9) {
      throw Error(Errc::InvalidScenario, what + ": outside [0, duration)");
    }
    if (e.kind == EventKind::EcgRun && !(e.bpm >= 30.0 && e.bpm <= 240.0)) {
      throw Error(Errc::InvalidScenario, what + ": bpm must be in [30, 240]");
    }
    if ((e.kind == EventKind::AlphaInterval || e.kind == EventKind::Chew) &&
        !(e.freq_hz > 0.0 && e.freq_hz < s.fs / 2.0)) {
      throw Error(Errc::InvalidScenario, what + ": freq_hz must be in (0, fs/2)");
    }
  }
}

std::size_t GroundTruth::count(EventKind kind) const noexcept {
  return static_cast<std::size_t>(
      std::count_if(events.begin(), events.end(), [kind](const Event& e) { return e.kind == kind; }));
}

std::vector<double> r_peak_times(const Event& run) {
  std::vector<double> out;
  if (run.kind != EventKind::EcgRun || !(run.bpm > 0.0)) return out;
  const double rr = 60.0 / run.bpm;
  for (std::size_t k = 0;; ++k) {
    const double t = run.start + static_cast<double>(k) * rr;
    if (t >= run.end() - 1e-9) break;
    out.push_back(t);
  }
  return out;
}

GroundTruth ground_truth(const Scenario& s) {
  GroundTruth g;
  g.events = s.events;
  std::stable_sort(g.events.begin(), g.events.end(),
                   [](const Event& a, const Event& b) { return a.start < b.start; });
  for (const auto& e : g.events) {
    switch (e.kind) {
      case EventKind::AlphaInterval: g.alpha_closed.push_back(e.start); break;
      case EventKind::Blink: g.blink_apexes.push_back(e.start + e.length / 2.0); break;
      case EventKind::Chew: g.chew_centers.push_back(e.start + e.length / 2.0); break;
      case EventKind::EmgBurst: g.emg_onsets.push_back(e.start); break;
      case EventKind::EcgRun: {
        auto peaks = r_peak_times(e);
        g.r_peaks.insert(g.r_peaks.end(), peaks.begin(), peaks.end());
        break;
      }
    }
  }
  std::sort(g.r_peaks.begin(), g.r_peaks.end());
  return g;
}

PinkNoise::PinkNoise(std::uint64_t seed, int fs)
    : rng_(splitmix64(seed)), dc_r_(std::exp(-kTwoPi * kPinkCornerHz / fs)) {
  // Cached per rate: the impulse-response sweep is the expensive part.
  static thread_local int cached_fs = 0;
  static thread_local double cached_gain = 1.0;
  if (cached_fs != fs) {
    cached_gain = pink_gain(dc_r_);
    cached_fs = fs;
  }
  scale_ = 1.0 / cached_gain;
}

double PinkNoise::white() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller on 53-bit uniforms in (0, 1].
  const double u1 = (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(kTwoPi * u2);
  has_spare_ = true;
  return r * std::cos(kTwoPi * u2);
}

double PinkNoise::next() {
  const double x = pink_step(b_, white());
  const double y = x - dc_x1_ + dc_r_ * dc_y1_;
  dc_x1_ = x;
  dc_y1_ = y;
  return y * scale_;
}

Renderer::Renderer(Scenario scenario) : scenario_(std::move(scenario)) {
  validate(scenario_);
  total_ = scenario_.total_samples();
  events_ = scenario_.events;
  std::stable_sort(events_.begin(), events_.end(),
                   [](const Event& a, const Event& b) { return a.start < b.start; });
  emg_.resize(events_.size());
  for (std::size_t i = 0; i < events_.size(); ++i) {
    if (events_[i].kind != EventKind::EmgBurst) continue;
    std::mt19937_64 rng(event_seed(scenario_.seed, events_[i]));
    const double hi = std::min(kEmgHighHz, 0.45 * scenario_.fs);
    std::uniform_real_distribution<double> freq(kEmgLowHz, hi);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    auto& c = emg_[i];
    constexpr int kComponents = 48;
    for (int k = 0; k < kComponents; ++k) {
      c.freq.push_back(freq(rng));
      c.phase.push_back(phase(rng));
    }
    // Unit-amplitude components: RMS sqrt(K/2); rescale to a sine's 1/sqrt(2).
    c.norm = 1.0 / std::sqrt(static_cast<double>(kComponents));
  }
  noise_.reserve(kChannels);
  for (std::size_t ch = 0; ch < kChannels; ++ch) {
    noise_.emplace_back(splitmix64(scenario_.seed) ^ splitmix64(ch + 1), scenario_.fs);
  }
}

double Renderer::event_value(std::size_t index, double t) const {
  const Event& e = events_[index];
  const double tau = t - e.start;
  switch (e.kind) {
    case EventKind::AlphaInterval: {
      if (tau < 0.0 || tau >= e.length) return 0.0;
      return e.amplitude_uv * ramp_window(tau, e.length, kAlphaRampS) *
             std::sin(kTwoPi * e.freq_hz * t);
    }
    case EventKind::Blink: {
      if (tau < 0.0 || tau >= e.length) return 0.0;
      return e.amplitude_uv * hann_unit(tau / e.length);
    }
    case EventKind::Chew: {
      if (tau < 0.0 || tau >= e.length) return 0.0;
      const double modulation = 0.5 + 0.5 * std::sin(kTwoPi * e.freq_hz * tau);
      return e.amplitude_uv * hann_unit(tau / e.length) * modulation *
             std::sin(kTwoPi * kChewCarrierHz * tau);
    }
    case EventKind::EmgBurst: {
      if (tau < 0.0 || tau >= e.length) return 0.0;
      const auto& c = emg_[index];
      double v = 0.0;
      for (std::size_t k = 0; k < c.freq.size(); ++k) v += std::sin(kTwoPi * c.freq[k] * tau + c.phase[k]);
      return e.amplitude_uv * ramp_window(tau, e.length, kEmgRampS) * c.norm * v;
    }
    case EventKind::EcgRun: {
      if (t < e.start - 1.0 || t >= e.end() + 1.0) return 0.0;
      const double rr = 60.0 / e.bpm;
      const auto beats = static_cast<long>(std::ceil((e.length - 1e-9) / rr));
      const long nearest = std::lround(tau / rr);
      double v = 0.0;
      for (long k = nearest - 2; k <= nearest + 2; ++k) {
        if (k < 0 || k >= beats) continue;
        v += ecg_beat(tau - static_cast<double>(k) * rr, rr);
      }
      return e.amplitude_uv * v;
    }
  }
  return 0.0;
}

std::array<double, kChannels> Renderer::next() {
  const double t = static_cast<double>(pos_) / scenario_.fs;
  std::array<double, kChannels> out{};
  for (std::size_t i = 0; i < events_.size(); ++i) {
    const Event& e = events_[i];
    if (e.start > t + 1.0) break;  // sorted; the ECG template reaches at most 1 s early
    const double v = event_value(i, t);
    if (v == 0.0) continue;
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
      const double g = scenario_.channels[ch].event_gain.of(e.kind);
      if (g != 0.0) out[ch] += g * v;
    }
  }
  for (std::size_t ch = 0; ch < kChannels; ++ch) {
    const auto& c = scenario_.channels[ch];
    if (c.mains_hz != 0 && c.mains_uv > 0.0) out[ch] += c.mains_uv * std::sin(kTwoPi * c.mains_hz * t);
    // Always advance the generator so channels stay aligned when noise is toggled.
    const double n = noise_[ch].next();
    if (c.noise_uv_rms > 0.0) out[ch] += c.noise_uv_rms * n;
  }
  ++pos_;
  return out;
}

Rendering render(const Scenario& scenario) {
  Renderer r(scenario);
  Rendering out;
  out.fs = scenario.fs;
  for (auto& ch : out.channels) ch.reserve(r.total_samples());
  while (!r.done()) {
    const auto s = r.next();
    for (std::size_t ch = 0; ch < kChannels; ++ch) out.channels[ch].push_back(s[ch]);
  }
  out.truth = ground_truth(scenario);
  return out;
}

std::array<ChannelPlan, kChannels> default_channels(double noise) {
  return {{
      plan("Fz", noise, {1.0, 1.0, 1.0, 0.0, 0.0}),
      plan("Fp1", noise, {0.4, 1.6, 0.8, 0.0, 0.0}),
      plan("Fp2", noise, {0.4, 1.6, 0.8, 0.0, 0.0}),
      plan("Cz", noise, {0.7, 0.4, 0.6, 0.0, 0.0}),
      plan("C3", noise, {0.6, 0.3, 1.0, 0.0, 0.0}),
      plan("C4", noise, {0.6, 0.3, 1.0, 0.0, 0.0}),
      plan("Pz", noise, {0.9, 0.15, 0.4, 0.0, 0.0}),
      plan("Oz", noise, {1.2, 0.05, 0.3, 0.0, 0.0}),
  }};
}

Scenario fig6_scenario(std::uint64_t seed) {
  Scenario s;
  s.name = "fig6";
  s.duration = 30.0;
  s.fs = 250;
  s.seed = seed;
  s.channels = default_channels();
  for (double start : {0.0, 10.0, 20.0}) {
    s.events.push_back({EventKind::AlphaInterval, start, 5.0, 20.0, kDefaultAlphaHz, 0.0});
  }
  return s;
}

Scenario fig7_scenario(std::uint64_t seed) {
  Scenario s;
  s.name = "fig7";
  s.fs = 250;
  s.seed = seed;
  s.channels = default_channels();
  constexpr double kGroupGap = 2.5;
  constexpr double kChewPeriod = 1.0;
  constexpr double kBlinkPeriod = 0.8;
  double t = 2.0;
  for (int group : {4, 3, 2, 1}) {
    for (int i = 0; i < group; ++i) {
      s.events.push_back({EventKind::Chew, t, kDefaultChewLengthS, kDefaultChewUv, kDefaultChewModulationHz, 0.0});
      t += kChewPeriod;
    }
    t += kDefaultChewLengthS - kChewPeriod + kGroupGap;
  }
  for (int group : {4, 3, 2}) {
    for (int i = 0; i < group; ++i) {
      s.events.push_back({EventKind::Blink, t, kDefaultBlinkWidthS, kDefaultBlinkUv, 0.0, 0.0});
      t += kBlinkPeriod;
    }
    t += kDefaultBlinkWidthS - kBlinkPeriod + kGroupGap;
  }
  s.duration = std::ceil(t);
  return s;
}

Scenario emg_scenario(std::uint64_t seed) {
  Scenario s;
  s.name = "emg";
  s.duration = 30.0;
  s.fs = 250;
  s.seed = seed;
  s.channels = default_channels();
  s.channels[0] = plan("EMG1", 5.0, {0.0, 0.0, 0.0, 1.0, 0.0});
  s.channels[1] = plan("EMG2", 5.0, {0.0, 0.0, 0.0, 0.6, 0.0});
  for (double start : {3.0, 8.5, 13.0, 18.5, 23.0}) {
    s.events.push_back({EventKind::EmgBurst, start, 2.0, 100.0, 0.0, 0.0});
  }
  return s;
}

Scenario ecg_scenario(double bpm, std::uint64_t seed, double duration) {
  Scenario s;
  s.name = "ecg";
  s.duration = duration;
  s.fs = 250;
  s.seed = seed;
  s.channels = default_channels();
  s.channels[0] = plan("ECG", 10.0, {0.0, 0.0, 0.0, 0.0, 1.0});
  s.events.push_back({EventKind::EcgRun, 0.0, duration, 1000.0, 0.0, bpm});
  return s;
}

Scenario noise_scenario(double duration, int fs, std::uint64_t seed, double noise) {
  Scenario s;
  s.name = "noise";
  s.duration = duration;
  s.fs = fs;
  s.seed = seed;
  s.channels = default_channels(noise);
  return s;
}

Scenario named_scenario(std::string_view name, std::uint64_t seed) {
  if (name == "fig6") return fig6_scenario(seed);
  if (name == "fig7") return fig7_scenario(seed);
  if (name == "emg") return emg_scenario(seed);
  if (name == "ecg" || name == "ecg60") return ecg_scenario(60.0, seed);
  if (name == "ecg120") return ecg_scenario(120.0, seed);
  if (name == "noise") return noise_scenario(30.0, 250, seed);
  throw Error(Errc::InvalidScenario, "unknown scenario name '" + std::string(name) + "'");
}

}  // namespace peeg::synth
