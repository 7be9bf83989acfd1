#pragma once

// Deterministic synthetic biosignals. A Scenario is a declarative timeline
// of events; rendering it yields 8 channels of microvolt samples plus the
// exact ground truth the analyses are scored against.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "peeg/ads1299.hpp"

namespace peeg::synth {

inline constexpr std::size_t kChannels = ads1299::kChannels;

enum class EventKind { AlphaInterval, Blink, Chew, EmgBurst, EcgRun };

std::string_view to_string(EventKind kind) noexcept;
EventKind event_kind_from_string(std::string_view name);

struct Event {
  EventKind kind = EventKind::AlphaInterval;
  double start = 0.0;         // s
  double length = 0.0;        // s
  double amplitude_uv = 0.0;  // peak for alpha/blink/chew, R-wave for ECG, sine-equivalent for EMG
  // Alpha carrier frequency, or the chewing modulation rate.
  double freq_hz = 0.0;
  // EcgRun only.
  double bpm = 0.0;

  double end() const noexcept { return start + length; }
  friend bool operator==(const Event&, const Event&) = default;
};

struct EventGains {
  double alpha = 0.0;
  double blink = 0.0;
  double chew = 0.0;
  double emg = 0.0;
  double ecg = 0.0;

  double of(EventKind kind) const noexcept;
  friend bool operator==(const EventGains&, const EventGains&) = default;
};

struct ChannelPlan {
  std::string label;
  double noise_uv_rms = 0.0;
  int mains_hz = 0;  // 0, 50 or 60
  double mains_uv = 0.0;
  EventGains event_gain;

  friend bool operator==(const ChannelPlan&, const ChannelPlan&) = default;
};

struct Scenario {
  std::string name;
  double duration = 0.0;  // s
  int fs = 250;
  std::uint64_t seed = 1;
  std::array<ChannelPlan, kChannels> channels;
  std::vector<Event> events;

  std::size_t total_samples() const noexcept;
  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// 10-20 / 10-10 scalp names plus EOG/EMG/ECG surface labels with an
/// optional numeric suffix.
bool is_valid_label(std::string_view label);

/// Throws Errc::UnsupportedRate or Errc::InvalidScenario.
void validate(const Scenario& scenario);

// Waveform defaults.
inline constexpr double kDefaultAlphaHz = 10.0;
inline constexpr double kAlphaRampS = 0.25;
inline constexpr double kDefaultBlinkWidthS = 0.300;
inline constexpr double kDefaultBlinkUv = 120.0;
inline constexpr double kDefaultChewLengthS = 0.500;
inline constexpr double kDefaultChewUv = 80.0;
inline constexpr double kDefaultChewModulationHz = 6.0;
inline constexpr double kChewCarrierHz = 25.0;
inline constexpr double kEmgLowHz = 20.0;
inline constexpr double kEmgHighHz = 120.0;
inline constexpr double kEmgRampS = 0.05;
inline constexpr double kPinkCornerHz = 0.5;

struct GroundTruth {
  std::vector<Event> events;         // sorted by start
  std::vector<double> alpha_closed;  // interval starts, s
  std::vector<double> blink_apexes;  // s
  std::vector<double> chew_centers;  // s
  std::vector<double> emg_onsets;    // s
  std::vector<double> r_peaks;       // s

  std::size_t count(EventKind kind) const noexcept;
};

/// R-peak times of an EcgRun: start + k * 60/bpm for every beat inside the run.
std::vector<double> r_peak_times(const Event& ecg_run);

GroundTruth ground_truth(const Scenario& scenario);

/// 1/f noise: fixed-coefficient 7-pole IIR approximation (P. Kellet's
/// "refined" filter) followed by a one-pole DC blocker at kPinkCornerHz, fed
/// by Box-Muller normals from mt19937_64 and scaled to unit variance.
class PinkNoise {
 public:
  PinkNoise(std::uint64_t seed, int fs);
  double next();

 private:
  double white();

  std::mt19937_64 rng_;
  std::array<double, 7> b_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
  double dc_x1_ = 0.0;
  double dc_y1_ = 0.0;
  double dc_r_;
  double scale_;
};

/// Incremental renderer. One consumer at a time.
class Renderer {
 public:
  explicit Renderer(Scenario scenario);

  const Scenario& scenario() const noexcept { return scenario_; }
  std::size_t total_samples() const noexcept { return total_; }
  std::size_t position() const noexcept { return pos_; }
  bool done() const noexcept { return pos_ >= total_; }

  /// Next sample of every channel in microvolts. Precondition: !done().
  std::array<double, kChannels> next();

 private:
  struct EmgCarrier {
    std::vector<double> freq;
    std::vector<double> phase;
    double norm = 1.0;
  };

  double event_value(std::size_t index, double t) const;

  Scenario scenario_;
  std::size_t total_ = 0;
  std::size_t pos_ = 0;
  std::vector<Event> events_;
  std::vector<EmgCarrier> emg_;
  std::vector<PinkNoise> noise_;
};

struct Rendering {
  int fs = 0;
  std::array<std::vector<double>, kChannels> channels;
  GroundTruth truth;

  std::size_t samples() const noexcept { return channels[0].size(); }
};

Rendering render(const Scenario& scenario);

/// Station channel layout: Fz first (the recording site), 10-20 around it.
std::array<ChannelPlan, kChannels> default_channels(double noise_uv_rms = 5.0);

/// 30 s at 250 SPS; alpha during [0,5), [10,15), [20,25) on all channels,
/// strongest on Fz.
Scenario fig6_scenario(std::uint64_t seed = 1);

/// Chewing in groups of 4, 3, 2, 1 then blinking in groups of 4, 3, 2.
Scenario fig7_scenario(std::uint64_t seed = 1);

/// Five 2 s fist-clench bursts on an EMG channel.
Scenario emg_scenario(std::uint64_t seed = 1);

/// A single EcgRun covering `duration` seconds on an ECG channel.
Scenario ecg_scenario(double bpm = 60.0, std::uint64_t seed = 1, double duration = 30.0);

/// Pink noise only; used by soak tests and false-positive trials.
Scenario noise_scenario(double duration, int fs = 250, std::uint64_t seed = 1,
                        double noise_uv_rms = 5.0);

/// Resolves fig6, fig7, emg, ecg60, ecg120, noise; throws InvalidScenario.
Scenario named_scenario(std::string_view name, std::uint64_t seed = 1);

// Scenario files (JSON, "scenario_version": 1). Schema in docs/scenario-format.md.
std::string scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

}  // namespace peeg::synth
