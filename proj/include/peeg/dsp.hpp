#pragma once

// Offline analyses for recorded or simulated biosignals: Butterworth
// filtering, Welch spectra, the eyes-closed/eyes-open alpha test and the
// blink, chew, EMG and ECG event detectors.

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace peeg::dsp {

enum class FilterKind { Bandpass, Notch, Highpass, Lowpass };

/// Lowpass uses high_hz, highpass uses low_hz, bandpass and notch use both
/// edges (-3 dB points). `order` counts poles of the digital filter.
struct FilterSpec {
  FilterKind kind = FilterKind::Bandpass;
  double low_hz = 0.0;
  double high_hz = 0.0;
  int order = 4;
  double fs = 250.0;
};

/// Second-order section with a0 == 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

struct FilterCoefficients {
  std::vector<Biquad> sections;
  double fs = 0.0;

  std::complex<double> response(double hz) const;
  double gain_db(double hz) const;
  double max_pole_radius() const;
};

/// Butterworth design by bilinear transform with pre-warped edges.
/// Throws NyquistViolation, InvalidFilter or UnstableDesign.
FilterCoefficients design_filter(const FilterSpec& spec);

/// Causal direct-form-II-transposed cascade, zero initial state.
std::vector<double> filter(const FilterCoefficients& f, std::span<const double> x);

/// Forward-backward filtering with odd-extension padding and steady-state
/// initial conditions; zero phase, squared magnitude response.
std::vector<double> filtfilt(const FilterCoefficients& f, std::span<const double> x);

/// Stateful causal filter for live streams.
class StreamingFilter {
 public:
  explicit StreamingFilter(FilterCoefficients coefficients);
  double process(double x);
  void reset();

 private:
  FilterCoefficients coeffs_;
  std::vector<double> z1_, z2_;
};

struct Spectrum {
  std::vector<double> freqs;  // Hz, 0 .. fs/2
  std::vector<double> psd;    // uV^2/Hz, one-sided
  double fs = 0.0;
  std::size_t window_len = 0;
  double overlap = 0.0;
  std::size_t segments = 0;
};

/// Hann-windowed averaged periodograms without detrending, density scaled so
/// the integral of psd equals the mean power.
Spectrum welch_psd(std::span<const double> x, double fs, std::size_t window_len = 256,
                   double overlap = 0.5);

/// Trapezoidal integral of psd over [low_hz, high_hz] with interpolated edges.
double bandpower(const Spectrum& s, double low_hz, double high_hz);

/// Every tunable of the analyses, in one place.
struct DspConfig {
  std::size_t welch_window = 256;
  double welch_overlap = 0.5;
  double alpha_low_hz = 8.0;
  double alpha_high_hz = 12.0;

  double blink_lowpass_hz = 5.0;
  int blink_order = 4;
  double blink_k = 6.0;
  double blink_refractory_s = 0.25;

  double chew_low_hz = 8.0;
  double chew_high_hz = 40.0;
  int chew_order = 8;
  double chew_window_s = 0.2;
  double chew_hop_s = 0.1;
  double chew_k = 5.0;
  double chew_min_duration_s = 0.2;

  double emg_low_hz = 20.0;
  double emg_high_hz = 120.0;
  int emg_order = 4;
  double emg_window_s = 0.05;
  double emg_factor = 3.0;
  double emg_min_duration_s = 0.1;
  double emg_baseline_quantile = 0.1;

  double ecg_low_hz = 5.0;
  double ecg_high_hz = 15.0;
  int ecg_order = 4;
  double ecg_integration_s = 0.15;
  double ecg_refractory_s = 0.2;
};

enum class EyeState { Closed, Open };
std::string_view to_string(EyeState s) noexcept;

struct ProtocolInterval {
  double start = 0.0;  // s
  double end = 0.0;    // s
  EyeState label = EyeState::Closed;
};

/// Alternating closed/open steps of `step_s` covering `duration_s`.
std::vector<ProtocolInterval> alternating_protocol(double duration_s, double step_s = 5.0,
                                                   EyeState first = EyeState::Closed);

struct AlphaSegment {
  double start = 0.0;
  double end = 0.0;
  double mean_alpha_power = 0.0;  // uV^2
  EyeState label = EyeState::Open;     // from the adaptive threshold
  EyeState expected = EyeState::Open;  // from the protocol
};

struct AlphaReport {
  std::vector<AlphaSegment> segments;
  double threshold = 0.0;       // geometric mean of segment powers
  double ratio = 0.0;           // mean closed / mean open alpha power
  double sequence_match = 0.0;  // fraction of segments labelled as the protocol says
};

AlphaReport score_alpha_protocol(std::span<const double> x, double fs,
                                 std::span<const ProtocolInterval> protocol,
                                 const DspConfig& config = {});

enum class EventType { Blink, Chew, EmgOnset, RPeak };
std::string_view to_string(EventType t) noexcept;

struct EventList {
  EventType kind = EventType::Blink;
  std::vector<double> times;   // s, strictly increasing
  std::vector<double> scores;  // detector-specific strength
  std::vector<std::string> warnings;

  std::size_t size() const noexcept { return times.size(); }
};

EventList detect_blinks(std::span<const double> x, double fs, const DspConfig& config = {});
EventList detect_chews(std::span<const double> x, double fs, const DspConfig& config = {});
EventList emg_envelope_onsets(std::span<const double> x, double fs, const DspConfig& config = {});

struct HeartRate {
  EventList peaks;
  std::optional<double> mean_hr;  // bpm, 60 / median RR
};

HeartRate detect_r_peaks(std::span<const double> x, double fs, const DspConfig& config = {});

double median(std::vector<double> v);
/// Median absolute deviation (unscaled).
double mad(std::span<const double> v, double center);
double quantile(std::vector<double> v, double q);

}  // namespace peeg::dsp
