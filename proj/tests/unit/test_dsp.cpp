#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "peeg/dsp.hpp"
#include "peeg/error.hpp"
#include "peeg/synth.hpp"

using namespace peeg;
using namespace peeg::dsp;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::Remote;
}

std::vector<double> sine(double hz, double amp, double fs, std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / fs);
  return x;
}

std::vector<double> white(std::size_t n, std::uint64_t seed, double sigma = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, sigma);
  std::vector<double> x(n);
  for (auto& v : x) v = d(rng);
  return x;
}

std::vector<double> test_signal(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = oracle::test_signal(i);
  return x;
}

bool matched(const std::vector<double>& found, const std::vector<double>& truth, double tol) {
  if (found.size() != truth.size()) return false;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (std::abs(found[i] - truth[i]) > tol) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("dsp") {
  TEST_CASE("filter responses match the reference design") {
    for (const auto& o : oracle::kFilters) {
      CAPTURE(o.name);
      const auto f = design_filter(o.spec);
      CHECK(f.max_pole_radius() < 1.0);
      for (std::size_t i = 0; i < oracle::kFreqs.size(); ++i) {
        CAPTURE(oracle::kFreqs[i]);
        const double want = o.gain_db[i];
        CHECK(f.gain_db(oracle::kFreqs[i]) == doctest::Approx(want).epsilon(1e-6).scale(1.0));
      }
    }
  }

  TEST_CASE("bandpass 1-40 order 4 design targets") {
    const auto f = design_filter({FilterKind::Bandpass, 1.0, 40.0, 4, 250.0});
    CHECK(std::abs(f.gain_db(20.0)) <= 1.0);
    CHECK(f.gain_db(0.1) < -20.0);
    CHECK(f.gain_db(100.0) < -20.0);
  }

  TEST_CASE("notch 50") {
    const auto f = design_filter({FilterKind::Notch, 48.0, 52.0, 4, 250.0});
    CHECK(f.gain_db(50.0) <= -30.0);
    CHECK(f.gain_db(45.0) >= -3.0);
  }

  TEST_CASE("design errors") {
    CHECK(code_of([] { design_filter({FilterKind::Bandpass, 1.0, 125.0, 4, 250.0}); }) == Errc::NyquistViolation);
    CHECK(code_of([] { design_filter({FilterKind::Lowpass, 0.0, 130.0, 4, 250.0}); }) == Errc::NyquistViolation);
    CHECK(code_of([] { design_filter({FilterKind::Bandpass, 40.0, 1.0, 4, 250.0}); }) == Errc::InvalidFilter);
    CHECK(code_of([] { design_filter({FilterKind::Lowpass, 0.0, 10.0, 3, 250.0}); }) == Errc::InvalidFilter);
    CHECK(code_of([] { design_filter({FilterKind::Highpass, 0.0, 0.0, 2, 250.0}); }) == Errc::InvalidFilter);
  }

  TEST_CASE("causal and zero-phase filtering match the reference") {
    const auto f = design_filter({FilterKind::Bandpass, 1.0, 40.0, 4, 250.0});
    const auto x = test_signal(oracle::kFiltfiltLen);
    const auto y = filtfilt(f, x);
    const auto yc = filter(f, x);
    for (std::size_t k = 0; k < oracle::kFiltfiltIdx.size(); ++k) {
      const auto i = oracle::kFiltfiltIdx[k];
      CAPTURE(i);
      CHECK(y[i] == doctest::Approx(oracle::kFiltfiltBandpass[k]).epsilon(1e-7));
      CHECK(yc[i] == doctest::Approx(oracle::kCausalBandpass[k]).epsilon(1e-7));
    }
  }

  TEST_CASE("streaming filter equals batch filter") {
    const auto f = design_filter({FilterKind::Lowpass, 0.0, 5.0, 4, 250.0});
    const auto x = white(1000, 3);
    const auto batch = filter(f, x);
    StreamingFilter s(f);
    for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(s.process(x[i]) == doctest::Approx(batch[i]).epsilon(1e-12));
    s.reset();
    CHECK(s.process(x[0]) == doctest::Approx(batch[0]));
  }

  TEST_CASE("welch matches the reference estimator") {
    const auto x = test_signal(oracle::kWelchLen);
    const auto s = welch_psd(x, 250.0, 256, 0.5);
    CHECK(s.segments == 15);
    REQUIRE(s.psd.size() == 129);
    for (std::size_t k = 0; k < oracle::kWelchBins.size(); ++k) {
      CAPTURE(oracle::kWelchBins[k]);
      CHECK(s.psd[oracle::kWelchBins[k]] == doctest::Approx(oracle::kWelchPsd[k]).epsilon(1e-9));
    }
  }

  TEST_CASE("welch of a 10 Hz sine") {
    const auto x = sine(10.0, 20.0, 250.0, 2048);
    const auto s = welch_psd(x, 250.0, 256, 0.5);
    const auto peak = std::max_element(s.psd.begin(), s.psd.end()) - s.psd.begin();
    CHECK(std::abs(s.freqs[static_cast<std::size_t>(peak)] - 10.0) <= 0.5);
    const double in_band = bandpower(s, 8.0, 12.0);
    CHECK(in_band == doctest::Approx(200.0).epsilon(0.05));
    CHECK(bandpower(s, 15.0, 20.0) <= 0.01 * in_band);
  }

  TEST_CASE("welch integral equals variance for white noise") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto x = white(250 * 60, seed, 7.0);
      const auto s = welch_psd(x, 250.0);
      CHECK(bandpower(s, 0.0, 125.0) == doctest::Approx(49.0).epsilon(0.10));
    }
  }

  TEST_CASE("constant signal") {
    const std::vector<double> x(1024, 3.0);
    const auto s = welch_psd(x, 250.0);
    const auto peak = std::max_element(s.psd.begin(), s.psd.end()) - s.psd.begin();
    CHECK(peak == 0);
    for (std::size_t k = 2; k < s.psd.size(); ++k) CHECK(s.psd[k] == doctest::Approx(0.0).scale(1.0));
    double total = 0.0;
    for (double p : s.psd) total += p * (s.freqs[1] - s.freqs[0]);
    CHECK(total == doctest::Approx(9.0).epsilon(1e-9));
  }

  TEST_CASE("spectrum errors") {
    const std::vector<double> x(100, 0.0);
    CHECK(code_of([&] { welch_psd(x, 250.0, 256); }) == Errc::TooShort);
    const auto s = welch_psd(std::vector<double>(512, 1.0), 250.0);
    CHECK(code_of([&] { bandpower(s, 10.0, 10.0); }) == Errc::BadBand);
    CHECK(code_of([&] { bandpower(s, 10.0, 200.0); }) == Errc::BadBand);
  }

  TEST_CASE("alpha protocol on fig6") {
    const auto r = synth::render(synth::fig6_scenario(1));
    const auto protocol = alternating_protocol(30.0);
    CHECK(protocol.size() == 6);
    const auto report = score_alpha_protocol(r.channels[0], 250.0, protocol);
    CHECK(report.sequence_match >= 0.9);
    CHECK(report.ratio >= 2.0);
    CHECK(code_of([&] { score_alpha_protocol(r.channels[0], 250.0, std::vector<ProtocolInterval>{}); }) ==
          Errc::TooShort);
  }

  TEST_CASE("alpha protocol on noise is near chance") {
    double match_sum = 0.0;
    const int trials = 10;
    for (int seed = 1; seed <= trials; ++seed) {
      const auto r = synth::render(synth::noise_scenario(30.0, 250, static_cast<std::uint64_t>(seed)));
      const auto report = score_alpha_protocol(r.channels[0], 250.0, alternating_protocol(30.0));
      CHECK(report.ratio >= 0.5);
      CHECK(report.ratio <= 2.0);
      match_sum += report.sequence_match;
    }
    CHECK(match_sum / trials == doctest::Approx(0.5).epsilon(0.5));
  }

  TEST_CASE("blinks and chews on fig7") {
    const auto s = synth::fig7_scenario(1);
    const auto r = synth::render(s);
    const auto blinks = detect_blinks(r.channels[0], 250.0);
    CHECK(matched(blinks.times, r.truth.blink_apexes, 0.050));
    const auto chews = detect_chews(r.channels[0], 250.0);
    CHECK(chews.size() == 10);
    CHECK(matched(chews.times, r.truth.chew_centers, 0.25));
  }

  TEST_CASE("blink detector false positives on noise") {
    int clean = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const auto r = synth::render(synth::noise_scenario(20.0, 250, seed));
      if (detect_blinks(r.channels[0], 250.0).size() == 0) ++clean;
    }
    CHECK(clean >= 95);
  }

  TEST_CASE("blink-only scenario has no chews") {
    auto s = synth::fig7_scenario(2);
    std::erase_if(s.events, [](const auto& e) { return e.kind == synth::EventKind::Chew; });
    const auto r = synth::render(s);
    CHECK(detect_chews(r.channels[0], 250.0).size() == 0);
    CHECK(detect_blinks(r.channels[0], 250.0).size() == 9);
  }

  TEST_CASE("flat signals produce no events") {
    const std::vector<double> flat(250 * 10, 0.0);
    CHECK(detect_blinks(flat, 250.0).size() == 0);
    CHECK(detect_chews(flat, 250.0).size() == 0);
    CHECK(emg_envelope_onsets(flat, 250.0).size() == 0);
    const auto hr = detect_r_peaks(flat, 250.0);
    CHECK(hr.peaks.size() == 0);
    CHECK(!hr.mean_hr.has_value());
  }

  TEST_CASE("EMG onsets") {
    const auto r = synth::render(synth::emg_scenario(1));
    const auto on = emg_envelope_onsets(r.channels[0], 250.0);
    CHECK(matched(on.times, r.truth.emg_onsets, 0.100));

    auto tonic = synth::emg_scenario(1);
    tonic.events = {{synth::EventKind::EmgBurst, 5.0, 25.0, 100.0, 0.0, 0.0}};
    const auto rt = synth::render(tonic);
    CHECK(emg_envelope_onsets(rt.channels[0], 250.0).size() == 1);
  }

  TEST_CASE("ECG heart rate") {
    const auto r60 = synth::render(synth::ecg_scenario(60.0, 1));
    std::size_t ch = 0;
    for (std::size_t i = 0; i < synth::kChannels; ++i) {
      if (synth::ecg_scenario().channels[i].label.starts_with("ECG")) {
        ch = i;
        break;
      }
    }
    const auto hr60 = detect_r_peaks(r60.channels[ch], 250.0);
    CHECK(hr60.peaks.size() >= 29);
    CHECK(hr60.peaks.size() <= 31);
    REQUIRE(hr60.mean_hr.has_value());
    CHECK(std::abs(*hr60.mean_hr - 60.0) <= 1.0);
    const auto r120 = synth::render(synth::ecg_scenario(120.0, 1));
    const auto hr120 = detect_r_peaks(r120.channels[ch], 250.0);
    REQUIRE(hr120.mean_hr.has_value());
    CHECK(std::abs(*hr120.mean_hr - 120.0) <= 2.0);
  }

  TEST_CASE("detectors are deterministic") {
    const auto r = synth::render(synth::fig7_scenario(5));
    const auto a = detect_blinks(r.channels[0], 250.0);
    const auto b = detect_blinks(r.channels[0], 250.0);
    CHECK(a.times == b.times);
    CHECK(a.scores == b.scores);
  }

  TEST_CASE("statistics helpers") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0, 100.0};
    CHECK(mad(v, 3.0) == 1.0);
    CHECK(quantile({0.0, 10.0}, 0.5) == 5.0);
    CHECK(quantile({0.0, 10.0, 20.0}, 0.0) == 0.0);
  }
}
