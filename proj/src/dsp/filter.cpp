#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "peeg/dsp.hpp"
#include "peeg/error.hpp"

namespace peeg::dsp {
namespace {

using cplx = std::complex<double>;

constexpr double kStabilityMargin = 1e-6;
constexpr double kImagEps = 1e-12;

double prewarp(double hz, double fs) { return 2.0 * fs * std::tan(std::numbers::pi * hz / fs); }

cplx bilinear(cplx s, double fs) { return (2.0 * fs + s) / (2.0 * fs - s); }

std::vector<cplx> prototype_poles(int n) {
  std::vector<cplx> poles;
  for (int k = 0; k < n; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + n + 1) / (2.0 * n);
    poles.push_back(std::polar(1.0, theta));
  }
  return poles;
}

// Groups roots into conjugate pairs, then pairs leftover real roots.
std::vector<std::pair<cplx, cplx>> pair_roots(std::vector<cplx> roots) {
  std::vector<std::pair<cplx, cplx>> pairs;
  std::vector<double> reals;
  for (const auto& r : roots) {
    if (std::abs(r.imag()) <= kImagEps * std::max(1.0, std::abs(r))) {
      reals.push_back(r.real());
    } else if (r.imag() > 0) {
      pairs.emplace_back(r, std::conj(r));
    }
  }
  std::sort(reals.begin(), reals.end());
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) pairs.emplace_back(reals[i], reals[i + 1]);
  if (reals.size() % 2) pairs.emplace_back(reals.back(), 0.0);
  return pairs;
}

void check(const FilterSpec& spec) {
  const double nyquist = spec.fs / 2.0;
  if (!(spec.fs > 0.0)) throw Error(Errc::InvalidFilter, "fs must be positive");
  if (spec.order < 2 || spec.order % 2 != 0) {
    throw Error(Errc::InvalidFilter, "order must be even and >= 2, got " + std::to_string(spec.order));
  }
  auto edge = [&](double hz, const char* name) {
    if (hz >= nyquist) {
      throw Error(Errc::NyquistViolation, std::string(name) + " " + std::to_string(hz) +
                                              " Hz >= fs/2 = " + std::to_string(nyquist) + " Hz");
    }
    if (!(hz > 0.0)) throw Error(Errc::InvalidFilter, std::string(name) + " must be positive");
  };
  switch (spec.kind) {
    case FilterKind::Lowpass: edge(spec.high_hz, "high_hz"); break;
    case FilterKind::Highpass: edge(spec.low_hz, "low_hz"); break;
    case FilterKind::Bandpass:
    case FilterKind::Notch:
      edge(spec.high_hz, "high_hz");
      edge(spec.low_hz, "low_hz");
      if (!(spec.low_hz < spec.high_hz)) throw Error(Errc::InvalidFilter, "low_hz must be below high_hz");
      break;
  }
}

}  // namespace

std::complex<double> FilterCoefficients::response(double hz) const {
  const cplx z1 = std::polar(1.0, -2.0 * std::numbers::pi * hz / fs);
  const cplx z2 = z1 * z1;
  cplx h = 1.0;
  for (const auto& s : sections) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return h;
}

double FilterCoefficients::gain_db(double hz) const { return 20.0 * std::log10(std::abs(response(hz))); }

double FilterCoefficients::max_pole_radius() const {
  double r = 0.0;
  for (const auto& s : sections) {
    // Roots of z^2 + a1 z + a2.
    const cplx disc = std::sqrt(cplx(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
    r = std::max({r, std::abs((-s.a1 + disc) / 2.0), std::abs((-s.a1 - disc) / 2.0)});
  }
  return r;
}

FilterCoefficients design_filter(const FilterSpec& spec) {
  check(spec);
  const double fs = spec.fs;
  const bool band = spec.kind == FilterKind::Bandpass || spec.kind == FilterKind::Notch;
  const int proto_order = band ? spec.order / 2 : spec.order;
  const auto proto = prototype_poles(proto_order);

  std::vector<cplx> poles;
  std::vector<cplx> zeros;
  double ref_hz = 0.0;

  switch (spec.kind) {
    case FilterKind::Lowpass: {
      const double wc = prewarp(spec.high_hz, fs);
      for (auto p : proto) poles.push_back(bilinear(wc * p, fs));
      zeros.assign(poles.size(), -1.0);
      ref_hz = 0.0;
      break;
    }
    case FilterKind::Highpass: {
      const double wc = prewarp(spec.low_hz, fs);
      for (auto p : proto) poles.push_back(bilinear(wc / p, fs));
      zeros.assign(poles.size(), 1.0);
      ref_hz = fs / 2.0;
      break;
    }
    case FilterKind::Bandpass:
    case FilterKind::Notch: {
      const double w1 = prewarp(spec.low_hz, fs);
      const double w2 = prewarp(spec.high_hz, fs);
      const double bw = w2 - w1;
      const double w0 = std::sqrt(w1 * w2);
      for (auto p : proto) {
        const cplx c = spec.kind == FilterKind::Bandpass ? p * bw : bw / p;
        const cplx disc = std::sqrt(c * c - 4.0 * w0 * w0);
        poles.push_back(bilinear((c + disc) / 2.0, fs));
        poles.push_back(bilinear((c - disc) / 2.0, fs));
      }
      if (spec.kind == FilterKind::Bandpass) {
        for (int i = 0; i < proto_order; ++i) {
          zeros.push_back(1.0);
          zeros.push_back(-1.0);
        }
        ref_hz = fs / std::numbers::pi * std::atan(w0 / (2.0 * fs));
      } else {
        const cplx zn = bilinear(cplx(0.0, w0), fs);
        for (int i = 0; i < proto_order; ++i) {
          zeros.push_back(zn);
          zeros.push_back(std::conj(zn));
        }
        ref_hz = 0.0;
      }
      break;
    }
  }

  auto pole_pairs = pair_roots(poles);
  std::vector<std::pair<cplx, cplx>> zero_pairs;
  if (spec.kind == FilterKind::Bandpass) {
    for (int i = 0; i < proto_order; ++i) zero_pairs.emplace_back(1.0, -1.0);
  } else {
    zero_pairs = pair_roots(zeros);
  }
  if (zero_pairs.size() != pole_pairs.size()) {
    throw Error(Errc::UnstableDesign, "section pairing failed");
  }

  FilterCoefficients out;
  out.fs = fs;
  for (std::size_t i = 0; i < pole_pairs.size(); ++i) {
    const auto [p1, p2] = pole_pairs[i];
    const auto [z1, z2] = zero_pairs[i];
    Biquad s;
    s.b0 = 1.0;
    s.b1 = -(z1 + z2).real();
    s.b2 = (z1 * z2).real();
    s.a1 = -(p1 + p2).real();
    s.a2 = (p1 * p2).real();
    out.sections.push_back(s);
  }

  const double mag = std::abs(out.response(ref_hz));
  if (!(mag > 0.0) || !std::isfinite(mag)) throw Error(Errc::UnstableDesign, "degenerate gain");
  const double per_section = std::pow(1.0 / mag, 1.0 / static_cast<double>(out.sections.size()));
  for (auto& s : out.sections) {
    s.b0 *= per_section;
    s.b1 *= per_section;
    s.b2 *= per_section;
  }

  if (out.max_pole_radius() >= 1.0 - kStabilityMargin) {
    throw Error(Errc::UnstableDesign, "pole radius " + std::to_string(out.max_pole_radius()));
  }
  return out;
}

namespace {

void run_cascade(const FilterCoefficients& f, std::vector<double>& y, std::vector<double>& z1,
                 std::vector<double>& z2) {
  for (std::size_t k = 0; k < f.sections.size(); ++k) {
    const Biquad& s = f.sections[k];
    double a = z1[k], b = z2[k];
    for (double& v : y) {
      const double x = v;
      const double out = s.b0 * x + a;
      a = s.b1 * x - s.a1 * out + b;
      b = s.b2 * x - s.a2 * out;
      v = out;
    }
    z1[k] = a;
    z2[k] = b;
  }
}

// Steady-state section states for a unit step at the cascade input.
void step_states(const FilterCoefficients& f, std::vector<double>& z1, std::vector<double>& z2) {
  double in = 1.0;
  for (std::size_t k = 0; k < f.sections.size(); ++k) {
    const Biquad& s = f.sections[k];
    const double dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    const double out = dc * in;
    z2[k] = s.b2 * in - s.a2 * out;
    z1[k] = s.b1 * in - s.a1 * out + z2[k];
    in = out;
  }
}

}  // namespace

std::vector<double> filter(const FilterCoefficients& f, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  std::vector<double> z1(f.sections.size(), 0.0), z2(f.sections.size(), 0.0);
  run_cascade(f, y, z1, z2);
  return y;
}

std::vector<double> filtfilt(const FilterCoefficients& f, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  const std::size_t pad = std::min<std::size_t>(3 * (2 * f.sections.size() + 1), n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  std::vector<double> zi1(f.sections.size()), zi2(f.sections.size());
  step_states(f, zi1, zi2);

  auto pass = [&](std::vector<double>& y) {
    std::vector<double> z1(zi1), z2(zi2);
    for (auto& v : z1) v *= y.front();
    for (auto& v : z2) v *= y.front();
    run_cascade(f, y, z1, z2);
  };

  pass(ext);
  std::reverse(ext.begin(), ext.end());
  pass(ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

StreamingFilter::StreamingFilter(FilterCoefficients coefficients)
    : coeffs_(std::move(coefficients)),
      z1_(coeffs_.sections.size(), 0.0),
      z2_(coeffs_.sections.size(), 0.0) {}

double StreamingFilter::process(double x) {
  for (std::size_t k = 0; k < coeffs_.sections.size(); ++k) {
    const Biquad& s = coeffs_.sections[k];
    const double out = s.b0 * x + z1_[k];
    z1_[k] = s.b1 * x - s.a1 * out + z2_[k];
    z2_[k] = s.b2 * x - s.a2 * out;
    x = out;
  }
  return x;
}

void StreamingFilter::reset() {
  std::fill(z1_.begin(), z1_.end(), 0.0);
  std::fill(z2_.begin(), z2_.end(), 0.0);
}

}  // namespace peeg::dsp
