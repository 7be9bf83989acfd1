"""Regenerates tests/unit/oracles.hpp from scipy reference implementations.

    python3 tests/oracles/gen_oracles.py > tests/unit/oracles.hpp
"""
import numpy as np
from scipy import signal

FS = 250.0
FREQS = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 40.0, 45.0, 50.0, 60.0, 100.0]

# (name, scipy design, FilterSpec fields)
DESIGNS = [
    ("bandpass_1_40_o4", signal.butter(2, [1, 40], btype="bandpass", fs=FS, output="sos"),
     "Bandpass, 1.0, 40.0, 4"),
    ("notch_48_52_o4", signal.butter(2, [48, 52], btype="bandstop", fs=FS, output="sos"),
     "Notch, 48.0, 52.0, 4"),
    ("lowpass_5_o4", signal.butter(4, 5, btype="lowpass", fs=FS, output="sos"),
     "Lowpass, 0.0, 5.0, 4"),
    ("highpass_0p5_o2", signal.butter(2, 0.5, btype="highpass", fs=FS, output="sos"),
     "Highpass, 0.5, 0.0, 2"),
    ("bandpass_8_40_o8", signal.butter(4, [8, 40], btype="bandpass", fs=FS, output="sos"),
     "Bandpass, 8.0, 40.0, 8"),
]


def fmt(v):
    return repr(float(v))


def test_signal(n):
    k = np.arange(n)
    return 10.0 * np.sin(2 * np.pi * 10.0 * k / FS) + 5.0 * (((k * 7919) % 101) - 50) / 50.0 + 3.0


print("#pragma once")
print("")
print("// Generated by tests/oracles/gen_oracles.py (scipy %s). Do not edit." % __import__("scipy").__version__)
print("")
print("#include <array>")
print("#include <cmath>")
print("")
print("#include \"peeg/dsp.hpp\"")
print("")
print("namespace oracle {")
print("")
print("inline double test_signal(std::size_t k) {")
print("  return 10.0 * std::sin(2.0 * 3.141592653589793 * 10.0 * static_cast<double>(k) / 250.0) +")
print("         5.0 * (static_cast<double>((k * 7919) % 101) - 50.0) / 50.0 + 3.0;")
print("}")
print("")
print("inline constexpr std::array<double, %d> kFreqs = {%s};" % (len(FREQS), ", ".join(fmt(f) for f in FREQS)))
print("")
print("struct FilterOracle {")
print("  const char* name;")
print("  peeg::dsp::FilterSpec spec;")
print("  std::array<double, %d> gain_db;" % len(FREQS))
print("};")
print("")
print("inline const std::array<FilterOracle, %d> kFilters = {{" % len(DESIGNS))
for name, sos, fields in DESIGNS:
    kind, lo, hi, order = [s.strip() for s in fields.split(",")]
    _, h = signal.sosfreqz(sos, worN=FREQS, fs=FS)
    db = 20 * np.log10(np.abs(h))
    print("    {\"%s\", {peeg::dsp::FilterKind::%s, %s, %s, %s, 250.0}, {%s}}," %
          (name, kind, lo, hi, order, ", ".join(fmt(v) for v in db)))
print("}};")
print("")

# Zero-phase filtering of test_signal(600) with the 1-40 Hz bandpass.
sos = DESIGNS[0][1]
x = test_signal(600)
padlen = 3 * (2 * len(sos) + 1)
y = signal.sosfiltfilt(sos, x, padtype="odd", padlen=padlen)
idx = [0, 1, 5, 50, 123, 300, 451, 598, 599]
print("inline constexpr std::size_t kFiltfiltLen = 600;")
print("inline constexpr std::array<std::size_t, %d> kFiltfiltIdx = {%s};" % (len(idx), ", ".join(str(i) for i in idx)))
print("inline constexpr std::array<double, %d> kFiltfiltBandpass = {%s};" % (len(idx), ", ".join(fmt(y[i]) for i in idx)))
yc = signal.sosfilt(sos, x)
print("inline constexpr std::array<double, %d> kCausalBandpass = {%s};" % (len(idx), ", ".join(fmt(yc[i]) for i in idx)))
print("")

# Welch PSD of test_signal(2048).
x = test_signal(2048)
f, p = signal.welch(x, fs=FS, window="hann", nperseg=256, noverlap=128, detrend=False,
                    scaling="density", return_onesided=True)
bins = [0, 1, 2, 10, 11, 20, 64, 100, 128]
print("inline constexpr std::size_t kWelchLen = 2048;")
print("inline constexpr std::array<std::size_t, %d> kWelchBins = {%s};" % (len(bins), ", ".join(str(b) for b in bins)))
print("inline constexpr std::array<double, %d> kWelchPsd = {%s};" % (len(bins), ", ".join(fmt(p[b]) for b in bins)))
print("")
print("}  // namespace oracle")
