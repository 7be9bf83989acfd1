#pragma once

// Generated by tests/oracles/gen_oracles.py (scipy 1.15.3). Do not edit.

#include <array>
#include <cmath>

#include "peeg/dsp.hpp"

namespace oracle {

inline double test_signal(std::size_t k) {
  return 10.0 * std::sin(2.0 * 3.141592653589793 * 10.0 * static_cast<double>(k) / 250.0) +
         5.0 * (static_cast<double>((k * 7919) % 101) - 50.0) / 50.0 + 3.0;
}

inline constexpr std::array<double, 13> kFreqs = {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 40.0, 45.0, 50.0, 60.0, 100.0};

struct FilterOracle {
  const char* name;
  peeg::dsp::FilterSpec spec;
  std::array<double, 13> gain_db;
};

inline const std::array<FilterOracle, 5> kFilters = {{
    {"bandpass_1_40_o4", {peeg::dsp::FilterKind::Bandpass, 1.0, 40.0, 4, 250.0}, {-40.39904708414351, -12.590096140584457, -3.0102999566390123, -0.19814402014158716, -0.00025226654624237415, -0.0013735718730913421, -0.14317526764284833, -0.9566134736612119, -3.010299956639815, -4.498741922517388, -6.205879147768494, -10.021317395649811, -30.315284105515094}},
    {"notch_48_52_o4", {peeg::dsp::FilterKind::Notch, 48.0, 52.0, 4, 250.0}, {-2.892982399659862e-15, -3.051132104175136e-12, -4.886343705785905e-11, -7.851766385074393e-10, -3.159769674292203e-08, -5.635808655516884e-07, -1.450790313659103e-05, -0.00019712939152769716, -0.005375909355376353, -0.10050060790503593, -83.5157058958236, -0.007454690441556874, -2.1221455322491606e-06}},
    {"lowpass_5_o4", {peeg::dsp::FilterKind::Lowpass, 0.0, 5.0, 4, 250.0}, {-1.6007835944784715e-13, -4.2978880488881416e-08, -1.1006020929369484e-05, -0.0028201913634703555, -3.010299956639817, -24.236600218268634, -48.86160098260603, -63.90914750445718, -75.31336086019084, -80.30090963996327, -85.00073094833225, -93.91540773638553, -135.157764594596}},
    {"highpass_0p5_o2", {peeg::dsp::FilterKind::Highpass, 0.5, 0.0, 2, 250.0}, {-27.965962442958983, -3.0102999566417754, -0.2632490465780878, -0.01691824073778852, -0.0004320136093702605, -2.6577117661371985e-05, -1.5575490224900834e-06, -2.754620217701614e-07, -7.410559309916488e-08, -4.1732421658015366e-08, -2.429307816729388e-08, -8.704598313951576e-09, -7.544898098345689e-11}},
    {"bandpass_8_40_o8", {peeg::dsp::FilterKind::Bandpass, 8.0, 40.0, 8, 250.0}, {-159.40632381294253, -103.46453021851744, -79.30641405907049, -54.91944164585715, -20.90645244581593, -0.23403408369662218, -2.0135337854207412e-08, -0.048129535603691764, -3.0102999566398223, -7.69307135175302, -13.09240694837724, -23.408152307549276, -66.68321278851005}},
}};

inline constexpr std::size_t kFiltfiltLen = 600;
inline constexpr std::array<std::size_t, 9> kFiltfiltIdx = {0, 1, 5, 50, 123, 300, 451, 598, 599};
inline constexpr std::array<double, 9> kFiltfiltBandpass = {-3.4862448925625857, 2.270219713048065, 9.869069295114897, 1.0977623734161543, -3.978965439150067, 0.561352130636313, 0.7668310786753052, 5.12552692821806, 4.970036829957599};
inline constexpr std::array<double, 9> kCausalBandpass = {-0.27916512457259374, -0.10360698168955007, 9.662036143493353, -1.793754009002468, -7.057779930892832, -0.27600350535777496, 0.5732825946167028, -4.9783632309599435, -3.5666777227429503};

inline constexpr std::size_t kWelchLen = 2048;
inline constexpr std::array<std::size_t, 9> kWelchBins = {0, 1, 2, 10, 11, 20, 64, 100, 128};
inline constexpr std::array<double, 9> kWelchPsd = {6.143781767573069, 3.072347150219675, 0.0033106838965397834, 31.436756976326752, 15.627555866260566, 0.003234212058117291, 0.03306146149837073, 0.000915814319751054, 0.0014218799312018234};

}  // namespace oracle
