#include "peeg/backends.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace peeg {

std::string_view to_string(BackendKind kind) noexcept {
  switch (kind) {
    case BackendKind::Simulator: return "simulator";
    case BackendKind::Replay: return "replay";
    case BackendKind::Hardware: return "hardware";
  }
  return "unknown";
}

std::array<std::string, ads1299::kChannels> DeviceBackend::channel_labels() const {
  std::array<std::string, ads1299::kChannels> labels;
  for (std::size_t ch = 0; ch < labels.size(); ++ch) labels[ch] = "CH" + std::to_string(ch + 1);
  return labels;
}

namespace {

ads1299::RegisterFile with_rate(ads1299::RegisterFile rf, int fs) {
  const auto field = ads1299::rate_field(fs);
  if (!field) throw Error(Errc::UnsupportedRate, std::to_string(fs) + " SPS");
  const auto addr = ads1299::addr(ads1299::Reg::Config1);
  rf.write(addr, static_cast<std::uint8_t>((rf.read(addr) & ~0x07) | *field));
  return rf;
}

}  // namespace

// --- simulator -------------------------------------------------------------

SimulatorBackend::SimulatorBackend(synth::Scenario scenario) : scenario_(std::move(scenario)) {
  synth::validate(scenario_);
}

std::string SimulatorBackend::describe() const {
  return "simulator:" + scenario_.name + " (" + std::to_string(scenario_.fs) + " SPS, seed " +
         std::to_string(scenario_.seed) + ")";
}

std::optional<ads1299::RegisterFile> SimulatorBackend::initial_config() const {
  return with_rate(ads1299::RegisterFile{}, scenario_.fs);
}

std::array<std::string, ads1299::kChannels> SimulatorBackend::channel_labels() const {
  std::array<std::string, ads1299::kChannels> labels;
  for (std::size_t ch = 0; ch < labels.size(); ++ch) labels[ch] = scenario_.channels[ch].label;
  return labels;
}

void SimulatorBackend::open(const ads1299::RegisterFile& rf, std::size_t /*block_len*/) {
  if (rf.sample_rate() != scenario_.fs) {
    throw Error(Errc::InconsistentRate, "scenario renders at " + std::to_string(scenario_.fs) +
                                            " SPS, registers ask for " + std::to_string(rf.sample_rate()));
  }
  registers_ = rf;
  for (std::size_t ch = 0; ch < ads1299::kChannels; ++ch) {
    quantization_[ch] = {ads1299::kDefaultVref, rf.gain_of(ch)};
  }
  renderer_.emplace(scenario_);
}

std::optional<ads1299::FrameBytes> SimulatorBackend::read_frame() {
  if (!renderer_ || renderer_->done()) return std::nullopt;
  const std::size_t n = renderer_->position();
  const auto uv = renderer_->next();
  ads1299::DataFrame frame;
  frame.status = ads1299::make_status(registers_.read(ads1299::addr(ads1299::Reg::LoffStatP)),
                                      registers_.read(ads1299::addr(ads1299::Reg::LoffStatN)), 0);
  for (std::size_t ch = 0; ch < ads1299::kChannels; ++ch) {
    if (registers_.powered_down(ch)) continue;
    switch (registers_.input_mux(ch)) {
      case ads1299::InputMux::Normal:
        frame.codes[ch] = ads1299::microvolts_to_code(uv[ch], quantization_[ch]);
        break;
      case ads1299::InputMux::TestSignal: {
        // Internal test signal: +-(VREF / 2.4) mV square wave near 1 Hz.
        const double amp = ads1299::kDefaultVref / 2.4 * 1e3;
        const bool high = std::fmod(static_cast<double>(n) / scenario_.fs, 1.0) < 0.5;
        frame.codes[ch] = ads1299::microvolts_to_code(high ? amp : -amp, quantization_[ch]);
        break;
      }
      default:
        break;  // shorted and supply measurements read as zero here
    }
  }
  return ads1299::encode_frame(frame);
}

void SimulatorBackend::write_register(std::uint8_t address, std::uint8_t value) {
  if (address == ads1299::addr(ads1299::Reg::Config1) &&
      ads1299::rate_from_field(value & 0x07) != scenario_.fs) {
    throw Error(Errc::Unsupported, "the simulator cannot change its data rate while streaming");
  }
  registers_.write(address, value);
}

// --- replay ----------------------------------------------------------------

ReplayBackend::ReplayBackend(session::Session recorded) : session_(std::move(recorded)) {
  if (session_.epochs.empty() && !session_.blocks.empty()) {
    throw Error(Errc::BackendUnavailable, "recorded session has no register epochs");
  }
}

std::unique_ptr<ReplayBackend> ReplayBackend::from_file(const std::filesystem::path& path) {
  return std::make_unique<ReplayBackend>(session::read_session(path));
}

std::string ReplayBackend::describe() const {
  return "replay (" + std::to_string(session_.blocks.size()) + " blocks, " +
         std::to_string(session_.header.fs) + " SPS)";
}

std::optional<ads1299::RegisterFile> ReplayBackend::initial_config() const {
  if (session_.epochs.empty()) return session_.header.registers;
  return session_.epochs.front().registers;
}

std::array<std::string, ads1299::kChannels> ReplayBackend::channel_labels() const {
  return session_.header.channel_labels;
}

void ReplayBackend::open(const ads1299::RegisterFile& /*rf*/, std::size_t block_len) {
  for (const auto& e : session_.epochs) {
    if (block_len == 0 || e.first_sample % block_len != 0) {
      throw Error(Errc::BackendUnavailable,
                  "recorded epoch " + std::to_string(e.id) + " starts at sample " +
                      std::to_string(e.first_sample) + ", not a multiple of block length " +
                      std::to_string(block_len));
    }
  }
  block_ = 0;
  sample_ = 0;
  position_ = 0;
  epoch_index_ = 0;
}

std::optional<ads1299::FrameBytes> ReplayBackend::read_frame() {
  while (block_ < session_.blocks.size() && sample_ >= session_.blocks[block_].block_len) {
    ++block_;
    sample_ = 0;
  }
  if (block_ >= session_.blocks.size()) return std::nullopt;
  const auto& b = session_.blocks[block_];
  ads1299::DataFrame frame;
  for (std::size_t ch = 0; ch < ads1299::kChannels; ++ch) frame.codes[ch] = b.codes[ch * b.block_len + sample_];
  ++sample_;
  ++position_;
  return ads1299::encode_frame(frame);
}

void ReplayBackend::write_register(std::uint8_t, std::uint8_t) {
  throw Error(Errc::Unsupported, "a replayed session has no registers to write");
}

std::optional<ads1299::RegisterFile> ReplayBackend::take_config_change() {
  if (epoch_index_ + 1 < session_.epochs.size() &&
      session_.epochs[epoch_index_ + 1].first_sample <= position_) {
    ++epoch_index_;
    return session_.epochs[epoch_index_].registers;
  }
  return std::nullopt;
}

// --- factory ---------------------------------------------------------------

HardwareConfig hardware_config_from_json(std::string_view text) {
  HardwareConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.spi_device = j.value("spi_device", c.spi_device);
    c.spi_speed_hz = j.value("spi_speed_hz", c.spi_speed_hz);
    c.gpio_chip = j.value("gpio_chip", c.gpio_chip);
    c.drdy_line = j.value("drdy_line", c.drdy_line);
    c.reset_line = j.value("reset_line", c.reset_line);
    c.drdy_timeout_ms = j.value("drdy_timeout_ms", c.drdy_timeout_ms);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BackendUnavailable, std::string("hardware config: ") + e.what());
  }
  if (c.drdy_line < 0 || c.spi_speed_hz == 0 || c.drdy_timeout_ms <= 0) {
    throw Error(Errc::BackendUnavailable, "hardware config: invalid line, speed or timeout");
  }
  return c;
}

HardwareConfig load_hardware_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return hardware_config_from_json(ss.str());
}

std::unique_ptr<DeviceBackend> make_backend(std::string_view spec, std::uint64_t seed) {
  const auto colon = spec.find(':');
  const std::string_view kind = spec.substr(0, colon);
  const std::string arg = colon == std::string_view::npos ? std::string{} : std::string(spec.substr(colon + 1));
  if (kind == "sim") {
    const std::string name = arg.empty() ? "fig6" : arg;
    if (name.ends_with(".json")) {
      auto s = synth::load_scenario(name);
      return std::make_unique<SimulatorBackend>(std::move(s));
    }
    return std::make_unique<SimulatorBackend>(synth::named_scenario(name, seed));
  }
  if (kind == "replay") {
    if (arg.empty()) throw Error(Errc::BackendUnavailable, "replay needs a session file");
    return ReplayBackend::from_file(arg);
  }
  if (kind == "hw") {
    return make_hardware_backend(arg.empty() ? HardwareConfig{} : load_hardware_config(arg));
  }
  throw Error(Errc::BackendUnavailable, "unknown backend '" + std::string(spec) + "' (sim:, replay:, hw:)");
}

}  // namespace peeg
