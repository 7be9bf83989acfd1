#pragma once

// Frame sources for the acquisition pipeline. All three speak the same
// interface: open under a register configuration, then hand out raw 27-byte
// frames until end of stream.

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "peeg/ads1299.hpp"
#include "peeg/session.hpp"
#include "peeg/synth.hpp"

namespace peeg {

enum class BackendKind { Simulator, Replay, Hardware };
std::string_view to_string(BackendKind kind) noexcept;

struct BackendCapabilities {
  bool register_access = false;
  bool rate_change = false;       // data-rate writes while streaming
  bool paced_by_device = false;   // frames arrive on DRDY; no software pacing
};

class DeviceBackend {
 public:
  virtual ~DeviceBackend() = default;

  virtual BackendKind kind() const noexcept = 0;
  virtual BackendCapabilities capabilities() const noexcept = 0;
  virtual std::string describe() const = 0;

  /// Configuration the source dictates (a replayed session's first epoch).
  virtual std::optional<ads1299::RegisterFile> initial_config() const { return std::nullopt; }

  /// Electrode labels; "CH1".."CH8" unless the source knows better.
  virtual std::array<std::string, ads1299::kChannels> channel_labels() const;

  /// Enters continuous-read mode. Throws Errc::BackendUnavailable.
  virtual void open(const ads1299::RegisterFile& rf, std::size_t block_len) = 0;

  /// Next raw frame; nullopt at end of stream.
  virtual std::optional<ads1299::FrameBytes> read_frame() = 0;

  /// Called by the producer between frames with an already validated value.
  virtual void write_register(std::uint8_t address, std::uint8_t value) = 0;

  /// A configuration change dictated by the source, polled at block boundaries.
  virtual std::optional<ads1299::RegisterFile> take_config_change() { return std::nullopt; }

  virtual void close() {}
};

/// Renders a Scenario and quantizes it with the gains in force at open().
/// The code stream is fixed from then on: a later gain write changes how
/// the same codes convert, not the codes.
class SimulatorBackend final : public DeviceBackend {
 public:
  explicit SimulatorBackend(synth::Scenario scenario);

  BackendKind kind() const noexcept override { return BackendKind::Simulator; }
  BackendCapabilities capabilities() const noexcept override { return {true, false, false}; }
  std::string describe() const override;
  /// Station defaults at the scenario's sample rate.
  std::optional<ads1299::RegisterFile> initial_config() const override;
  std::array<std::string, ads1299::kChannels> channel_labels() const override;
  /// Throws Errc::InconsistentRate when rf's data rate is not the scenario's.
  void open(const ads1299::RegisterFile& rf, std::size_t block_len) override;
  std::optional<ads1299::FrameBytes> read_frame() override;
  void write_register(std::uint8_t address, std::uint8_t value) override;

  const synth::Scenario& scenario() const noexcept { return scenario_; }

 private:
  synth::Scenario scenario_;
  std::optional<synth::Renderer> renderer_;
  ads1299::RegisterFile registers_;
  std::array<ads1299::ConversionParams, ads1299::kChannels> quantization_{};
};

/// Plays back a recorded session, frame by frame, with its recorded epochs.
class ReplayBackend final : public DeviceBackend {
 public:
  explicit ReplayBackend(session::Session recorded);
  static std::unique_ptr<ReplayBackend> from_file(const std::filesystem::path& path);

  BackendKind kind() const noexcept override { return BackendKind::Replay; }
  BackendCapabilities capabilities() const noexcept override { return {false, false, false}; }
  std::string describe() const override;
  std::optional<ads1299::RegisterFile> initial_config() const override;
  std::array<std::string, ads1299::kChannels> channel_labels() const override;
  /// Throws Errc::BackendUnavailable when a recorded epoch does not start on
  /// a multiple of block_len (the change could not be applied in place).
  void open(const ads1299::RegisterFile& rf, std::size_t block_len) override;
  std::optional<ads1299::FrameBytes> read_frame() override;
  void write_register(std::uint8_t address, std::uint8_t value) override;
  std::optional<ads1299::RegisterFile> take_config_change() override;

  const session::Session& recorded() const noexcept { return session_; }

 private:
  session::Session session_;
  std::size_t block_ = 0;
  std::size_t sample_ = 0;     // within blocks[block_]
  std::uint64_t position_ = 0; // samples handed out
  std::size_t epoch_index_ = 0;
};

/// SPI bus and GPIO lines of the shield on the 40-pin header. Pin numbers
/// are taken as given; nothing here checks them against a board.
struct HardwareConfig {
  std::string spi_device = "/dev/spidev0.0";
  std::uint32_t spi_speed_hz = 2'000'000;
  std::string gpio_chip = "/dev/gpiochip0";
  int drdy_line = 26;
  int reset_line = -1;  // -1: no reset line, use the RESET opcode
  int drdy_timeout_ms = 1000;
};

HardwareConfig hardware_config_from_json(std::string_view text);
HardwareConfig load_hardware_config(const std::filesystem::path& path);

/// Throws Errc::BackendUnavailable when built without hardware support or
/// when the devices cannot be opened.
std::unique_ptr<DeviceBackend> make_hardware_backend(const HardwareConfig& config);

/// Parses "sim:<name|scenario.json>", "replay:<session.peeg>" or
/// "hw:<config.json>".
std::unique_ptr<DeviceBackend> make_backend(std::string_view spec, std::uint64_t seed = 1);

}  // namespace peeg
