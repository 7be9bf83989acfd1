#pragma once

// Software model of the ADS1299 analog front-end: register bank, SPI command
// opcodes, the 27-byte RDATAC frame and code-to-microvolt conversion.
// Bit layouts are documented in docs/registers.md.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace peeg::ads1299 {

inline constexpr std::size_t kChannels = 8;
inline constexpr std::size_t kFrameBytes = 27;
inline constexpr std::int32_t kCodeMax = 8388607;    // 2^23 - 1
inline constexpr std::int32_t kCodeMin = -8388608;   // -2^23
inline constexpr double kDefaultVref = 4.5;           // volts, internal reference
inline constexpr std::uint8_t kDeviceId = 0x3E;       // REV_ID 001, DEV_ID 11, NU_CH 110
inline constexpr std::uint32_t kStatusSyncNibble = 0xC;

/// Register addresses. The map is contiguous from 0x00 to 0x17.
enum class Reg : std::uint8_t {
  Id = 0x00,
  Config1 = 0x01,
  Config2 = 0x02,
  Config3 = 0x03,
  Loff = 0x04,
  Ch1Set = 0x05,
  Ch2Set = 0x06,
  Ch3Set = 0x07,
  Ch4Set = 0x08,
  Ch5Set = 0x09,
  Ch6Set = 0x0A,
  Ch7Set = 0x0B,
  Ch8Set = 0x0C,
  BiasSensP = 0x0D,
  BiasSensN = 0x0E,
  LoffSensP = 0x0F,
  LoffSensN = 0x10,
  LoffFlip = 0x11,
  LoffStatP = 0x12,
  LoffStatN = 0x13,
  Gpio = 0x14,
  Misc1 = 0x15,
  Misc2 = 0x16,
  Config4 = 0x17,
};

inline constexpr std::uint8_t kRegisterCount = 0x18;

constexpr std::uint8_t addr(Reg r) noexcept { return static_cast<std::uint8_t>(r); }
constexpr std::uint8_t chset_addr(std::size_t channel) noexcept {
  return static_cast<std::uint8_t>(addr(Reg::Ch1Set) + channel);
}

struct RegisterInfo {
  std::string_view name;
  std::uint8_t address;
  std::uint8_t reset_value;
  // Bits under fixed_mask must equal fixed_bits on every write.
  std::uint8_t fixed_mask;
  std::uint8_t fixed_bits;
  bool read_only;
};

std::span<const RegisterInfo> register_map() noexcept;

/// Throws Errc::UnknownRegister for addresses outside the map.
const RegisterInfo& register_info(std::uint8_t address);

// CHnSET[6:4]
inline constexpr std::array<int, 7> kGains = {1, 2, 4, 6, 8, 12, 24};
// CONFIG1[2:0], ordered by field value 000..110
inline constexpr std::array<int, 7> kDataRates = {16000, 8000, 4000, 2000, 1000, 500, 250};

std::optional<int> gain_from_field(std::uint8_t field) noexcept;
std::optional<std::uint8_t> gain_field(int gain) noexcept;
std::optional<int> rate_from_field(std::uint8_t field) noexcept;
std::optional<std::uint8_t> rate_field(int samples_per_second) noexcept;
bool is_valid_gain(int gain) noexcept;
bool is_valid_rate(int samples_per_second) noexcept;

enum class InputMux : std::uint8_t {
  Normal = 0,
  Shorted = 1,
  BiasMeasure = 2,
  Supply = 3,
  Temperature = 4,
  TestSignal = 5,
  BiasDrp = 6,
  BiasDrn = 7,
};

/// Builds a CHnSET byte.
std::uint8_t make_chset(int gain, InputMux mux = InputMux::Normal, bool power_down = false,
                        bool srb2 = false);

/// Value-semantics register bank. Every mutation goes through the same
/// validation as a device write, so a RegisterFile is always decodable.
class RegisterFile {
 public:
  /// Station defaults: 250 SPS, gain 24 on all channels, normal electrode input.
  RegisterFile();

  /// Datasheet power-on reset values (gain 24, inputs shorted, 250 SPS).
  static RegisterFile power_on_reset();

  /// Validates a full 24-byte image (e.g. loaded from a session header).
  static RegisterFile from_bytes(std::span<const std::uint8_t> image);

  std::uint8_t read(std::uint8_t address) const;

  /// Device-side write: rejects unknown, read-only and badly encoded values.
  void write(std::uint8_t address, std::uint8_t value);

  /// Status-register update as the device would report it; bypasses the
  /// read-only check.
  void set_lead_off_status(std::uint8_t statp, std::uint8_t statn) noexcept;

  int gain_of(std::size_t channel) const;
  std::array<int, kChannels> gains() const;
  int sample_rate() const;
  bool powered_down(std::size_t channel) const;
  InputMux input_mux(std::size_t channel) const;

  const std::array<std::uint8_t, kRegisterCount>& bytes() const noexcept { return regs_; }

  friend bool operator==(const RegisterFile&, const RegisterFile&) = default;

 private:
  explicit RegisterFile(const std::array<std::uint8_t, kRegisterCount>& regs) : regs_(regs) {}

  std::array<std::uint8_t, kRegisterCount> regs_{};
};

/// Pure form of RegisterFile::write.
RegisterFile write_register(const RegisterFile& rf, std::uint8_t address, std::uint8_t value);

/// Throws Errc::InvalidFieldEncoding unless `value` is acceptable at `address`.
void validate_register_value(std::uint8_t address, std::uint8_t value);

struct ConversionParams {
  double vref = kDefaultVref;
  int gain = 24;
};

void validate(const ConversionParams& p);

/// uV = code * (vref / gain) / (2^23 - 1) * 1e6. The negative extreme lands
/// one LSB past -vref/gain.
double code_to_microvolts(std::int32_t code, const ConversionParams& p);

/// Size of one LSB in microvolts.
double lsb_microvolts(const ConversionParams& p);

/// Nearest code for a voltage, saturated to the 24-bit range.
std::int32_t microvolts_to_code(double microvolts, const ConversionParams& p);

struct DataFrame {
  std::uint32_t status = kStatusSyncNibble << 20;  // 24-bit
  std::array<std::int32_t, kChannels> codes{};

  friend bool operator==(const DataFrame&, const DataFrame&) = default;
};

using FrameBytes = std::array<std::uint8_t, kFrameBytes>;

/// Status word: 1100 | LOFF_STATP | LOFF_STATN | GPIO[7:4].
std::uint32_t make_status(std::uint8_t loff_statp, std::uint8_t loff_statn,
                          std::uint8_t gpio_inputs) noexcept;

struct DecodeOptions {
  /// Disable for legacy captures that did not preserve the status word.
  bool check_sync = true;
};

DataFrame decode_frame(std::span<const std::uint8_t> raw, DecodeOptions options = {});
FrameBytes encode_frame(const DataFrame& frame);

enum class CommandKind : std::uint8_t {
  Wakeup,
  Standby,
  Reset,
  Start,
  Stop,
  Rdatac,
  Sdatac,
  Rdata,
  Rreg,
  Wreg,
};

struct Command {
  CommandKind kind;
  std::uint8_t address = 0;
  std::uint8_t count = 0;

  static Command rreg(std::uint8_t address, std::uint8_t count) {
    return {CommandKind::Rreg, address, count};
  }
  static Command wreg(std::uint8_t address, std::uint8_t count) {
    return {CommandKind::Wreg, address, count};
  }
};

/// SPI opcode bytes for a command. RREG/WREG return {base | addr, count - 1};
/// the register payload of a WREG follows these two bytes on the bus.
std::vector<std::uint8_t> command_opcode(const Command& cmd);

}  // namespace peeg::ads1299
