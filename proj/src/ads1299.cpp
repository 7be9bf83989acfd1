#include "peeg/ads1299.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "peeg/error.hpp"

namespace peeg::ads1299 {
namespace {

constexpr std::array<RegisterInfo, kRegisterCount> kMap = {{
    {"ID", 0x00, kDeviceId, 0x00, 0x00, true},
    {"CONFIG1", 0x01, 0x96, 0x98, 0x90, false},
    {"CONFIG2", 0x02, 0xC0, 0xE8, 0xC0, false},
    {"CONFIG3", 0x03, 0x60, 0x60, 0x60, false},
    {"LOFF", 0x04, 0x00, 0x10, 0x00, false},
    {"CH1SET", 0x05, 0x61, 0x00, 0x00, false},
    {"CH2SET", 0x06, 0x61, 0x00, 0x00, false},
    {"CH3SET", 0x07, 0x61, 0x00, 0x00, false},
    {"CH4SET", 0x08, 0x61, 0x00, 0x00, false},
    {"CH5SET", 0x09, 0x61, 0x00, 0x00, false},
    {"CH6SET", 0x0A, 0x61, 0x00, 0x00, false},
    {"CH7SET", 0x0B, 0x61, 0x00, 0x00, false},
    {"CH8SET", 0x0C, 0x61, 0x00, 0x00, false},
    {"BIAS_SENSP", 0x0D, 0x00, 0x00, 0x00, false},
    {"BIAS_SENSN", 0x0E, 0x00, 0x00, 0x00, false},
    {"LOFF_SENSP", 0x0F, 0x00, 0x00, 0x00, false},
    {"LOFF_SENSN", 0x10, 0x00, 0x00, 0x00, false},
    {"LOFF_FLIP", 0x11, 0x00, 0x00, 0x00, false},
    {"LOFF_STATP", 0x12, 0x00, 0x00, 0x00, true},
    {"LOFF_STATN", 0x13, 0x00, 0x00, 0x00, true},
    {"GPIO", 0x14, 0x0F, 0x00, 0x00, false},
    {"MISC1", 0x15, 0x00, 0xDF, 0x00, false},
    {"MISC2", 0x16, 0x00, 0xFF, 0x00, false},
    {"CONFIG4", 0x17, 0x00, 0xF5, 0x00, false},
}};

constexpr std::uint8_t kGainShift = 4;
constexpr std::uint8_t kGainMask = 0x70;
constexpr std::uint8_t kRateMask = 0x07;
constexpr std::uint8_t kPowerDownBit = 0x80;
constexpr std::uint8_t kSrb2Bit = 0x08;
constexpr std::uint8_t kMuxMask = 0x07;
constexpr double kFullScale = 8388607.0;

bool is_chset(std::uint8_t address) {
  return address >= addr(Reg::Ch1Set) && address <= addr(Reg::Ch8Set);
}

void check_channel(std::size_t channel) {
  if (channel >= kChannels) {
    throw Error(Errc::UnknownRegister, "channel index " + std::to_string(channel) + " out of range");
  }
}

std::string hex(unsigned v) {
  static constexpr char digits[] = "0123456789ABCDEF";
  std::string s = "0x";
  s += digits[(v >> 4) & 0xF];
  s += digits[v & 0xF];
  return s;
}

std::int32_t sign_extend24(std::uint32_t v) {
  v &= 0xFFFFFF;
  return (v & 0x800000) ? static_cast<std::int32_t>(v | 0xFF000000u) : static_cast<std::int32_t>(v);
}

}  // namespace

std::span<const RegisterInfo> register_map() noexcept { return kMap; }

const RegisterInfo& register_info(std::uint8_t address) {
  if (address >= kRegisterCount) {
    throw Error(Errc::UnknownRegister, "no register at " + hex(address));
  }
  return kMap[address];
}

std::optional<int> gain_from_field(std::uint8_t field) noexcept {
  if (field >= kGains.size()) return std::nullopt;
  return kGains[field];
}

std::optional<std::uint8_t> gain_field(int gain) noexcept {
  auto it = std::find(kGains.begin(), kGains.end(), gain);
  if (it == kGains.end()) return std::nullopt;
  return static_cast<std::uint8_t>(it - kGains.begin());
}

std::optional<int> rate_from_field(std::uint8_t field) noexcept {
  if (field >= kDataRates.size()) return std::nullopt;
  return kDataRates[field];
}

std::optional<std::uint8_t> rate_field(int samples_per_second) noexcept {
  auto it = std::find(kDataRates.begin(), kDataRates.end(), samples_per_second);
  if (it == kDataRates.end()) return std::nullopt;
  return static_cast<std::uint8_t>(it - kDataRates.begin());
}

bool is_valid_gain(int gain) noexcept { return gain_field(gain).has_value(); }
bool is_valid_rate(int samples_per_second) noexcept { return rate_field(samples_per_second).has_value(); }

std::uint8_t make_chset(int gain, InputMux mux, bool power_down, bool srb2) {
  auto field = gain_field(gain);
  if (!field) throw Error(Errc::InvalidFieldEncoding, "unsupported gain " + std::to_string(gain));
  std::uint8_t v = static_cast<std::uint8_t>(*field << kGainShift);
  v |= static_cast<std::uint8_t>(mux) & kMuxMask;
  if (power_down) v |= kPowerDownBit;
  if (srb2) v |= kSrb2Bit;
  return v;
}

void validate_register_value(std::uint8_t address, std::uint8_t value) {
  const RegisterInfo& info = register_info(address);
  if ((value & info.fixed_mask) != info.fixed_bits) {
    throw Error(Errc::InvalidFieldEncoding,
                std::string(info.name) + " reserved bits violated by " + hex(value));
  }
  if (address == addr(Reg::Config1) && !rate_from_field(value & kRateMask)) {
    throw Error(Errc::InvalidFieldEncoding, "CONFIG1 data-rate field " + hex(value & kRateMask));
  }
  if (is_chset(address) && !gain_from_field((value & kGainMask) >> kGainShift)) {
    throw Error(Errc::InvalidFieldEncoding,
                std::string(info.name) + " gain field " + hex((value & kGainMask) >> kGainShift));
  }
}

RegisterFile::RegisterFile() : RegisterFile(power_on_reset()) {
  for (std::size_t ch = 0; ch < kChannels; ++ch) {
    regs_[chset_addr(ch)] = make_chset(24, InputMux::Normal);
  }
  // Internal reference buffer on, bias reference internal, bias buffer on.
  regs_[addr(Reg::Config3)] = 0xEC;
  // SRB1 closed: all negative inputs tied to the reference electrode.
  regs_[addr(Reg::Misc1)] = 0x20;
}

RegisterFile RegisterFile::power_on_reset() {
  std::array<std::uint8_t, kRegisterCount> regs{};
  for (const auto& info : kMap) regs[info.address] = info.reset_value;
  return RegisterFile(regs);
}

RegisterFile RegisterFile::from_bytes(std::span<const std::uint8_t> image) {
  if (image.size() != kRegisterCount) {
    throw Error(Errc::WrongLength, "register image must be " + std::to_string(kRegisterCount) + " bytes");
  }
  std::array<std::uint8_t, kRegisterCount> regs{};
  std::copy(image.begin(), image.end(), regs.begin());
  if (regs[addr(Reg::Id)] != kDeviceId) {
    throw Error(Errc::InvalidFieldEncoding, "device id " + hex(regs[addr(Reg::Id)]));
  }
  for (const auto& info : kMap) {
    if (!info.read_only) validate_register_value(info.address, regs[info.address]);
  }
  return RegisterFile(regs);
}

std::uint8_t RegisterFile::read(std::uint8_t address) const {
  return regs_[register_info(address).address];
}

void RegisterFile::write(std::uint8_t address, std::uint8_t value) {
  const RegisterInfo& info = register_info(address);
  if (info.read_only) {
    throw Error(Errc::ReadOnlyRegister, std::string(info.name) + " is read-only");
  }
  validate_register_value(address, value);
  regs_[address] = value;
}

void RegisterFile::set_lead_off_status(std::uint8_t statp, std::uint8_t statn) noexcept {
  regs_[addr(Reg::LoffStatP)] = statp;
  regs_[addr(Reg::LoffStatN)] = statn;
}

int RegisterFile::gain_of(std::size_t channel) const {
  check_channel(channel);
  return *gain_from_field((regs_[chset_addr(channel)] & kGainMask) >> kGainShift);
}

std::array<int, kChannels> RegisterFile::gains() const {
  std::array<int, kChannels> out{};
  for (std::size_t ch = 0; ch < kChannels; ++ch) out[ch] = gain_of(ch);
  return out;
}

int RegisterFile::sample_rate() const {
  return *rate_from_field(regs_[addr(Reg::Config1)] & kRateMask);
}

bool RegisterFile::powered_down(std::size_t channel) const {
  check_channel(channel);
  return (regs_[chset_addr(channel)] & kPowerDownBit) != 0;
}

InputMux RegisterFile::input_mux(std::size_t channel) const {
  check_channel(channel);
  return static_cast<InputMux>(regs_[chset_addr(channel)] & kMuxMask);
}

RegisterFile write_register(const RegisterFile& rf, std::uint8_t address, std::uint8_t value) {
  RegisterFile out = rf;
  out.write(address, value);
  return out;
}

void validate(const ConversionParams& p) {
  if (!(p.vref > 0.0) || !std::isfinite(p.vref)) {
    throw Error(Errc::InvalidFieldEncoding, "vref must be positive");
  }
  if (!is_valid_gain(p.gain)) {
    throw Error(Errc::InvalidFieldEncoding, "unsupported gain " + std::to_string(p.gain));
  }
}

double code_to_microvolts(std::int32_t code, const ConversionParams& p) {
  // vref*1e6/gain is an exact integer for the default reference, which keeps
  // full scale exact at every gain.
  return static_cast<double>(code) * (p.vref * 1e6 / p.gain) / kFullScale;
}

double lsb_microvolts(const ConversionParams& p) { return (p.vref * 1e6 / p.gain) / kFullScale; }

std::int32_t microvolts_to_code(double microvolts, const ConversionParams& p) {
  const double code = std::nearbyint(microvolts * kFullScale / (p.vref * 1e6 / p.gain));
  if (!(code < kCodeMax)) return kCodeMax;  // also catches NaN
  if (code < kCodeMin) return kCodeMin;
  return static_cast<std::int32_t>(code);
}

std::uint32_t make_status(std::uint8_t loff_statp, std::uint8_t loff_statn,
                          std::uint8_t gpio_inputs) noexcept {
  return (kStatusSyncNibble << 20) | (static_cast<std::uint32_t>(loff_statp) << 12) |
         (static_cast<std::uint32_t>(loff_statn) << 4) | (gpio_inputs & 0x0Fu);
}

DataFrame decode_frame(std::span<const std::uint8_t> raw, DecodeOptions options) {
  if (raw.size() != kFrameBytes) {
    throw Error(Errc::WrongLength, "frame has " + std::to_string(raw.size()) + " bytes, expected 27");
  }
  DataFrame f;
  f.status = (std::uint32_t{raw[0]} << 16) | (std::uint32_t{raw[1]} << 8) | raw[2];
  if (options.check_sync && (f.status >> 20) != kStatusSyncNibble) {
    throw Error(Errc::BadSyncNibble, "status lead nibble " + hex(f.status >> 20));
  }
  for (std::size_t ch = 0; ch < kChannels; ++ch) {
    const std::uint8_t* p = raw.data() + 3 + 3 * ch;
    f.codes[ch] = sign_extend24((std::uint32_t{p[0]} << 16) | (std::uint32_t{p[1]} << 8) | p[2]);
  }
  return f;
}

FrameBytes encode_frame(const DataFrame& frame) {
  if (frame.status > 0xFFFFFF) {
    throw Error(Errc::CodeOutOfRange, "status word exceeds 24 bits");
  }
  FrameBytes out{};
  out[0] = static_cast<std::uint8_t>(frame.status >> 16);
  out[1] = static_cast<std::uint8_t>(frame.status >> 8);
  out[2] = static_cast<std::uint8_t>(frame.status);
  for (std::size_t ch = 0; ch < kChannels; ++ch) {
    const std::int32_t code = frame.codes[ch];
    if (code < kCodeMin || code > kCodeMax) {
      throw Error(Errc::CodeOutOfRange,
                  "channel " + std::to_string(ch + 1) + " code " + std::to_string(code));
    }
    const auto u = static_cast<std::uint32_t>(code) & 0xFFFFFF;
    out[3 + 3 * ch] = static_cast<std::uint8_t>(u >> 16);
    out[4 + 3 * ch] = static_cast<std::uint8_t>(u >> 8);
    out[5 + 3 * ch] = static_cast<std::uint8_t>(u);
  }
  return out;
}

std::vector<std::uint8_t> command_opcode(const Command& cmd) {
  switch (cmd.kind) {
    case CommandKind::Wakeup: return {0x02};
    case CommandKind::Standby: return {0x04};
    case CommandKind::Reset: return {0x06};
    case CommandKind::Start: return {0x08};
    case CommandKind::Stop: return {0x0A};
    case CommandKind::Rdatac: return {0x10};
    case CommandKind::Sdatac: return {0x11};
    case CommandKind::Rdata: return {0x12};
    case CommandKind::Rreg:
    case CommandKind::Wreg: {
      if (cmd.count == 0 || cmd.address >= kRegisterCount ||
          cmd.address + cmd.count > kRegisterCount) {
        throw Error(Errc::InvalidAddressRange, "register range " + hex(cmd.address) + " + " +
                                                   std::to_string(cmd.count));
      }
      const std::uint8_t base = cmd.kind == CommandKind::Rreg ? 0x20 : 0x40;
      return {static_cast<std::uint8_t>(base | cmd.address), static_cast<std::uint8_t>(cmd.count - 1)};
    }
  }
  throw Error(Errc::InvalidAddressRange, "unknown command");
}

}  // namespace peeg::ads1299
