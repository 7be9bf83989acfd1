#include <random>

#include "doctest.h"
#include "peeg/ads1299.hpp"
#include "peeg/error.hpp"

using namespace peeg;
using namespace peeg::ads1299;

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

FrameBytes frame_with_channel(std::uint8_t b0, std::uint8_t b1, std::uint8_t b2) {
  FrameBytes raw{};
  raw[0] = 0xC0;
  raw[3] = b0;
  raw[4] = b1;
  raw[5] = b2;
  return raw;
}

}  // namespace

TEST_SUITE("ads1299") {
  TEST_CASE("decode zero frame") {
    FrameBytes raw{};
    raw[0] = 0xC0;
    const auto f = decode_frame(raw);
    for (auto c : f.codes) CHECK(c == 0);
    CHECK(f.status == 0xC00000u);
  }

  TEST_CASE("decode two's complement extremes") {
    CHECK(decode_frame(frame_with_channel(0xFF, 0xFF, 0xFF)).codes[0] == -1);
    CHECK(decode_frame(frame_with_channel(0x7F, 0xFF, 0xFF)).codes[0] == kCodeMax);
    CHECK(decode_frame(frame_with_channel(0x80, 0x00, 0x00)).codes[0] == kCodeMin);
    CHECK(decode_frame(frame_with_channel(0x00, 0x00, 0x01)).codes[0] == 1);
  }

  TEST_CASE("decode errors") {
    std::array<std::uint8_t, 26> short_frame{};
    CHECK(code_of([&] { decode_frame(short_frame); }) == Errc::WrongLength);
    FrameBytes bad{};
    CHECK(code_of([&] { decode_frame(bad); }) == Errc::BadSyncNibble);
    DecodeOptions legacy;
    legacy.check_sync = false;
    CHECK_NOTHROW(decode_frame(bad, legacy));
  }

  TEST_CASE("encode") {
    DataFrame f;
    auto raw = encode_frame(f);
    for (std::size_t i = 3; i < kFrameBytes; ++i) CHECK(raw[i] == 0);
    CHECK(raw[0] == 0xC0);
    f.codes[7] = -1;
    raw = encode_frame(f);
    CHECK(raw[24] == 0xFF);
    CHECK(raw[25] == 0xFF);
    CHECK(raw[26] == 0xFF);
    f.codes[0] = kCodeMax + 1;
    CHECK(code_of([&] { encode_frame(f); }) == Errc::CodeOutOfRange);
  }

  TEST_CASE("random round trip") {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<std::int32_t> code(kCodeMin, kCodeMax);
    std::uniform_int_distribution<std::uint32_t> low(0, 0xFFFFF);
    for (int i = 0; i < 10000; ++i) {
      DataFrame f;
      f.status = (kStatusSyncNibble << 20) | low(rng);
      for (auto& c : f.codes) c = code(rng);
      REQUIRE(decode_frame(encode_frame(f)) == f);
    }
  }

  TEST_CASE("status word") {
    const auto s = make_status(0xA5, 0x3C, 0x9);
    CHECK((s >> 20) == kStatusSyncNibble);
    CHECK(((s >> 12) & 0xFF) == 0xA5);
    CHECK(((s >> 4) & 0xFF) == 0x3C);
    CHECK((s & 0xF) == 0x9);
  }

  TEST_CASE("conversion") {
    CHECK(code_to_microvolts(0, {4.5, 1}) == 0.0);
    CHECK(code_to_microvolts(0, {4.5, 24}) == 0.0);
    CHECK(code_to_microvolts(kCodeMax, {4.5, 1}) == doctest::Approx(4'500'000.0).epsilon(1e-12));
    CHECK(code_to_microvolts(kCodeMax, {4.5, 24}) == doctest::Approx(187'500.0).epsilon(1e-12));
    CHECK(code_to_microvolts(-kCodeMax, {4.5, 24}) == doctest::Approx(-187'500.0).epsilon(1e-12));
    CHECK(lsb_microvolts({4.5, 24}) == doctest::Approx(187'500.0 / 8388607.0));
    for (int g : kGains) {
      const ConversionParams p{4.5, g};
      CHECK(code_to_microvolts(kCodeMax, p) * g == doctest::Approx(4'500'000.0).epsilon(1e-12));
      CHECK(microvolts_to_code(code_to_microvolts(12345, p), p) == 12345);
    }
    CHECK(microvolts_to_code(1e9, {}) == kCodeMax);
    CHECK(microvolts_to_code(-1e9, {}) == kCodeMin);
    CHECK(code_of([] { validate(ConversionParams{4.5, 3}); }) == Errc::InvalidFieldEncoding);
  }

  TEST_CASE("gain and rate tables") {
    CHECK(gain_field(1) == 0);
    CHECK(gain_field(24) == 6);
    CHECK(gain_from_field(7) == std::nullopt);
    CHECK(rate_field(16000) == 0);
    CHECK(rate_field(250) == 6);
    CHECK(rate_from_field(7) == std::nullopt);
    CHECK(!is_valid_gain(3));
    CHECK(!is_valid_rate(300));
    CHECK(make_chset(24) == 0x60);
    CHECK(make_chset(1, InputMux::Shorted) == 0x01);
    CHECK(make_chset(12, InputMux::TestSignal, true, true) == 0xDD);
  }

  TEST_CASE("register file") {
    RegisterFile rf;
    CHECK(rf.read(addr(Reg::Id)) == kDeviceId);
    CHECK(rf.sample_rate() == 250);
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
      CHECK(rf.gain_of(ch) == 24);
      CHECK(rf.input_mux(ch) == InputMux::Normal);
    }
    rf.write(chset_addr(0), make_chset(1));
    CHECK(rf.gain_of(0) == 1);
    rf.write(chset_addr(0), make_chset(24));
    CHECK(rf.gain_of(0) == 24);
    rf.write(addr(Reg::Config1), 0x96);  // 250 SPS
    CHECK(rf.sample_rate() == 250);
    rf.write(addr(Reg::Config1), 0x90);
    CHECK(rf.sample_rate() == 16000);

    CHECK(code_of([&] { rf.write(addr(Reg::Id), 0x3E); }) == Errc::ReadOnlyRegister);
    CHECK(code_of([&] { rf.write(addr(Reg::LoffStatP), 0); }) == Errc::ReadOnlyRegister);
    CHECK(code_of([&] { rf.write(0x18, 0); }) == Errc::UnknownRegister);
    CHECK(code_of([&] { rf.write(chset_addr(2), 0x70); }) == Errc::InvalidFieldEncoding);  // gain field 111
    CHECK(code_of([&] { rf.write(addr(Reg::Config1), 0x97); }) == Errc::InvalidFieldEncoding);
    CHECK(code_of([&] { rf.write(addr(Reg::Config1), 0x16); }) == Errc::InvalidFieldEncoding);  // reserved bit 7
  }

  TEST_CASE("register file images") {
    const auto por = RegisterFile::power_on_reset();
    CHECK(por.input_mux(0) == InputMux::Shorted);
    CHECK(por.gain_of(0) == 24);
    CHECK(RegisterFile::from_bytes(por.bytes()) == por);
    auto image = por.bytes();
    image[addr(Reg::Ch3Set)] = 0x70;
    CHECK(code_of([&] { RegisterFile::from_bytes(image); }) == Errc::InvalidFieldEncoding);
    std::array<std::uint8_t, 5> short_image{};
    CHECK(code_of([&] { RegisterFile::from_bytes(short_image); }) == Errc::WrongLength);
  }

  TEST_CASE("pure write leaves the input unchanged") {
    const RegisterFile rf;
    const auto next = write_register(rf, chset_addr(4), make_chset(6));
    CHECK(rf.gain_of(4) == 24);
    CHECK(next.gain_of(4) == 6);
  }

  TEST_CASE("register map") {
    CHECK(register_map().size() == kRegisterCount);
    for (std::size_t i = 0; i < register_map().size(); ++i) CHECK(register_map()[i].address == i);
    CHECK(register_info(0x05).name == "CH1SET");
    CHECK(code_of([] { register_info(0x40); }) == Errc::UnknownRegister);
  }

  TEST_CASE("command opcodes") {
    using V = std::vector<std::uint8_t>;
    CHECK(command_opcode({CommandKind::Wakeup}) == V{0x02});
    CHECK(command_opcode({CommandKind::Standby}) == V{0x04});
    CHECK(command_opcode({CommandKind::Reset}) == V{0x06});
    CHECK(command_opcode({CommandKind::Start}) == V{0x08});
    CHECK(command_opcode({CommandKind::Stop}) == V{0x0A});
    CHECK(command_opcode({CommandKind::Rdatac}) == V{0x10});
    CHECK(command_opcode({CommandKind::Sdatac}) == V{0x11});
    CHECK(command_opcode({CommandKind::Rdata}) == V{0x12});
    CHECK(command_opcode(Command::rreg(1, 1)) == V{0x21, 0x00});
    CHECK(command_opcode(Command::wreg(5, 8)) == V{0x45, 0x07});
    CHECK(code_of([] { command_opcode(Command::wreg(5, 0)); }) == Errc::InvalidAddressRange);
    CHECK(code_of([] { command_opcode(Command::rreg(0x17, 2)); }) == Errc::InvalidAddressRange);
  }
}
