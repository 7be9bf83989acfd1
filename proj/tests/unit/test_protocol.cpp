#include "../common/protocol_gen.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "peeg/protocol.hpp"

using namespace peeg;
using namespace peeg::protocol;
using testutil::code_of;

namespace {

std::vector<Message> feed(ProtocolSession& s, const Message& m, bool* open = nullptr) {
  std::vector<std::vector<std::uint8_t>> out;
  const bool still = s.receive(encode(m), out);
  if (open) *open = still;
  std::vector<Message> replies;
  for (const auto& r : out) replies.push_back(decode(r));
  return replies;
}

Command cmd(std::uint32_t id, CommandOp op) {
  Command c;
  c.id = id;
  c.op = op;
  return c;
}

}  // namespace

TEST_SUITE("protocol") {
  TEST_CASE("random round trips") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 10000; ++i) {
      const auto m = protogen::random_message(rng);
      const auto bytes = encode(m);
      REQUIRE(decode(bytes) == m);
    }
  }

  TEST_CASE("DATA length arithmetic") {
    SampleBlock b;
    b.block_len = 25;
    b.gains.fill(24);
    b.codes.assign(200, 1000);
    convert_block(b);
    const auto bytes = encode(make_data(b));
    const auto h = decode_header(bytes);
    CHECK(h.type == static_cast<std::uint8_t>(MessageType::Data));
    CHECK(h.length == kDataHeaderSize + 8 * 25 * 4);
    CHECK(h.length == 855);
    CHECK(bytes.size() == kHeaderSize + 855);
    const auto raw = encode(make_data(b, true));
    CHECK(decode_header(raw).length == 855);
    CHECK(std::get<Data>(decode(raw)).codes == b.codes);
  }

  TEST_CASE("envelope errors") {
    const std::vector<std::uint8_t> empty_hello = {'X', 'E', 'E', 'G', 1, 1, 0, 0, 0, 0};
    CHECK(code_of([&] { decode_header(empty_hello); }) == Errc::BadMagic);
    std::vector<std::uint8_t> v2 = {'P', 'E', 'E', 'G', 2, 1, 0, 0, 0, 0};
    CHECK(code_of([&] { decode_header(v2); }) == Errc::UnsupportedVersion);
    std::vector<std::uint8_t> big = {'P', 'E', 'E', 'G', 1, 1, 0, 0, 0, 0x10};
    CHECK(code_of([&] { decode_header(big); }) == Errc::LengthOverflow);
    std::vector<std::uint8_t> unknown = {'P', 'E', 'E', 'G', 1, 9, 0, 0, 0, 0};
    CHECK(code_of([&] { decode(unknown); }) == Errc::UnknownType);
    auto ack = encode(Ack{1, true, 0, 0});
    ack.push_back(0);
    CHECK(code_of([&] { decode(ack); }) == Errc::Malformed);
    ack.resize(ack.size() - 3);
    CHECK(code_of([&] { decode(ack); }) == Errc::Truncated);
  }

  TEST_CASE("frame reader reassembles byte by byte") {
    std::mt19937_64 rng(5);
    std::vector<Message> sent;
    std::vector<std::uint8_t> stream;
    for (int i = 0; i < 50; ++i) {
      sent.push_back(protogen::random_message(rng));
      const auto b = encode(sent.back());
      stream.insert(stream.end(), b.begin(), b.end());
    }
    FrameReader r;
    std::vector<Message> got;
    for (auto byte : stream) {
      r.feed(std::span(&byte, 1));
      while (auto f = r.next()) got.push_back(decode_body(f->type, f->body));
    }
    CHECK(got == sent);
    CHECK(r.buffered() == 0);

    FrameReader bad;
    const std::uint8_t junk[] = {'X'};
    bad.feed(junk);
    CHECK(code_of([&] { bad.next(); }) == Errc::BadMagic);
  }

  TEST_CASE("decimation") {
    SampleBlock b;
    b.block_len = 25;
    b.fs = 250;
    b.gains.fill(24);
    for (int i = 0; i < 200; ++i) b.codes.push_back(i);
    convert_block(b);
    std::size_t phase = 0;
    auto d = make_data(b, true, 10, &phase);
    CHECK(d.block_len == 3);  // 0, 10, 20
    CHECK(d.fs == 25.0);
    CHECK(d.codes[1] == 10);
    CHECK(phase == 5);
    b.seq = 1;
    b.t0_ns = 100'000'000;
    d = make_data(b, true, 10, &phase);
    CHECK(d.block_len == 2);  // 5, 15
    CHECK(d.codes[0] == 5);
    CHECK(d.t0_ns == 120'000'000);
  }

  TEST_CASE("session greets and dispatches") {
    protogen::StubTarget t;
    ProtocolSession s(t, std::nullopt);
    const auto hello = std::get<Hello>(decode(s.greeting()));
    CHECK(hello.fs == 250.0);
    CHECK(hello.labels[0] == "Fz");
    CHECK(!hello.auth_required);

    auto rreg = cmd(1, CommandOp::Rreg);
    rreg.address = 0;
    auto r = feed(s, rreg);
    REQUIRE(r.size() == 1);
    CHECK(std::get<Ack>(r[0]).value == ads1299::kDeviceId);

    auto wreg = cmd(2, CommandOp::Wreg);
    wreg.address = ads1299::chset_addr(0);
    wreg.value = ads1299::make_chset(12);
    r = feed(s, wreg);
    CHECK(std::get<Ack>(r[0]).epoch == 1);
    CHECK(t.regs.gain_of(0) == 12);

    auto ro = cmd(3, CommandOp::Wreg);
    ro.address = 0;
    ro.value = 1;
    r = feed(s, ro);
    CHECK(std::get<Err>(r[0]).code == ErrCode::InvalidReg);
    CHECK(std::get<Err>(r[0]).cmd_id == 3);

    r = feed(s, cmd(4, CommandOp::Stop));
    CHECK(std::get<Err>(r[0]).code == ErrCode::NotRunning);
    auto note = cmd(5, CommandOp::Annotate);
    note.text = "x";
    r = feed(s, note);
    CHECK(std::get<Err>(r[0]).code == ErrCode::NotRunning);
  }

  TEST_CASE("commands are idempotent by id") {
    protogen::StubTarget t;
    ProtocolSession s(t, std::nullopt);
    auto wreg = cmd(77, CommandOp::Wreg);
    wreg.address = ads1299::chset_addr(1);
    wreg.value = ads1299::make_chset(2);
    const auto a = feed(s, wreg);
    const auto b = feed(s, wreg);
    CHECK(a == b);
    CHECK(t.writes == 1);
    CHECK(std::get<Ack>(feed(s, cmd(78, CommandOp::Start))[0]).ok);
    CHECK(std::get<Ack>(feed(s, cmd(78, CommandOp::Start))[0]).ok);
    CHECK(t.starts == 1);
  }

  TEST_CASE("bad body keeps the connection, bad envelope closes it") {
    protogen::StubTarget t;
    ProtocolSession s(t, std::nullopt);
    std::vector<std::vector<std::uint8_t>> out;
    const std::vector<std::uint8_t> unknown = {'P', 'E', 'E', 'G', 1, 42, 0, 0, 0, 0};
    CHECK(s.receive(unknown, out));
    CHECK(std::get<Err>(decode(out.back())).code == ErrCode::UnknownType);
    const std::vector<std::uint8_t> short_cmd = {'P', 'E', 'E', 'G', 1, 4, 1, 0, 0, 0, 7};
    CHECK(s.receive(short_cmd, out));
    CHECK(std::get<Err>(decode(out.back())).code == ErrCode::Malformed);
    CHECK(s.receive(encode(Metrics{}), out));
    CHECK(std::get<Err>(decode(out.back())).code == ErrCode::Unsupported);
    const std::vector<std::uint8_t> garbage = {'G', 'E', 'T', ' ', '/', ' ', 'H', 'T', 'T', 'P'};
    CHECK(!s.receive(garbage, out));
    CHECK(std::get<Err>(decode(out.back())).code == ErrCode::BadMagic);
    CHECK(!s.open());
    const auto n = out.size();
    CHECK(!s.receive(encode(cmd(1, CommandOp::Start)), out));
    CHECK(out.size() == n);
  }

  TEST_CASE("authentication") {
    protogen::StubTarget t;
    ProtocolSession s(t, std::string("sesame"));
    CHECK(std::get<Hello>(decode(s.greeting())).auth_required);
    auto r = feed(s, cmd(1, CommandOp::Start));
    CHECK(std::get<Err>(r[0]).code == ErrCode::Unauthorized);
    CHECK(t.starts == 0);
    Hello h;
    h.token = "sesame";
    CHECK(feed(s, h).empty());
    CHECK(s.authenticated());
    r = feed(s, cmd(1, CommandOp::Start));
    CHECK(std::holds_alternative<Ack>(r[0]));

    ProtocolSession wrong(t, std::string("sesame"));
    h.token = "guess";
    bool open = true;
    r = feed(wrong, h, &open);
    CHECK(!open);
    CHECK(std::get<Err>(r[0]).code == ErrCode::Unauthorized);
  }

  TEST_CASE("subscription and credit") {
    protogen::StubTarget t;
    ProtocolSession s(t, std::nullopt);
    CHECK(s.credit() == ProtocolSession::kDefaultCredit);
    for (std::uint32_t i = 0; i < ProtocolSession::kDefaultCredit; ++i) CHECK(s.take_credit());
    CHECK(!s.take_credit());
    s.on_data_sent();
    CHECK(s.take_credit());

    auto sub = cmd(1, CommandOp::Subscribe);
    sub.flags = kSubscribeData | kSubscribeRaw;
    sub.decimation = 5;
    CHECK(std::holds_alternative<Ack>(feed(s, sub)[0]));
    CHECK(s.prefs().raw);
    CHECK(!s.prefs().metrics);
    CHECK(s.prefs().decimation == 5);
    sub.id = 2;
    sub.decimation = 0;
    CHECK(std::get<Err>(feed(s, sub)[0]).code == ErrCode::Malformed);

    auto credit = cmd(3, CommandOp::Credit);
    credit.credit = 2;
    feed(s, credit);
    CHECK(s.credit() == 2);
    CHECK(s.take_credit());
    CHECK(s.take_credit());
    CHECK(!s.take_credit());
    s.on_data_sent();  // manual mode: no refill
    CHECK(!s.take_credit());
  }

  TEST_CASE("replay cache is bounded") {
    protogen::StubTarget t;
    ProtocolSession s(t, std::nullopt);
    auto w = cmd(0, CommandOp::Wreg);
    w.address = ads1299::chset_addr(0);
    w.value = ads1299::make_chset(24);
    for (std::uint32_t id = 1; id <= ProtocolSession::kReplayCacheSize + 1; ++id) {
      w.id = id;
      feed(s, w);
    }
    CHECK(t.writes == static_cast<int>(ProtocolSession::kReplayCacheSize) + 1);
    w.id = 1;  // evicted: applied again
    feed(s, w);
    CHECK(t.writes == static_cast<int>(ProtocolSession::kReplayCacheSize) + 2);
    w.id = ProtocolSession::kReplayCacheSize + 1;
    feed(s, w);
    CHECK(t.writes == static_cast<int>(ProtocolSession::kReplayCacheSize) + 2);
  }

  TEST_CASE("fuzzing never crashes") {
    std::mt19937_64 rng(99);
    std::size_t closed = 0;
    for (int i = 0; i < 20000; ++i) REQUIRE(protogen::fuzz_once(rng, &closed));
    CHECK(closed > 0);
  }
}
