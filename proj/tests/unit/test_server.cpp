#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <thread>

#include "doctest.h"
#include "helpers.hpp"
#include "peeg/server.hpp"

using namespace peeg;
using namespace std::chrono_literals;
using testutil::code_of;

namespace {

BackendFactory noise(double seconds) {
  return [seconds] { return std::make_unique<SimulatorBackend>(synth::noise_scenario(seconds)); };
}

ServerConfig local(std::size_t queue_blocks = 64) {
  ServerConfig c;
  c.tcp_port = 0;
  c.ws_port = 0;
  c.client_queue_blocks = queue_blocks;
  return c;
}

std::string endpoint(const Server& s) { return "127.0.0.1:" + std::to_string(s.tcp_port()); }

protocol::Command op(protocol::CommandOp o) {
  protocol::Command c;
  c.op = o;
  return c;
}

struct DataTally {
  std::uint64_t samples = 0;
  std::uint64_t dropped = 0;
  std::uint64_t messages = 0;
  std::vector<protocol::Data> data;
};

void tally(DataTally& t, const protocol::Message& m) {
  if (const auto* d = std::get_if<protocol::Data>(&m)) {
    t.samples += d->block_len;
    t.dropped += d->dropped_before;
    ++t.messages;
    t.data.push_back(*d);
  }
}

DataTally drain(Client& c, std::chrono::milliseconds quiet = 600ms) {
  DataTally t;
  while (auto m = c.receive(quiet)) tally(t, *m);
  return t;
}

int raw_connect(std::uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in a{};
  a.sin_family = AF_INET;
  a.sin_port = htons(port);
  a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&a), sizeof a) == 0);
  timeval tv{2, 0};
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  return fd;
}

void raw_send(int fd, std::string_view s) { REQUIRE(::send(fd, s.data(), s.size(), MSG_NOSIGNAL) == static_cast<ssize_t>(s.size())); }

std::vector<std::uint8_t> raw_read(int fd, std::size_t n) {
  std::vector<std::uint8_t> out(n);
  std::size_t got = 0;
  while (got < n) {
    const ssize_t k = ::recv(fd, out.data() + got, n - got, 0);
    if (k <= 0) {
      out.resize(got);
      break;
    }
    got += static_cast<std::size_t>(k);
  }
  return out;
}

std::string read_http_head(int fd) {
  std::string s;
  char c;
  while (s.find("\r\n\r\n") == std::string::npos && ::recv(fd, &c, 1, 0) == 1) s += c;
  return s;
}

// One server-to-client frame (unmasked).
std::pair<std::uint8_t, std::vector<std::uint8_t>> ws_read(int fd) {
  const auto h = raw_read(fd, 2);
  if (h.size() < 2) return {0, {}};
  std::uint64_t len = h[1] & 0x7F;
  if (len == 126) {
    const auto e = raw_read(fd, 2);
    len = (std::uint64_t{e[0]} << 8) | e[1];
  } else if (len == 127) {
    const auto e = raw_read(fd, 8);
    len = 0;
    for (auto b : e) len = (len << 8) | b;
  }
  return {static_cast<std::uint8_t>(h[0] & 0x0F), raw_read(fd, len)};
}

std::string ws_frame(std::uint8_t opcode, std::span<const std::uint8_t> payload, bool masked = true) {
  std::string f;
  f += static_cast<char>(0x80 | opcode);
  const std::uint8_t m = masked ? 0x80 : 0;
  if (payload.size() < 126) {
    f += static_cast<char>(m | payload.size());
  } else {
    f += static_cast<char>(m | 126);
    f += static_cast<char>(payload.size() >> 8);
    f += static_cast<char>(payload.size() & 0xFF);
  }
  const std::uint8_t key[4] = {0x12, 0x34, 0x56, 0x78};
  if (masked) f.append(reinterpret_cast<const char*>(key), 4);
  for (std::size_t i = 0; i < payload.size(); ++i) f += static_cast<char>(payload[i] ^ (masked ? key[i % 4] : 0));
  return f;
}

int ws_open(const Server& s) {
  const int fd = raw_connect(s.ws_port());
  raw_send(fd,
           "GET /stream HTTP/1.1\r\nHost: localhost\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
           "Sec-WebSocket-Key: dGhlIHNhbXBsZSBub25jZQ==\r\nSec-WebSocket-Version: 13\r\n\r\n");
  return fd;
}

}  // namespace

TEST_SUITE("server") {
  TEST_CASE("HELLO on connect") {
    Station station(noise(5.0));
    Server server(station, local());
    Client c(endpoint(server));
    CHECK(c.hello().fs == 250.0);
    CHECK(c.hello().block_len == 25);
    CHECK(c.hello().labels[0] == "Fz");
    for (const auto& l : c.hello().labels) CHECK(!l.empty());
    CHECK(c.hello().gains[0] == 24);
    CHECK(!c.hello().running);
    CHECK(!c.hello().auth_required);
  }

  TEST_CASE("register commands") {
    Station station(noise(5.0));
    Server server(station, local());
    Client c(endpoint(server));
    auto rreg = op(protocol::CommandOp::Rreg);
    rreg.address = 0;
    CHECK(c.command(rreg).value == ads1299::kDeviceId);

    auto wreg = op(protocol::CommandOp::Wreg);
    wreg.address = 0;
    wreg.value = 0x3E;
    try {
      c.command(wreg);
      FAIL("expected ERR");
    } catch (const RemoteError& e) {
      CHECK(e.err().code == protocol::ErrCode::InvalidReg);
    }
    wreg.address = ads1299::chset_addr(0);
    wreg.value = ads1299::make_chset(12);
    const auto ack = c.command(wreg);
    CHECK(ack.epoch == 1);
    Client late(endpoint(server));
    CHECK(late.hello().gains[0] == 12);
    CHECK(late.hello().epoch == 1);
  }

  TEST_CASE("gain change reaches the DATA stream") {
    Station station(noise(4.0));
    Server server(station, local());
    Client c(endpoint(server));
    c.command(op(protocol::CommandOp::Start));
    int seen = 0;
    while (seen < 5) {
      auto m = c.receive(2s);
      REQUIRE(m.has_value());
      if (std::holds_alternative<protocol::Data>(*m)) ++seen;
    }
    auto wreg = op(protocol::CommandOp::Wreg);
    wreg.address = ads1299::chset_addr(0);
    wreg.value = ads1299::make_chset(12);
    const auto ack = c.command(wreg);
    const auto t = drain(c);
    std::size_t after = 0;
    for (const auto& d : t.data) {
      if (d.epoch >= ack.epoch) {
        CHECK(d.gains[0] == 12);
        ++after;
      } else {
        CHECK(d.gains[0] == 24);
      }
    }
    CHECK(after > 0);
  }

  TEST_CASE("bad magic closes only that connection") {
    Station station(noise(3.0));
    Server server(station, local());
    Client good(endpoint(server));
    Client bad(endpoint(server));
    const std::uint8_t junk[] = {'H', 'E', 'L', 'L', 'O', ' ', 'T', 'H', 'E', 'R', 'E', '!'};
    bad.send_raw(junk);
    auto m = bad.receive(2s);
    REQUIRE(m.has_value());
    CHECK(std::get<protocol::Err>(*m).code == protocol::ErrCode::BadMagic);
    CHECK(code_of([&] {
            while (bad.receive(2s)) {
            }
            bad.receive(2s);
          }) == Errc::ConnectionFailed);
    auto rreg = op(protocol::CommandOp::Rreg);
    rreg.address = ads1299::addr(ads1299::Reg::Config1);
    CHECK(good.command(rreg).value == 0x96);
  }

  TEST_CASE("per-client gap conservation under a stall") {
    Station station(noise(6.0));
    Server server(station, local(8));
    Client fast(endpoint(server));
    Client stalled(endpoint(server));
    auto zero = op(protocol::CommandOp::Credit);
    zero.credit = 0;
    stalled.command(zero);
    std::this_thread::sleep_for(100ms);  // both subscriptions exist before the stream starts
    fast.command(op(protocol::CommandOp::Start));

    DataTally tf;
    std::thread reader([&] { tf = drain(fast, 1500ms); });
    std::this_thread::sleep_for(2500ms);
    auto more = op(protocol::CommandOp::Credit);
    more.credit = 1'000'000;
    stalled.command(more);
    station.wait();
    const auto ts = drain(stalled, 1000ms);
    reader.join();

    const auto produced = station.pipeline()->stats().produced_samples;
    CHECK(produced == 1500);
    CHECK(tf.dropped == 0);
    CHECK(tf.samples == produced);
    CHECK(ts.dropped > 0);
    CHECK(ts.samples + ts.dropped == produced);
  }

  TEST_CASE("token authentication") {
    Station station(noise(3.0));
    auto cfg = local();
    cfg.token = "sesame";
    Server server(station, cfg);
    CHECK(code_of([&] { Client c(endpoint(server)); }) == Errc::Unauthorized);
    {
      Client wrong(endpoint(server), std::string("guess"));
      auto m = wrong.receive(2s);
      REQUIRE(m.has_value());
      CHECK(std::get<protocol::Err>(*m).code == protocol::ErrCode::Unauthorized);
    }
    Client right(endpoint(server), std::string("sesame"));
    auto rreg = op(protocol::CommandOp::Rreg);
    CHECK(right.command(rreg).value == ads1299::kDeviceId);
  }

  TEST_CASE("non-loopback bind needs a token") {
    Station station(noise(3.0));
    auto cfg = local();
    cfg.tcp_host = "0.0.0.0";
    CHECK(code_of([&] { Server s(station, cfg); }) == Errc::BindFailure);
    CHECK(is_loopback("127.0.0.1"));
    CHECK(is_loopback("localhost"));
    CHECK(is_loopback("::1"));
    CHECK(!is_loopback("0.0.0.0"));
    CHECK(!is_loopback("192.168.1.10"));
  }

  TEST_CASE("endpoints") {
    CHECK(parse_endpoint("127.0.0.1:7715") == std::pair<std::string, std::uint16_t>{"127.0.0.1", 7715});
    CHECK(parse_endpoint("tcp://localhost:9") == std::pair<std::string, std::uint16_t>{"localhost", 9});
    CHECK(parse_endpoint("[::1]:80") == std::pair<std::string, std::uint16_t>{"::1", 80});
    CHECK(code_of([] { parse_endpoint("nohost"); }) == Errc::ConnectionFailed);
    CHECK(code_of([] { parse_endpoint("h:99999"); }) == Errc::ConnectionFailed);
  }

  TEST_CASE("websocket handshake and frames") {
    Station station(noise(3.0));
    Server server(station, local());
    const int fd = ws_open(server);
    const auto head = read_http_head(fd);
    CHECK(head.rfind("HTTP/1.1 101", 0) == 0);
    CHECK(head.find("Sec-WebSocket-Accept: s3pPLMBiTxaQ9kYGzzhZRbK+xOo=") != std::string::npos);
    auto [opcode, payload] = ws_read(fd);
    CHECK(opcode == 0x2);
    const auto hello = std::get<protocol::Hello>(protocol::decode(payload));
    CHECK(hello.fs == 250.0);

    auto rreg = op(protocol::CommandOp::Rreg);
    rreg.id = 9;
    const auto bytes = protocol::encode(rreg);
    raw_send(fd, ws_frame(0x2, bytes));
    std::tie(opcode, payload) = ws_read(fd);
    CHECK(std::get<protocol::Ack>(protocol::decode(payload)).value == ads1299::kDeviceId);

    const std::uint8_t ping[] = {'h', 'i'};
    raw_send(fd, ws_frame(0x9, ping));
    std::tie(opcode, payload) = ws_read(fd);
    CHECK(opcode == 0xA);
    CHECK(payload == std::vector<std::uint8_t>{'h', 'i'});

    const std::uint8_t text[] = {'{', '}'};
    raw_send(fd, ws_frame(0x1, text));
    std::tie(opcode, payload) = ws_read(fd);
    CHECK(opcode == 0x8);
    REQUIRE(payload.size() == 2);
    CHECK(((payload[0] << 8) | payload[1]) == 1003);
    ::close(fd);

    const int fd2 = ws_open(server);
    read_http_head(fd2);
    ws_read(fd2);
    raw_send(fd2, ws_frame(0x2, bytes, false));
    std::tie(opcode, payload) = ws_read(fd2);
    CHECK(opcode == 0x8);
    REQUIRE(payload.size() == 2);
    CHECK(((payload[0] << 8) | payload[1]) == 1002);
    ::close(fd2);

    const int fd3 = raw_connect(server.ws_port());
    raw_send(fd3, "GET /other HTTP/1.1\r\nHost: x\r\n\r\n");
    CHECK(read_http_head(fd3).rfind("HTTP/1.1 404", 0) == 0);
    ::close(fd3);
  }

  TEST_CASE("metrics reach subscribed clients") {
    Station station([] { return std::make_unique<SimulatorBackend>(synth::fig6_scenario()); });
    Server server(station, local());
    Client c(endpoint(server));
    auto sub = op(protocol::CommandOp::Subscribe);
    sub.flags = protocol::kSubscribeMetrics;
    c.command(sub);
    c.command(op(protocol::CommandOp::Start));
    std::optional<protocol::Metrics> metrics;
    int data = 0;
    const auto until = std::chrono::steady_clock::now() + 6s;
    while (std::chrono::steady_clock::now() < until && !(metrics && metrics->window_s >= 2.0f)) {
      auto m = c.receive(500ms);
      if (!m) continue;
      if (auto* mm = std::get_if<protocol::Metrics>(&*m)) metrics = *mm;
      if (std::holds_alternative<protocol::Data>(*m)) ++data;
    }
    REQUIRE(metrics.has_value());
    CHECK(metrics->window_s == 2.0f);
    CHECK(metrics->alpha_power[0] > 0.0f);
    CHECK(data == 0);
    c.command(op(protocol::CommandOp::Stop));
    try {
      c.command(op(protocol::CommandOp::Stop));
      FAIL("expected ERR");
    } catch (const RemoteError& e) {
      CHECK(e.err().code == protocol::ErrCode::NotRunning);
    }
  }

  TEST_CASE("client stats") {
    Station station(noise(1.0));
    Server server(station, local());
    {
      Client c(endpoint(server));
      c.command(op(protocol::CommandOp::Start));
      station.wait();
      drain(c, 500ms);
      const auto st = server.client_stats();
      REQUIRE(st.size() == 1);
      CHECK(st[0].transport == "tcp");
      CHECK(st[0].samples_sent == 250);
    }
    std::this_thread::sleep_for(200ms);
    CHECK(server.client_count() == 0);
  }
}
