#include "peeg/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <openssl/evp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <condition_variable>
#include <cstring>

namespace peeg {

namespace {

using Bytes = std::vector<std::uint8_t>;

constexpr std::string_view kWsGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
constexpr std::size_t kOutboxLimit = 256;

bool send_all(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t k = ::send(fd, data, n, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += k;
    n -= static_cast<std::size_t>(k);
  }
  return true;
}

int listen_on(const std::string& host, std::uint16_t port, std::uint16_t& bound) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw Error(Errc::BindFailure, host + ": " + ::gai_strerror(rc));
  }
  std::string last = "no address";
  for (auto* ai = res; ai; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 16) == 0) {
      sockaddr_storage ss{};
      socklen_t len = sizeof ss;
      ::getsockname(fd, reinterpret_cast<sockaddr*>(&ss), &len);
      bound = ntohs(ss.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&ss)->sin6_port
                                              : reinterpret_cast<sockaddr_in*>(&ss)->sin_port);
      ::freeaddrinfo(res);
      return fd;
    }
    last = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(res);
  throw Error(Errc::BindFailure, host + ":" + service + ": " + last);
}

std::string ws_accept_key(const std::string& key) {
  const std::string in = key + std::string(kWsGuid);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int md_len = 0;
  EVP_Digest(in.data(), in.size(), md, &md_len, EVP_sha1(), nullptr);
  unsigned char out[64];
  const int n = EVP_EncodeBlock(out, md, static_cast<int>(md_len));
  return {reinterpret_cast<char*>(out), static_cast<std::size_t>(n)};
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

Bytes ws_frame(std::uint8_t opcode, std::span<const std::uint8_t> payload) {
  Bytes f;
  f.reserve(payload.size() + 10);
  f.push_back(static_cast<std::uint8_t>(0x80 | opcode));
  const std::size_t n = payload.size();
  if (n < 126) {
    f.push_back(static_cast<std::uint8_t>(n));
  } else if (n <= 0xFFFF) {
    f.push_back(126);
    f.push_back(static_cast<std::uint8_t>(n >> 8));
    f.push_back(static_cast<std::uint8_t>(n));
  } else {
    f.push_back(127);
    for (int i = 7; i >= 0; --i) f.push_back(static_cast<std::uint8_t>(std::uint64_t{n} >> (8 * i)));
  }
  f.insert(f.end(), payload.begin(), payload.end());
  return f;
}

}  // namespace

bool is_loopback(const std::string& host) {
  return host == "localhost" || host == "::1" || host.starts_with("127.");
}

std::pair<std::string, std::uint16_t> parse_endpoint(std::string_view endpoint) {
  if (endpoint.starts_with("tcp://")) endpoint.remove_prefix(6);
  const auto colon = endpoint.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == endpoint.size()) {
    throw Error(Errc::ConnectionFailed, "endpoint must be host:port, got '" + std::string(endpoint) + "'");
  }
  std::string host(endpoint.substr(0, colon));
  if (host.size() > 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  unsigned port = 0;
  for (char c : endpoint.substr(colon + 1)) {
    if (c < '0' || c > '9' || (port = port * 10 + static_cast<unsigned>(c - '0')) > 65535) {
      throw Error(Errc::ConnectionFailed, "bad port in '" + std::string(endpoint) + "'");
    }
  }
  return {host, static_cast<std::uint16_t>(port)};
}

// --- connection ------------------------------------------------------------

struct Server::Connection {
  std::uint64_t id = 0;
  bool websocket = false;
  int fd = -1;
  Station* station = nullptr;
  std::size_t queue_blocks = 64;
  std::string ws_path;
  std::unique_ptr<protocol::ProtocolSession> session;

  std::mutex out_mu;
  std::condition_variable out_cv;
  std::deque<Bytes> outbox;
  bool closing = false;
  bool ready = false;  // greeting sent; outbox may be used

  std::mutex send_mu;
  std::thread main;
  std::atomic<bool> finished{false};

  std::shared_ptr<Subscription> sub;
  std::uint64_t sub_generation = 0;
  std::size_t phase = 0;

  mutable std::mutex stats_mu;
  ClientStats stats;

  bool send_message(std::span<const std::uint8_t> msg) {
    std::lock_guard lk(send_mu);
    if (!websocket) return send_all(fd, msg.data(), msg.size());
    const auto f = ws_frame(0x2, msg);
    return send_all(fd, f.data(), f.size());
  }

  bool send_ws_control(std::uint8_t opcode, std::span<const std::uint8_t> payload) {
    std::lock_guard lk(send_mu);
    const auto f = ws_frame(opcode, payload);
    return send_all(fd, f.data(), f.size());
  }

  void enqueue(Bytes msg) {
    {
      std::lock_guard lk(out_mu);
      if (!ready || closing) return;
      outbox.push_back(std::move(msg));
    }
    out_cv.notify_one();
  }

  void close_soon() {
    {
      std::lock_guard lk(out_mu);
      closing = true;
    }
    out_cv.notify_one();
  }

  bool handshake(Bytes& leftover);
  void read_loop(Bytes leftover);
  void write_loop();
  bool pump_data();
  void run();
};

bool Server::Connection::handshake(Bytes& leftover) {
  std::string req;
  char buf[1024];
  std::size_t end = std::string::npos;
  while ((end = req.find("\r\n\r\n")) == std::string::npos) {
    if (req.size() > 8192) return false;
    const ssize_t k = ::recv(fd, buf, sizeof buf, 0);
    if (k <= 0) return false;
    req.append(buf, static_cast<std::size_t>(k));
  }
  leftover.assign(req.begin() + static_cast<std::ptrdiff_t>(end + 4), req.end());
  req.resize(end);

  auto reject = [&](std::string_view status) {
    const std::string resp = "HTTP/1.1 " + std::string(status) + "\r\nContent-Length: 0\r\nConnection: close\r\n\r\n";
    send_all(fd, reinterpret_cast<const std::uint8_t*>(resp.data()), resp.size());
    return false;
  };

  const auto line_end = req.find("\r\n");
  const std::string request_line = req.substr(0, line_end);
  std::string key, upgrade, version;
  std::size_t pos = line_end == std::string::npos ? req.size() : line_end + 2;
  while (pos < req.size()) {
    auto next = req.find("\r\n", pos);
    if (next == std::string::npos) next = req.size();
    const std::string_view line(req.data() + pos, next - pos);
    if (const auto colon = line.find(':'); colon != std::string_view::npos) {
      const auto name = lower(trim(line.substr(0, colon)));
      const auto value = trim(line.substr(colon + 1));
      if (name == "sec-websocket-key") key = value;
      if (name == "upgrade") upgrade = lower(value);
      if (name == "sec-websocket-version") version = value;
    }
    pos = next + 2;
  }
  if (!request_line.starts_with("GET ")) return reject("405 Method Not Allowed");
  const auto sp = request_line.find(' ', 4);
  std::string target = request_line.substr(4, sp == std::string::npos ? std::string::npos : sp - 4);
  if (const auto q = target.find('?'); q != std::string::npos) target.resize(q);
  if (target != ws_path) return reject("404 Not Found");
  if (upgrade != "websocket" || key.empty()) return reject("400 Bad Request");
  if (version != "13") return reject("426 Upgrade Required\r\nSec-WebSocket-Version: 13");

  const std::string resp =
      "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
      "Sec-WebSocket-Accept: " + ws_accept_key(key) + "\r\n\r\n";
  return send_all(fd, reinterpret_cast<const std::uint8_t*>(resp.data()), resp.size());
}

void Server::Connection::read_loop(Bytes leftover) {
  std::vector<Bytes> replies;
  auto feed = [&](std::span<const std::uint8_t> bytes) {
    replies.clear();
    const bool keep = session->receive(bytes, replies);
    for (auto& r : replies) enqueue(std::move(r));
    if (!keep) close_soon();
    return keep;
  };

  Bytes ws_buf = std::move(leftover);
  Bytes buf(64 * 1024);
  bool first = websocket;  // ws leftover is processed before the first recv
  while (true) {
    if (!first) {
      const ssize_t k = ::recv(fd, buf.data(), buf.size(), 0);
      if (k < 0 && errno == EINTR) continue;
      if (k <= 0) break;
      if (!websocket) {
        if (!feed({buf.data(), static_cast<std::size_t>(k)})) break;
        continue;
      }
      ws_buf.insert(ws_buf.end(), buf.begin(), buf.begin() + k);
    }
    first = false;

    // Parse as many complete WebSocket frames as are buffered.
    std::size_t pos = 0;
    bool stop = false;
    while (!stop) {
      const std::size_t avail = ws_buf.size() - pos;
      if (avail < 2) break;
      const std::uint8_t b0 = ws_buf[pos], b1 = ws_buf[pos + 1];
      const std::uint8_t opcode = b0 & 0x0F;
      const bool masked = b1 & 0x80;
      std::uint64_t len = b1 & 0x7F;
      std::size_t hdr = 2;
      if (len == 126) {
        if (avail < 4) break;
        len = (std::uint64_t{ws_buf[pos + 2]} << 8) | ws_buf[pos + 3];
        hdr = 4;
      } else if (len == 127) {
        if (avail < 10) break;
        len = 0;
        for (int i = 0; i < 8; ++i) len = (len << 8) | ws_buf[pos + 2 + static_cast<std::size_t>(i)];
        hdr = 10;
      }
      if (!masked || len > protocol::kMaxBodyLength + protocol::kHeaderSize) {
        const std::uint8_t code[2] = {0x03, static_cast<std::uint8_t>(masked ? 0xF1 : 0xEA)};  // 1009 / 1002
        send_ws_control(0x8, code);
        stop = true;
        break;
      }
      if (avail < hdr + 4 + len) break;
      const std::uint8_t* mask = &ws_buf[pos + hdr];
      Bytes payload(ws_buf.begin() + static_cast<std::ptrdiff_t>(pos + hdr + 4),
                    ws_buf.begin() + static_cast<std::ptrdiff_t>(pos + hdr + 4 + len));
      for (std::size_t i = 0; i < payload.size(); ++i) payload[i] ^= mask[i % 4];
      pos += hdr + 4 + len;

      switch (opcode) {
        case 0x0:  // continuation
        case 0x2:  // binary
          if (!feed(payload)) stop = true;
          break;
        case 0x8:  // close
          send_ws_control(0x8, payload.size() >= 2 ? std::span<const std::uint8_t>(payload.data(), 2)
                                                   : std::span<const std::uint8_t>());
          stop = true;
          break;
        case 0x9:  // ping
          send_ws_control(0xA, payload);
          break;
        case 0xA:  // pong
          break;
        default: {  // text or reserved: the protocol is binary only
          const std::uint8_t code[2] = {0x03, 0xEB};  // 1003
          send_ws_control(0x8, code);
          stop = true;
        }
      }
    }
    ws_buf.erase(ws_buf.begin(), ws_buf.begin() + static_cast<std::ptrdiff_t>(pos));
    if (stop) break;
  }
  close_soon();
}

bool Server::Connection::pump_data() {
  if (!session->authenticated()) return true;
  const auto prefs = session->prefs();
  if (!prefs.data) {
    if (sub) {
      sub->cancel();
      std::lock_guard lk(stats_mu);
      sub.reset();
    }
    return true;
  }
  const auto gen = station->generation();
  if (!sub || (sub->finished() && gen != sub_generation)) {
    if (sub) sub->cancel();
    auto next = station->subscribe("client-" + std::to_string(id), queue_blocks);
    std::lock_guard lk(stats_mu);
    sub = std::move(next);
    sub_generation = gen;
    phase = 0;
  }
  for (int i = 0; i < 64 && session->credit() > 0; ++i) {
    auto b = sub->try_pop();
    if (!b) break;
    session->take_credit();
    const auto data = protocol::make_data(*b, prefs.raw, prefs.decimation, &phase);
    if (!send_message(protocol::encode(data))) return false;
    session->on_data_sent();
    std::lock_guard lk(stats_mu);
    ++stats.data_sent;
    stats.samples_sent += b->block_len;
    stats.dropped_reported += b->dropped_before;
  }
  return true;
}

void Server::Connection::write_loop() {
  while (true) {
    std::deque<Bytes> batch;
    bool closing_now;
    {
      std::unique_lock lk(out_mu);
      out_cv.wait_for(lk, std::chrono::milliseconds(5), [&] { return !outbox.empty() || closing; });
      batch.swap(outbox);
      closing_now = closing;
    }
    bool ok = true;
    for (auto& m : batch) {
      if (!(ok = send_message(m))) break;
    }
    if (!ok || closing_now) break;
    if (!pump_data()) break;
  }
  if (sub) sub->cancel();
  {
    std::lock_guard lk(out_mu);
    closing = true;
  }
  ::shutdown(fd, SHUT_RDWR);
}

void Server::Connection::run() {
  Bytes leftover;
  if (websocket && !handshake(leftover)) {
    ::shutdown(fd, SHUT_RDWR);
    finished = true;
    return;
  }
  if (send_message(session->greeting())) {
    {
      std::lock_guard lk(out_mu);
      ready = true;
    }
    std::thread writer([this] { write_loop(); });
    read_loop(std::move(leftover));
    writer.join();
  }
  ::shutdown(fd, SHUT_RDWR);
  std::lock_guard lk(stats_mu);
  if (sub) stats.queue = sub->stats();
  stats.connected = false;
  finished = true;
}

// --- server ----------------------------------------------------------------

Server::Server(Station& station, ServerConfig config) : station_(station), config_(std::move(config)) {
  if (!config_.token && (!is_loopback(config_.tcp_host) || (config_.websocket && !is_loopback(config_.ws_host)))) {
    throw Error(Errc::BindFailure, "refusing a non-loopback bind without an access token (set PEEG_TOKEN)");
  }
  tcp_fd_ = listen_on(config_.tcp_host, config_.tcp_port, tcp_port_);
  if (config_.websocket) {
    try {
      ws_fd_ = listen_on(config_.ws_host, config_.ws_port, ws_port_);
    } catch (...) {
      ::close(tcp_fd_);
      throw;
    }
  }
  metrics_listener_ = station_.add_metrics_listener([this](const protocol::Metrics& m) {
    const auto bytes = protocol::encode(m);
    std::lock_guard lk(mu_);
    for (auto& c : connections_) {
      if (c->finished || !c->session->authenticated() || !c->session->prefs().metrics) continue;
      std::lock_guard ol(c->out_mu);
      if (c->ready && !c->closing && c->outbox.size() < kOutboxLimit) c->outbox.push_back(bytes);
    }
  });
  acceptor_ = std::thread([this] { accept_loop(); });
}

Server::~Server() { stop(); }

void Server::stop() {
  if (stopping_.exchange(true)) return;
  if (acceptor_.joinable()) acceptor_.join();
  station_.remove_metrics_listener(metrics_listener_);
  if (tcp_fd_ >= 0) ::close(tcp_fd_);
  if (ws_fd_ >= 0) ::close(ws_fd_);
  std::list<std::shared_ptr<Connection>> conns;
  {
    std::lock_guard lk(mu_);
    conns.swap(connections_);
  }
  for (auto& c : conns) {
    c->close_soon();
    ::shutdown(c->fd, SHUT_RDWR);
  }
  for (auto& c : conns) {
    if (c->main.joinable()) c->main.join();
    ::close(c->fd);
  }
}

void Server::accept_loop() {
  while (!stopping_) {
    pollfd fds[2] = {{tcp_fd_, POLLIN, 0}, {ws_fd_, POLLIN, 0}};
    const nfds_t n = ws_fd_ >= 0 ? 2 : 1;
    const int r = ::poll(fds, n, 100);
    reap();
    if (r <= 0) continue;
    for (nfds_t i = 0; i < n; ++i) {
      if (!(fds[i].revents & POLLIN)) continue;
      const int fd = ::accept4(fds[i].fd, nullptr, nullptr, SOCK_CLOEXEC);
      if (fd < 0) continue;
      spawn(fd, i == 1);
    }
  }
}

void Server::spawn(int fd, bool websocket) {
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  auto c = std::make_shared<Connection>();
  c->fd = fd;
  c->websocket = websocket;
  c->station = &station_;
  c->queue_blocks = config_.client_queue_blocks;
  c->ws_path = config_.ws_path;
  c->session = std::make_unique<protocol::ProtocolSession>(station_, config_.token);
  {
    std::lock_guard lk(mu_);
    c->id = next_id_++;
  }
  c->stats.id = c->id;
  c->stats.transport = websocket ? "ws" : "tcp";
  c->stats.connected = true;
  c->main = std::thread([c] { c->run(); });
  std::lock_guard lk(mu_);
  connections_.push_back(std::move(c));
}

void Server::reap() {
  std::vector<std::shared_ptr<Connection>> done;
  {
    std::lock_guard lk(mu_);
    for (auto it = connections_.begin(); it != connections_.end();) {
      if ((*it)->finished) {
        done.push_back(*it);
        it = connections_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& c : done) {
    if (c->main.joinable()) c->main.join();
    ::close(c->fd);
    std::lock_guard lk(mu_);
    std::lock_guard sl(c->stats_mu);
    finished_.push_back(c->stats);
  }
}

std::size_t Server::client_count() const {
  std::lock_guard lk(mu_);
  return static_cast<std::size_t>(std::count_if(connections_.begin(), connections_.end(),
                                                [](const auto& c) { return !c->finished; }));
}

std::vector<ClientStats> Server::client_stats() const {
  std::lock_guard lk(mu_);
  std::vector<ClientStats> out = finished_;
  for (const auto& c : connections_) {
    std::lock_guard sl(c->stats_mu);
    ClientStats s = c->stats;
    if (!c->finished && c->sub) s.queue = c->sub->stats();
    out.push_back(s);
  }
  return out;
}

// --- client ----------------------------------------------------------------

Client::Client(const std::string& endpoint, std::optional<std::string> token, std::chrono::milliseconds timeout) {
  const auto [host, port] = parse_endpoint(endpoint);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res); rc != 0) {
    throw Error(Errc::ConnectionFailed, endpoint + ": " + ::gai_strerror(rc));
  }
  std::string last = "no address";
  for (auto* ai = res; ai && fd_ < 0; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      fd_ = fd;
    } else {
      last = std::strerror(errno);
      ::close(fd);
    }
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) throw Error(Errc::ConnectionFailed, endpoint + ": " + last);
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);

  auto first = read_one(timeout);
  if (!first) throw Error(Errc::ConnectionFailed, endpoint + ": no HELLO from server");
  const auto* h = std::get_if<protocol::Hello>(&*first);
  if (!h) throw Error(Errc::ConnectionFailed, endpoint + ": first message was not HELLO");
  hello_ = *h;
  if (hello_.auth_required) {
    if (!token) throw Error(Errc::Unauthorized, "server requires a token (PEEG_TOKEN)");
    protocol::Hello mine;
    mine.server = "peeg-client";
    mine.token = *token;
    send(mine);
  }
}

Client::~Client() { close(); }

void Client::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void Client::send_raw(std::span<const std::uint8_t> bytes) {
  if (fd_ < 0 || !send_all(fd_, bytes.data(), bytes.size())) {
    throw Error(Errc::ConnectionFailed, "send failed");
  }
}

void Client::send(const protocol::Message& m) { send_raw(protocol::encode(m)); }

std::optional<protocol::Message> Client::read_one(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::uint8_t buf[65536];
  while (true) {
    if (auto f = reader_.next()) return protocol::decode_body(f->type, f->body);
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    pollfd p{fd_, POLLIN, 0};
    const int r = ::poll(&p, 1, static_cast<int>(left.count()));
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) return std::nullopt;
    const ssize_t k = ::recv(fd_, buf, sizeof buf, 0);
    if (k < 0 && errno == EINTR) continue;
    if (k <= 0) throw Error(Errc::ConnectionFailed, "connection closed by server");
    reader_.feed({buf, static_cast<std::size_t>(k)});
  }
}

std::optional<protocol::Message> Client::receive(std::chrono::milliseconds timeout) {
  if (!pending_.empty()) {
    auto m = std::move(pending_.front());
    pending_.pop_front();
    return m;
  }
  return read_one(timeout);
}

protocol::Ack Client::command(protocol::Command cmd, std::chrono::milliseconds timeout) {
  if (cmd.id == 0) cmd.id = next_id_++;
  send(cmd);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw Error(Errc::ConnectionFailed, "no reply to command " + std::to_string(cmd.id));
    auto m = read_one(left);
    if (!m) continue;
    if (const auto* ack = std::get_if<protocol::Ack>(&*m); ack && ack->cmd_id == cmd.id) return *ack;
    if (const auto* err = std::get_if<protocol::Err>(&*m)) {
      if (err->cmd_id == cmd.id || err->cmd_id == 0) throw RemoteError(*err);
    }
    pending_.push_back(std::move(*m));
  }
}

}  // namespace peeg
