#pragma once

// TCP and WebSocket front ends for a Station. Both carry the same PEEG
// frames; on the WebSocket each binary message holds one frame.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "peeg/protocol.hpp"
#include "peeg/station.hpp"

namespace peeg {

struct ServerConfig {
  std::string tcp_host = "127.0.0.1";
  std::uint16_t tcp_port = 7715;  // 0 picks a free port
  bool websocket = true;
  std::string ws_host = "127.0.0.1";
  std::uint16_t ws_port = 7716;
  std::string ws_path = "/stream";
  std::optional<std::string> token;  // set: clients must authenticate
  std::size_t client_queue_blocks = 64;
};

bool is_loopback(const std::string& host);

struct ClientStats {
  std::uint64_t id = 0;
  std::string transport;  // tcp | ws
  SubscriberStats queue;  // offered/delivered/dropped at the client's queue
  std::uint64_t data_sent = 0;
  std::uint64_t samples_sent = 0;    // source samples covered by sent DATA
  std::uint64_t dropped_reported = 0;  // sum of dropped_before sent
  bool connected = false;
};

class Server {
 public:
  /// Binds both listeners. Throws BindFailure, including for a
  /// non-loopback address without a token.
  Server(Station& station, ServerConfig config = {});
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  std::uint16_t tcp_port() const noexcept { return tcp_port_; }
  std::uint16_t ws_port() const noexcept { return ws_port_; }

  void stop();
  std::size_t client_count() const;
  std::vector<ClientStats> client_stats() const;

 private:
  struct Connection;

  void accept_loop();
  void spawn(int fd, bool websocket);
  void reap();

  Station& station_;
  ServerConfig config_;
  int tcp_fd_ = -1;
  int ws_fd_ = -1;
  std::uint16_t tcp_port_ = 0;
  std::uint16_t ws_port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  int metrics_listener_ = 0;

  mutable std::mutex mu_;
  std::list<std::shared_ptr<Connection>> connections_;
  std::vector<ClientStats> finished_;
  std::uint64_t next_id_ = 1;
};

/// Blocking TCP client for the station protocol.
class Client {
 public:
  /// `endpoint` is host:port (an optional tcp:// prefix is accepted).
  /// Reads the server HELLO and authenticates with `token` when required.
  /// Throws ConnectionFailed or Unauthorized.
  explicit Client(const std::string& endpoint, std::optional<std::string> token = std::nullopt,
                  std::chrono::milliseconds timeout = std::chrono::seconds(5));
  ~Client();

  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  const protocol::Hello& hello() const noexcept { return hello_; }

  void send(const protocol::Message& m);
  /// Next message, or nullopt on timeout. Throws ConnectionFailed when the
  /// server closed the connection.
  std::optional<protocol::Message> receive(std::chrono::milliseconds timeout);

  /// Sends a command (assigning an id when 0) and waits for its ACK. Other
  /// messages received meanwhile are kept for receive(). Throws RemoteError.
  protocol::Ack command(protocol::Command cmd, std::chrono::milliseconds timeout = std::chrono::seconds(5));

  /// Raw bytes, for tests that need to misbehave.
  void send_raw(std::span<const std::uint8_t> bytes);
  void close();

 private:
  std::optional<protocol::Message> read_one(std::chrono::milliseconds timeout);

  int fd_ = -1;
  protocol::Hello hello_;
  protocol::FrameReader reader_;
  std::deque<protocol::Message> pending_;
  std::uint32_t next_id_ = 1;
};

class RemoteError : public Error {
 public:
  explicit RemoteError(const protocol::Err& err)
      : Error(Errc::Remote, std::string(protocol::to_string(err.code)) + ": " + err.text), err_(err) {}
  const protocol::Err& err() const noexcept { return err_; }

 private:
  protocol::Err err_;
};

/// host:port split; throws ConnectionFailed on a malformed endpoint.
std::pair<std::string, std::uint16_t> parse_endpoint(std::string_view endpoint);

}  // namespace peeg
