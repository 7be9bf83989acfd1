#pragma once

// Wire format shared by the TCP and WebSocket transports. Every message is
//
//   "PEEG" | version u8 | type u8 | length u32 LE | body[length]
//
// with little-endian bodies laid out in docs/protocol.md.

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "peeg/ads1299.hpp"
#include "peeg/error.hpp"
#include "peeg/sample_block.hpp"

namespace peeg::protocol {

inline constexpr std::array<std::uint8_t, 4> kMagic = {'P', 'E', 'E', 'G'};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 10;
inline constexpr std::uint32_t kMaxBodyLength = 16u << 20;

enum class MessageType : std::uint8_t {
  Hello = 1,
  Data = 2,
  Metrics = 3,
  Command = 4,
  Ack = 5,
  Err = 6,
};

/// Sent by the server on connect. A client answers with its own HELLO
/// carrying `token` when auth_required is set.
struct Hello {
  std::string server;
  double fs = 250.0;
  std::uint16_t block_len = 25;
  std::array<std::uint8_t, ads1299::kChannels> gains{};
  double vref = ads1299::kDefaultVref;
  std::array<std::string, ads1299::kChannels> labels;
  std::uint32_t epoch = 0;
  bool running = false;
  bool auth_required = false;
  std::string backend;
  std::string token;

  friend bool operator==(const Hello&, const Hello&) = default;
};

inline constexpr std::uint8_t kDataRawCodes = 0x01;

struct Data {
  std::uint64_t seq = 0;
  std::int64_t t0_ns = 0;
  std::int64_t host_time_ns = 0;
  double fs = 250.0;
  std::uint32_t epoch = 0;
  std::uint64_t dropped_before = 0;
  std::array<std::uint8_t, ads1299::kChannels> gains{};
  std::uint16_t block_len = 0;
  std::uint8_t flags = 0;
  // Channel-major, 8 * block_len entries; uv unless kDataRawCodes is set.
  std::vector<float> uv;
  std::vector<std::int32_t> codes;

  friend bool operator==(const Data&, const Data&) = default;
};

/// Fixed part of a DATA body before the samples.
inline constexpr std::size_t kDataHeaderSize = 55;

enum class EventCounter : std::size_t { Blinks = 0, Chews = 1, EmgOnsets = 2, RPeaks = 3 };

struct Metrics {
  std::uint64_t seq = 0;  // last block included
  float window_s = 0.0f;
  std::array<float, ads1299::kChannels> alpha_power{};  // uV^2 in 8-12 Hz
  std::array<std::uint32_t, 4> counts{};                // cumulative, by EventCounter

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

enum class CommandOp : std::uint8_t {
  Start = 1,
  Stop = 2,
  Rreg = 3,
  Wreg = 4,
  Annotate = 5,
  SetScenario = 6,
  Subscribe = 7,
  Credit = 8,
};

inline constexpr std::uint8_t kSubscribeData = 0x01;
inline constexpr std::uint8_t kSubscribeMetrics = 0x02;
inline constexpr std::uint8_t kSubscribeRaw = 0x04;

struct Command {
  std::uint32_t id = 0;
  CommandOp op = CommandOp::Start;
  std::uint8_t address = 0;   // RREG, WREG
  std::uint8_t value = 0;     // WREG
  double time = 0.0;          // ANNOTATE
  std::string text;           // ANNOTATE text, SET_SCENARIO json
  std::uint8_t flags = kSubscribeData | kSubscribeMetrics;  // SUBSCRIBE
  std::uint16_t decimation = 1;                             // SUBSCRIBE
  std::uint32_t credit = 0;                                 // CREDIT

  friend bool operator==(const Command&, const Command&) = default;
};

struct Ack {
  std::uint32_t cmd_id = 0;
  bool ok = true;
  std::uint8_t value = 0;   // register value for RREG/WREG
  std::uint32_t epoch = 0;  // register epoch after the command

  friend bool operator==(const Ack&, const Ack&) = default;
};

enum class ErrCode : std::uint16_t {
  InvalidReg = 1,
  Unsupported = 2,
  NotRunning = 3,
  Unauthorized = 4,
  BadMagic = 5,
  UnknownType = 6,
  LengthOverflow = 7,
  Malformed = 8,
  BadVersion = 9,
  Internal = 10,
};

std::string_view to_string(ErrCode code) noexcept;
ErrCode err_code_for(Errc code) noexcept;

struct Err {
  std::uint32_t cmd_id = 0;
  ErrCode code = ErrCode::Malformed;
  std::string text;

  friend bool operator==(const Err&, const Err&) = default;
};

using Message = std::variant<Hello, Data, Metrics, Command, Ack, Err>;

MessageType type_of(const Message& m) noexcept;

/// Throws Malformed when a field does not fit its wire width.
std::vector<std::uint8_t> encode(const Message& m);

struct FrameHeader {
  std::uint8_t version = kVersion;
  std::uint8_t type = 0;
  std::uint32_t length = 0;
};

/// Parses the 10-byte envelope. Throws BadMagic, UnsupportedVersion or
/// LengthOverflow.
FrameHeader decode_header(std::span<const std::uint8_t> bytes);

/// Decodes the body of a frame whose envelope was valid. Throws UnknownType
/// or Malformed.
Message decode_body(std::uint8_t type, std::span<const std::uint8_t> body);

/// Decodes exactly one complete frame. Throws as decode_header/decode_body,
/// or Truncated / Malformed when the size does not match.
Message decode(std::span<const std::uint8_t> bytes);

/// Reassembles frames from an arbitrary byte stream.
class FrameReader {
 public:
  struct Frame {
    std::uint8_t type = 0;
    std::vector<std::uint8_t> body;
  };

  void feed(std::span<const std::uint8_t> bytes);
  /// Next complete frame, or nullopt when more bytes are needed. Envelope
  /// errors (BadMagic, UnsupportedVersion, LengthOverflow) are thrown and
  /// leave the reader unusable: the stream cannot be resynchronised.
  std::optional<Frame> next();
  std::size_t buffered() const noexcept { return buf_.size() - pos_; }

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
  std::optional<FrameHeader> header_;
};

/// DATA for one block. Decimation keeps every n-th sample starting at
/// `phase` (updated for the next block); fs and block_len describe the kept
/// samples while dropped_before stays in source samples.
Data make_data(const SampleBlock& block, bool raw_codes = false, std::uint16_t decimation = 1,
               std::size_t* phase = nullptr);

// --- per-connection state machine --------------------------------------------

/// What a connection can do to the station. The server implements it over a
/// Station; tests use stubs.
class CommandTarget {
 public:
  virtual ~CommandTarget() = default;
  virtual Hello hello() const = 0;
  virtual void start() = 0;
  virtual void stop() = 0;
  virtual std::uint8_t read_register(std::uint8_t address) = 0;
  /// Returns the epoch the write took effect in.
  virtual std::uint32_t write_register(std::uint8_t address, std::uint8_t value) = 0;
  virtual std::uint32_t epoch() const = 0;
  virtual void annotate(double time, const std::string& text) = 0;
  virtual void set_scenario(const std::string& json) = 0;
};

struct ClientPrefs {
  bool data = true;
  bool metrics = true;
  bool raw = false;
  std::uint16_t decimation = 1;
};

/// Transport-independent protocol handling for one client: decoding,
/// authentication, command dispatch with idempotent replay by command id,
/// subscription preferences and credit.
class ProtocolSession {
 public:
  static constexpr std::uint32_t kDefaultCredit = 64;
  static constexpr std::size_t kReplayCacheSize = 256;

  ProtocolSession(CommandTarget& target, std::optional<std::string> token);

  /// HELLO to send first.
  std::vector<std::uint8_t> greeting() const;

  /// Consumes client bytes; encoded replies are appended to `out`. Returns
  /// false once the connection must be closed (after any final ERR).
  bool receive(std::span<const std::uint8_t> bytes, std::vector<std::vector<std::uint8_t>>& out);

  bool open() const;
  bool authenticated() const;
  ClientPrefs prefs() const;

  /// Takes one unit of credit for a DATA message; false if none is left.
  bool take_credit();
  /// In automatic mode (no CREDIT received yet) the window refills as
  /// messages reach the socket.
  void on_data_sent();
  std::uint32_t credit() const;

 private:
  void handle(const FrameReader::Frame& frame, std::vector<std::vector<std::uint8_t>>& out);
  std::vector<std::uint8_t> dispatch(const Command& cmd);

  CommandTarget& target_;
  std::optional<std::string> token_;
  FrameReader reader_;
  bool open_ = true;

  mutable std::mutex mu_;  // prefs and credit, shared with the writer
  bool authenticated_;
  ClientPrefs prefs_;
  bool manual_credit_ = false;
  std::uint32_t credit_ = kDefaultCredit;

  std::map<std::uint32_t, std::vector<std::uint8_t>> replies_;
  std::deque<std::uint32_t> reply_order_;
};

}  // namespace peeg::protocol
