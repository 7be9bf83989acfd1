#include "peeg/protocol.hpp"

#include <algorithm>
#include <cmath>

#include "bytes.hpp"

namespace peeg::protocol {
namespace {

using detail::ByteReader;
using detail::ByteWriter;

void put_labels(ByteWriter& w, const std::array<std::string, ads1299::kChannels>& labels) {
  for (const auto& l : labels) {
    if (l.size() > 0xFF) throw Error(Errc::Malformed, "channel label longer than 255 bytes");
    w.put(static_cast<std::uint8_t>(l.size()));
    w.bytes({reinterpret_cast<const std::uint8_t*>(l.data()), l.size()});
  }
}

std::array<std::string, ads1299::kChannels> get_labels(ByteReader& r) {
  std::array<std::string, ads1299::kChannels> labels;
  for (auto& l : labels) {
    const auto n = r.get<std::uint8_t>();
    const auto b = r.bytes(n);
    l.assign(b.begin(), b.end());
  }
  return labels;
}

void encode_body(ByteWriter& w, const Hello& m) {
  w.str16(m.server);
  w.put(m.fs);
  w.put(m.block_len);
  w.bytes(m.gains);
  w.put(m.vref);
  put_labels(w, m.labels);
  w.put(m.epoch);
  w.put(static_cast<std::uint8_t>((m.running ? 1 : 0) | (m.auth_required ? 2 : 0)));
  w.str16(m.backend);
  w.str16(m.token);
}

void encode_body(ByteWriter& w, const Data& m) {
  const std::size_t n = ads1299::kChannels * std::size_t{m.block_len};
  const bool raw = (m.flags & kDataRawCodes) != 0;
  if ((raw ? m.codes.size() : m.uv.size()) != n) {
    throw Error(Errc::Malformed, "DATA sample count does not match 8 x block_len");
  }
  w.put(m.seq);
  w.put(m.t0_ns);
  w.put(m.host_time_ns);
  w.put(m.fs);
  w.put(m.epoch);
  w.put(m.dropped_before);
  w.bytes(m.gains);
  w.put(m.block_len);
  w.put(m.flags);
  if (raw) {
    for (auto c : m.codes) w.put(c);
  } else {
    for (auto v : m.uv) w.put(v);
  }
}

void encode_body(ByteWriter& w, const Metrics& m) {
  w.put(m.seq);
  w.put(m.window_s);
  for (auto v : m.alpha_power) w.put(v);
  for (auto c : m.counts) w.put(c);
}

void encode_body(ByteWriter& w, const Command& m) {
  w.put(m.id);
  w.put(static_cast<std::uint8_t>(m.op));
  switch (m.op) {
    case CommandOp::Start:
    case CommandOp::Stop:
      break;
    case CommandOp::Rreg:
      w.put(m.address);
      break;
    case CommandOp::Wreg:
      w.put(m.address);
      w.put(m.value);
      break;
    case CommandOp::Annotate:
      w.put(m.time);
      w.str16(m.text);
      break;
    case CommandOp::SetScenario:
      w.str32(m.text);
      break;
    case CommandOp::Subscribe:
      w.put(m.flags);
      w.put(m.decimation);
      break;
    case CommandOp::Credit:
      w.put(m.credit);
      break;
    default:
      throw Error(Errc::Malformed, "unknown command op");
  }
}

void encode_body(ByteWriter& w, const Ack& m) {
  w.put(m.cmd_id);
  w.put(static_cast<std::uint8_t>(m.ok ? 1 : 0));
  w.put(m.value);
  w.put(m.epoch);
}

void encode_body(ByteWriter& w, const Err& m) {
  w.put(m.cmd_id);
  w.put(static_cast<std::uint16_t>(m.code));
  w.str16(m.text);
}

Hello decode_hello(ByteReader& r) {
  Hello m;
  m.server = r.str16();
  m.fs = r.get<double>();
  m.block_len = r.get<std::uint16_t>();
  const auto g = r.bytes(ads1299::kChannels);
  std::copy(g.begin(), g.end(), m.gains.begin());
  m.vref = r.get<double>();
  m.labels = get_labels(r);
  m.epoch = r.get<std::uint32_t>();
  const auto flags = r.get<std::uint8_t>();
  if (flags & ~3u) throw Error(Errc::Malformed, "HELLO flags");
  m.running = flags & 1;
  m.auth_required = flags & 2;
  m.backend = r.str16();
  m.token = r.str16();
  return m;
}

Data decode_data(ByteReader& r) {
  Data m;
  m.seq = r.get<std::uint64_t>();
  m.t0_ns = r.get<std::int64_t>();
  m.host_time_ns = r.get<std::int64_t>();
  m.fs = r.get<double>();
  m.epoch = r.get<std::uint32_t>();
  m.dropped_before = r.get<std::uint64_t>();
  const auto g = r.bytes(ads1299::kChannels);
  std::copy(g.begin(), g.end(), m.gains.begin());
  m.block_len = r.get<std::uint16_t>();
  m.flags = r.get<std::uint8_t>();
  if (m.flags & ~kDataRawCodes) throw Error(Errc::Malformed, "DATA flags");
  const std::size_t n = ads1299::kChannels * std::size_t{m.block_len};
  if (r.remaining() != 4 * n) throw Error(Errc::Malformed, "DATA length does not match 8 x block_len");
  if (m.flags & kDataRawCodes) {
    m.codes.resize(n);
    for (auto& c : m.codes) c = r.get<std::int32_t>();
  } else {
    m.uv.resize(n);
    for (auto& v : m.uv) v = r.get<float>();
  }
  return m;
}

Metrics decode_metrics(ByteReader& r) {
  Metrics m;
  m.seq = r.get<std::uint64_t>();
  m.window_s = r.get<float>();
  for (auto& v : m.alpha_power) v = r.get<float>();
  for (auto& c : m.counts) c = r.get<std::uint32_t>();
  return m;
}

Command decode_command(ByteReader& r) {
  Command m;
  m.id = r.get<std::uint32_t>();
  const auto op = r.get<std::uint8_t>();
  m.op = static_cast<CommandOp>(op);
  switch (m.op) {
    case CommandOp::Start:
    case CommandOp::Stop:
      break;
    case CommandOp::Rreg:
      m.address = r.get<std::uint8_t>();
      break;
    case CommandOp::Wreg:
      m.address = r.get<std::uint8_t>();
      m.value = r.get<std::uint8_t>();
      break;
    case CommandOp::Annotate:
      m.time = r.get<double>();
      m.text = r.str16();
      break;
    case CommandOp::SetScenario:
      m.text = r.str32();
      break;
    case CommandOp::Subscribe:
      m.flags = r.get<std::uint8_t>();
      m.decimation = r.get<std::uint16_t>();
      break;
    case CommandOp::Credit:
      m.credit = r.get<std::uint32_t>();
      break;
    default:
      throw Error(Errc::Malformed, "unknown command op " + std::to_string(op));
  }
  return m;
}

Ack decode_ack(ByteReader& r) {
  Ack m;
  m.cmd_id = r.get<std::uint32_t>();
  const auto ok = r.get<std::uint8_t>();
  if (ok > 1) throw Error(Errc::Malformed, "ACK ok flag");
  m.ok = ok == 1;
  m.value = r.get<std::uint8_t>();
  m.epoch = r.get<std::uint32_t>();
  return m;
}

Err decode_err(ByteReader& r) {
  Err m;
  m.cmd_id = r.get<std::uint32_t>();
  m.code = static_cast<ErrCode>(r.get<std::uint16_t>());
  m.text = r.str16();
  return m;
}

}  // namespace

std::string_view to_string(ErrCode code) noexcept {
  switch (code) {
    case ErrCode::InvalidReg: return "INVALID_REG";
    case ErrCode::Unsupported: return "UNSUPPORTED";
    case ErrCode::NotRunning: return "NOT_RUNNING";
    case ErrCode::Unauthorized: return "UNAUTHORIZED";
    case ErrCode::BadMagic: return "BAD_MAGIC";
    case ErrCode::UnknownType: return "UNKNOWN_TYPE";
    case ErrCode::LengthOverflow: return "LENGTH_OVERFLOW";
    case ErrCode::Malformed: return "MALFORMED";
    case ErrCode::BadVersion: return "BAD_VERSION";
    case ErrCode::Internal: return "INTERNAL";
  }
  return "UNKNOWN";
}

ErrCode err_code_for(Errc code) noexcept {
  switch (code) {
    case Errc::UnknownRegister:
    case Errc::ReadOnlyRegister:
    case Errc::InvalidFieldEncoding:
    case Errc::InvalidAddressRange:
      return ErrCode::InvalidReg;
    case Errc::Unsupported:
    case Errc::UnsupportedRate:
    case Errc::BackendUnavailable:
    case Errc::InconsistentRate:
    case Errc::AlreadyRunning:
    case Errc::PipelineClosed:
      return ErrCode::Unsupported;
    case Errc::NotRunning:
      return ErrCode::NotRunning;
    case Errc::Unauthorized:
      return ErrCode::Unauthorized;
    case Errc::BadMagic:
      return ErrCode::BadMagic;
    case Errc::UnknownType:
      return ErrCode::UnknownType;
    case Errc::LengthOverflow:
      return ErrCode::LengthOverflow;
    case Errc::UnsupportedVersion:
      return ErrCode::BadVersion;
    case Errc::Malformed:
    case Errc::Truncated:
    case Errc::InvalidScenario:
      return ErrCode::Malformed;
    default:
      return ErrCode::Internal;
  }
}

MessageType type_of(const Message& m) noexcept {
  return static_cast<MessageType>(m.index() + 1);
}

std::vector<std::uint8_t> encode(const Message& m) {
  std::vector<std::uint8_t> out(kHeaderSize);
  ByteWriter w(out);
  std::visit([&](const auto& body) { encode_body(w, body); }, m);
  const std::size_t len = out.size() - kHeaderSize;
  if (len > kMaxBodyLength) throw Error(Errc::LengthOverflow, "body of " + std::to_string(len) + " bytes");
  std::copy(kMagic.begin(), kMagic.end(), out.begin());
  out[4] = kVersion;
  out[5] = static_cast<std::uint8_t>(type_of(m));
  for (int i = 0; i < 4; ++i) out[6 + i] = static_cast<std::uint8_t>(len >> (8 * i));
  return out;
}

FrameHeader decode_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw Error(Errc::Truncated, "frame header needs 10 bytes");
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) throw Error(Errc::BadMagic, "expected PEEG");
  FrameHeader h;
  h.version = bytes[4];
  h.type = bytes[5];
  ByteReader r(bytes.subspan(6, 4));
  h.length = r.get<std::uint32_t>();
  if (h.version != kVersion) throw Error(Errc::UnsupportedVersion, "protocol version " + std::to_string(h.version));
  if (h.length > kMaxBodyLength) throw Error(Errc::LengthOverflow, "body of " + std::to_string(h.length) + " bytes");
  return h;
}

Message decode_body(std::uint8_t type, std::span<const std::uint8_t> body) {
  ByteReader r(body, Errc::Malformed);
  Message m;
  switch (static_cast<MessageType>(type)) {
    case MessageType::Hello: m = decode_hello(r); break;
    case MessageType::Data: m = decode_data(r); break;
    case MessageType::Metrics: m = decode_metrics(r); break;
    case MessageType::Command: m = decode_command(r); break;
    case MessageType::Ack: m = decode_ack(r); break;
    case MessageType::Err: m = decode_err(r); break;
    default: throw Error(Errc::UnknownType, "message type " + std::to_string(type));
  }
  if (r.remaining() != 0) throw Error(Errc::Malformed, "trailing bytes in body");
  return m;
}

Message decode(std::span<const std::uint8_t> bytes) {
  const auto h = decode_header(bytes);
  if (bytes.size() - kHeaderSize < h.length) throw Error(Errc::Truncated, "frame shorter than its length field");
  if (bytes.size() - kHeaderSize > h.length) throw Error(Errc::Malformed, "bytes after the frame");
  return decode_body(h.type, bytes.subspan(kHeaderSize));
}

void FrameReader::feed(std::span<const std::uint8_t> bytes) {
  if (pos_ > 0 && pos_ >= buf_.size() / 2) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
    pos_ = 0;
  }
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<FrameReader::Frame> FrameReader::next() {
  const auto avail = std::span<const std::uint8_t>(buf_).subspan(pos_);
  if (!header_) {
    // Reject a bad magic as soon as the mismatching byte arrives.
    const std::size_t m = std::min(avail.size(), kMagic.size());
    if (!std::equal(avail.begin(), avail.begin() + static_cast<std::ptrdiff_t>(m), kMagic.begin())) {
      throw Error(Errc::BadMagic, "expected PEEG");
    }
    if (avail.size() < kHeaderSize) return std::nullopt;
    header_ = decode_header(avail);
  }
  if (avail.size() - kHeaderSize < header_->length) return std::nullopt;
  Frame f;
  f.type = header_->type;
  const auto body = avail.subspan(kHeaderSize, header_->length);
  f.body.assign(body.begin(), body.end());
  pos_ += kHeaderSize + header_->length;
  header_.reset();
  return f;
}

Data make_data(const SampleBlock& block, bool raw_codes, std::uint16_t decimation, std::size_t* phase) {
  if (decimation == 0) decimation = 1;
  std::size_t start = phase ? *phase % decimation : 0;
  std::vector<std::size_t> keep;
  for (std::size_t i = start; i < block.block_len; i += decimation) keep.push_back(i);
  if (phase) *phase = (start + decimation * keep.size()) - block.block_len;

  Data d;
  d.seq = block.seq;
  d.t0_ns = block.t0_ns + (keep.empty() ? 0 : static_cast<std::int64_t>(keep.front() * 1'000'000'000ULL / block.fs));
  d.host_time_ns = block.host_time_ns;
  d.fs = static_cast<double>(block.fs) / decimation;
  d.epoch = block.epoch;
  d.dropped_before = block.dropped_before;
  for (std::size_t ch = 0; ch < ads1299::kChannels; ++ch) d.gains[ch] = static_cast<std::uint8_t>(block.gains[ch]);
  d.block_len = static_cast<std::uint16_t>(keep.size());
  d.flags = raw_codes ? kDataRawCodes : 0;
  const std::size_t n = keep.size();
  if (raw_codes) {
    d.codes.resize(ads1299::kChannels * n);
  } else {
    d.uv.resize(ads1299::kChannels * n);
  }
  for (std::size_t ch = 0; ch < ads1299::kChannels; ++ch) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t src = ch * block.block_len + keep[k];
      if (raw_codes) {
        d.codes[ch * n + k] = block.codes[src];
      } else {
        d.uv[ch * n + k] = static_cast<float>(block.uv[src]);
      }
    }
  }
  return d;
}

// --- ProtocolSession -------------------------------------------------------

ProtocolSession::ProtocolSession(CommandTarget& target, std::optional<std::string> token)
    : target_(target), token_(std::move(token)), authenticated_(!token_) {}

std::vector<std::uint8_t> ProtocolSession::greeting() const {
  Hello h = target_.hello();
  h.auth_required = token_.has_value();
  h.token.clear();
  return encode(h);
}

bool ProtocolSession::open() const { return open_; }

bool ProtocolSession::authenticated() const {
  std::lock_guard lk(mu_);
  return authenticated_;
}

ClientPrefs ProtocolSession::prefs() const {
  std::lock_guard lk(mu_);
  return prefs_;
}

bool ProtocolSession::take_credit() {
  std::lock_guard lk(mu_);
  if (credit_ == 0) return false;
  --credit_;
  return true;
}

void ProtocolSession::on_data_sent() {
  std::lock_guard lk(mu_);
  if (!manual_credit_ && credit_ < kDefaultCredit) ++credit_;
}

std::uint32_t ProtocolSession::credit() const {
  std::lock_guard lk(mu_);
  return credit_;
}

bool ProtocolSession::receive(std::span<const std::uint8_t> bytes, std::vector<std::vector<std::uint8_t>>& out) {
  if (!open_) return false;
  reader_.feed(bytes);
  while (open_) {
    std::optional<FrameReader::Frame> frame;
    try {
      frame = reader_.next();
    } catch (const Error& e) {
      // Envelope errors: the byte stream has lost framing.
      out.push_back(encode(Err{0, err_code_for(e.code()), e.what()}));
      open_ = false;
      break;
    }
    if (!frame) break;
    handle(*frame, out);
  }
  return open_;
}

void ProtocolSession::handle(const FrameReader::Frame& frame, std::vector<std::vector<std::uint8_t>>& out) {
  Message m;
  try {
    m = decode_body(frame.type, frame.body);
  } catch (const Error& e) {
    // Framing is intact, so the connection survives a bad body.
    out.push_back(encode(Err{0, err_code_for(e.code()), e.what()}));
    return;
  }

  if (const auto* hello = std::get_if<Hello>(&m)) {
    if (!token_) return;
    if (hello->token == *token_) {
      std::lock_guard lk(mu_);
      authenticated_ = true;
      return;
    }
    out.push_back(encode(Err{0, ErrCode::Unauthorized, "bad token"}));
    open_ = false;
    return;
  }

  const auto* cmd = std::get_if<Command>(&m);
  if (!cmd) {
    out.push_back(encode(Err{0, ErrCode::Unsupported, "clients may only send HELLO and CMD"}));
    return;
  }
  if (!authenticated()) {
    out.push_back(encode(Err{cmd->id, ErrCode::Unauthorized, "send HELLO with the station token first"}));
    return;
  }
  if (auto it = replies_.find(cmd->id); it != replies_.end()) {
    out.push_back(it->second);  // duplicate id: same answer, no second effect
    return;
  }
  auto reply = dispatch(*cmd);
  replies_[cmd->id] = reply;
  reply_order_.push_back(cmd->id);
  if (reply_order_.size() > kReplayCacheSize) {
    replies_.erase(reply_order_.front());
    reply_order_.pop_front();
  }
  out.push_back(std::move(reply));
}

std::vector<std::uint8_t> ProtocolSession::dispatch(const Command& cmd) {
  try {
    Ack ack{cmd.id, true, 0, 0};
    switch (cmd.op) {
      case CommandOp::Start:
        target_.start();
        break;
      case CommandOp::Stop:
        target_.stop();
        break;
      case CommandOp::Rreg:
        ack.value = target_.read_register(cmd.address);
        break;
      case CommandOp::Wreg:
        ack.epoch = target_.write_register(cmd.address, cmd.value);
        ack.value = cmd.value;
        return encode(ack);
      case CommandOp::Annotate:
        if (!std::isfinite(cmd.time) || cmd.time < 0) throw Error(Errc::Malformed, "annotation time");
        target_.annotate(cmd.time, cmd.text);
        break;
      case CommandOp::SetScenario:
        target_.set_scenario(cmd.text);
        break;
      case CommandOp::Subscribe: {
        if (cmd.decimation == 0) throw Error(Errc::Malformed, "decimation must be at least 1");
        if (cmd.flags & ~(kSubscribeData | kSubscribeMetrics | kSubscribeRaw)) {
          throw Error(Errc::Malformed, "unknown subscription flags");
        }
        std::lock_guard lk(mu_);
        prefs_.data = cmd.flags & kSubscribeData;
        prefs_.metrics = cmd.flags & kSubscribeMetrics;
        prefs_.raw = cmd.flags & kSubscribeRaw;
        prefs_.decimation = cmd.decimation;
        break;
      }
      case CommandOp::Credit: {
        std::lock_guard lk(mu_);
        if (!manual_credit_) {
          manual_credit_ = true;
          credit_ = 0;
        }
        credit_ = static_cast<std::uint32_t>(std::min<std::uint64_t>(std::uint64_t{credit_} + cmd.credit, 1u << 24));
        break;
      }
    }
    ack.epoch = target_.epoch();
    return encode(ack);
  } catch (const Error& e) {
    return encode(Err{cmd.id, err_code_for(e.code()), e.what()});
  } catch (const std::exception& e) {
    return encode(Err{cmd.id, ErrCode::Internal, e.what()});
  }
}

}  // namespace peeg::protocol
