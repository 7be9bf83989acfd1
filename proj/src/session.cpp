#include "peeg/session.hpp"

#include <zlib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bytes.hpp"

namespace peeg::session {
namespace {

using nlohmann::json;
using detail::ByteReader;
using detail::ByteWriter;

enum RecordType : std::uint8_t {
  kBlockRecord = 0x01,
  kAnnotationRecord = 0x02,
  kEpochRecord = 0x03,
  kFooterRecord = 0xFF,
};

constexpr std::size_t kRecordOverhead = 1 + 4 + 4;  // type, length, crc

std::uint32_t crc_update(std::uint32_t crc, const void* data, std::size_t n) {
  return static_cast<std::uint32_t>(
      ::crc32(crc, static_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s;
  for (auto b : bytes) {
    s += digits[b >> 4];
    s += digits[b & 0xF];
  }
  return s;
}

std::vector<std::uint8_t> from_hex(std::string_view s) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (s.size() % 2) throw Error(Errc::ChecksumMismatch, "odd-length hex string in header");
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < s.size(); i += 2) {
    const int hi = nibble(s[i]), lo = nibble(s[i + 1]);
    if (hi < 0 || lo < 0) throw Error(Errc::ChecksumMismatch, "bad hex digit in header");
    out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
  }
  return out;
}

const std::array<std::string_view, 10> kKnownKeys = {
    "format_version", "created_at", "fs", "channel_labels", "gain",
    "vref", "backend", "scenario", "electrodes", "registers"};

std::string header_to_json(const SessionHeader& h) {
  json j;
  for (const auto& [key, raw] : h.extensions) j[key] = json::parse(raw);
  j["format_version"] = h.format_version;
  j["created_at"] = h.created_at;
  j["fs"] = h.fs;
  j["channel_labels"] = h.channel_labels;
  j["gain"] = h.gain;
  j["vref"] = h.vref;
  j["backend"] = h.backend;
  j["scenario"] = h.scenario ? json::parse(*h.scenario) : json(nullptr);
  j["electrodes"] = h.electrodes;
  j["registers"] = to_hex(h.registers.bytes());
  return j.dump();
}

SessionHeader header_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::ChecksumMismatch, std::string("header is not valid JSON: ") + e.what());
  }
  try {
    SessionHeader h;
    h.format_version = j.at("format_version").get<std::uint16_t>();
    h.created_at = j.value("created_at", std::string{});
    h.fs = j.at("fs").get<int>();
    h.channel_labels = j.at("channel_labels").get<std::array<std::string, ads1299::kChannels>>();
    h.gain = j.at("gain").get<std::array<int, ads1299::kChannels>>();
    h.vref = j.at("vref").get<double>();
    h.backend = j.value("backend", std::string{});
    if (j.contains("scenario") && !j["scenario"].is_null()) h.scenario = j["scenario"].dump(2);
    h.electrodes = j.value("electrodes", std::string{});
    const auto image = from_hex(j.at("registers").get<std::string>());
    h.registers = ads1299::RegisterFile::from_bytes(image);
    for (const auto& [key, value] : j.items()) {
      if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end()) {
        h.extensions[key] = value.dump();
      }
    }
    return h;
  } catch (const json::exception& e) {
    throw Error(Errc::ChecksumMismatch, std::string("header fields unreadable: ") + e.what());
  }
}

ads1299::RegisterFile epoch_registers(const ads1299::RegisterFile& base, const SampleBlock& b) {
  ads1299::RegisterFile rf = base;
  for (std::size_t ch = 0; ch < ads1299::kChannels; ++ch) {
    if (rf.gain_of(ch) == b.gains[ch]) continue;
    const std::uint8_t chset = rf.read(ads1299::chset_addr(ch));
    const std::uint8_t field = *ads1299::gain_field(b.gains[ch]);
    rf.write(ads1299::chset_addr(ch), static_cast<std::uint8_t>((chset & 0x8F) | (field << 4)));
  }
  return rf;
}

std::array<int, ads1299::kChannels> epoch_gains(const Epoch& e) { return e.registers.gains(); }

}  // namespace

double Session::duration() const noexcept {
  return header.fs > 0 ? static_cast<double>(sample_count) / header.fs : 0.0;
}

std::vector<double> Session::channel(std::size_t ch) const { return channel_series(blocks, ch); }

std::optional<std::size_t> Session::find_channel(std::string_view label) const {
  for (std::size_t ch = 0; ch < ads1299::kChannels; ++ch) {
    if (header.channel_labels[ch] == label) return ch;
  }
  return std::nullopt;
}

SessionHeader make_header(const ads1299::RegisterFile& rf,
                          const std::array<std::string, ads1299::kChannels>& labels, std::string backend,
                          double vref) {
  SessionHeader h;
  h.created_at = now_iso8601();
  h.fs = rf.sample_rate();
  h.channel_labels = labels;
  h.gain = rf.gains();
  h.vref = vref;
  h.backend = std::move(backend);
  h.registers = rf;
  return h;
}

SessionWriter::SessionWriter(const std::filesystem::path& path, SessionHeader header)
    : path_(path), header_(std::move(header)), epoch_registers_(header_.registers) {
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error(Errc::IoFailure, "cannot create " + path.string());
  const std::string text = header_to_json(header_);
  std::vector<std::uint8_t> head;
  ByteWriter w(head);
  w.bytes({reinterpret_cast<const std::uint8_t*>(kMagic), sizeof kMagic});
  w.put(kFormatVersion);
  w.str32(text);
  put(head.data(), head.size());
  out_.flush();
  if (!out_) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

SessionWriter::~SessionWriter() {
  if (!open_) return;
  try {
    finalize();
  } catch (...) {
    // Destructors must not throw; the file is left as a recoverable prefix.
  }
}

void SessionWriter::put(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  crc_ = crc_update(crc_, data, n);
}

void SessionWriter::write_record(std::uint8_t type, const std::vector<std::uint8_t>& payload) {
  if (!open_) throw Error(Errc::IoFailure, "session writer already closed");
  std::vector<std::uint8_t> rec;
  rec.reserve(payload.size() + kRecordOverhead);
  ByteWriter w(rec);
  w.put(type);
  w.put(static_cast<std::uint32_t>(payload.size()));
  w.bytes(payload);
  w.put(crc_update(0, rec.data(), rec.size()));
  put(rec.data(), rec.size());
  out_.flush();
  if (!out_) throw Error(Errc::IoFailure, "write failed for " + path_.string());
}

void SessionWriter::append(const SampleBlock& b) {
  if (b.fs != header_.fs) {
    throw Error(Errc::InconsistentRate, "block at " + std::to_string(b.fs) + " SPS in a " +
                                            std::to_string(header_.fs) + " SPS session");
  }
  if (b.codes.size() != ads1299::kChannels * b.block_len) {
    throw Error(Errc::IoFailure, "block has no raw codes to store");
  }
  if (!epoch_ || *epoch_ != b.epoch) {
    epoch_registers_ = epoch_registers(header_.registers, b);
    std::vector<std::uint8_t> payload;
    ByteWriter w(payload);
    w.put(b.epoch);
    w.put(b.seq);
    w.put(samples_);
    w.put(b.vref);
    w.bytes(epoch_registers_.bytes());
    write_record(kEpochRecord, payload);
    epoch_ = b.epoch;
  }
  std::vector<std::uint8_t> payload;
  payload.reserve(48 + 4 * b.codes.size());
  ByteWriter w(payload);
  w.put(b.seq);
  w.put(b.t0_ns);
  w.put(b.host_time_ns);
  w.put(b.epoch);
  w.put(b.dropped_before);
  w.put(static_cast<std::uint32_t>(b.block_len));
  for (std::int32_t c : b.codes) w.put(c);
  write_record(kBlockRecord, payload);
  ++blocks_;
  samples_ += b.block_len;
}

void SessionWriter::annotate(const Annotation& a) {
  std::vector<std::uint8_t> payload;
  ByteWriter w(payload);
  w.put(a.time);
  w.str32(a.text);
  write_record(kAnnotationRecord, payload);
  ++annotations_;
}

void SessionWriter::finalize() {
  if (!open_) return;
  std::vector<std::uint8_t> payload;
  ByteWriter w(payload);
  w.put(blocks_);
  w.put(samples_);
  w.put(annotations_);
  w.put(crc_);
  write_record(kFooterRecord, payload);
  open_ = false;
  out_.close();
  if (!out_) throw Error(Errc::IoFailure, "close failed for " + path_.string());
}

void SessionWriter::abandon() {
  open_ = false;
  out_.close();
}

namespace {

// Parses as much as possible; `error` receives the reason when the footer is
// missing.
Session parse(std::span<const std::uint8_t> data, std::string& truncation) {
  if (data.size() < sizeof kMagic || !std::equal(std::begin(kMagic), std::end(kMagic), data.begin())) {
    throw Error(Errc::BadMagic, "not a .peeg session file");
  }
  ByteReader r(data.subspan(sizeof kMagic), Errc::Truncated);
  Session s;
  std::size_t consumed = sizeof kMagic;
  try {
    const auto version = r.get<std::uint16_t>();
    if (version == 0 || version > kFormatVersion) {
      throw Error(Errc::UnsupportedVersion, "format version " + std::to_string(version));
    }
    s.header = header_from_json(r.str32());
    consumed += r.position();
  } catch (const Error& e) {
    if (e.code() != Errc::Truncated) throw;
    truncation = "file ends inside the header";
    return s;
  }
  if (s.header.format_version != kFormatVersion) {
    throw Error(Errc::UnsupportedVersion, "header format_version " + std::to_string(s.header.format_version));
  }

  std::uint32_t file_crc = crc_update(0, data.data(), consumed);
  std::size_t pos = consumed;
  const Epoch* current = nullptr;
  while (true) {
    if (pos == data.size()) {
      truncation = "no footer";
      return s;
    }
    if (data.size() - pos < 5) {
      truncation = "partial record header at byte " + std::to_string(pos);
      return s;
    }
    ByteReader hdr(data.subspan(pos, 5));
    const auto type = hdr.get<std::uint8_t>();
    const auto len = hdr.get<std::uint32_t>();
    if (data.size() - pos - 5 < static_cast<std::size_t>(len) + 4) {
      truncation = "partial record at byte " + std::to_string(pos);
      return s;
    }
    const auto body = data.subspan(pos, 5 + len);
    ByteReader tail(data.subspan(pos + 5 + len, 4));
    if (tail.get<std::uint32_t>() != crc_update(0, body.data(), body.size())) {
      throw Error(Errc::ChecksumMismatch, "record at byte " + std::to_string(pos));
    }
    ByteReader p(body.subspan(5), Errc::ChecksumMismatch);
    const std::size_t record_size = 5 + len + 4;

    switch (type) {
      case kEpochRecord: {
        Epoch e;
        e.id = p.get<std::uint32_t>();
        e.first_seq = p.get<std::uint64_t>();
        e.first_sample = p.get<std::uint64_t>();
        e.vref = p.get<double>();
        e.registers = ads1299::RegisterFile::from_bytes(p.bytes(ads1299::kRegisterCount));
        if (e.registers.sample_rate() != s.header.fs) {
          throw Error(Errc::InconsistentRate, "epoch " + std::to_string(e.id) + " rate differs from header");
        }
        s.epochs.push_back(e);
        current = &s.epochs.back();
        break;
      }
      case kBlockRecord: {
        if (!current) throw Error(Errc::ChecksumMismatch, "block before any epoch record");
        SampleBlock b;
        b.seq = p.get<std::uint64_t>();
        b.t0_ns = p.get<std::int64_t>();
        b.host_time_ns = p.get<std::int64_t>();
        b.epoch = p.get<std::uint32_t>();
        b.dropped_before = p.get<std::uint64_t>();
        b.block_len = p.get<std::uint32_t>();
        if (b.epoch != current->id) throw Error(Errc::ChecksumMismatch, "block epoch mismatch");
        if (p.remaining() != 4 * ads1299::kChannels * b.block_len) {
          throw Error(Errc::ChecksumMismatch, "block payload size");
        }
        b.codes.resize(ads1299::kChannels * b.block_len);
        for (auto& c : b.codes) c = p.get<std::int32_t>();
        b.fs = s.header.fs;
        b.gains = epoch_gains(*current);
        b.vref = current->vref;
        convert_block(b);
        if (!s.blocks.empty() && b.seq <= s.blocks.back().seq) {
          throw Error(Errc::ChecksumMismatch, "block sequence not increasing");
        }
        s.sample_count += b.block_len;
        s.blocks.push_back(std::move(b));
        break;
      }
      case kAnnotationRecord: {
        Annotation a;
        a.time = p.get<double>();
        a.text = p.str32();
        s.annotations.push_back(std::move(a));
        break;
      }
      case kFooterRecord: {
        const auto blocks = p.get<std::uint64_t>();
        const auto samples = p.get<std::uint64_t>();
        const auto annotations = p.get<std::uint32_t>();
        const auto crc = p.get<std::uint32_t>();
        if (crc != file_crc) throw Error(Errc::ChecksumMismatch, "file checksum");
        if (blocks != s.blocks.size() || samples != s.sample_count || annotations != s.annotations.size()) {
          throw Error(Errc::ChecksumMismatch, "footer counts disagree with content");
        }
        s.complete = true;
        return s;
      }
      default:
        break;  // unknown record types from newer writers are skipped
    }
    file_crc = crc_update(file_crc, data.data() + pos, record_size);
    pos += record_size;
  }
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::IoFailure, "read failed for " + path.string());
  return data;
}

}  // namespace

Session read_session(const std::filesystem::path& path) {
  const auto data = slurp(path);
  std::string truncation;
  Session s = parse(data, truncation);
  if (!s.complete) throw TruncatedSession(path.string() + ": " + truncation, std::move(s));
  return s;
}

Session recover_session(const std::filesystem::path& path) {
  const auto data = slurp(path);
  std::string truncation;
  return parse(data, truncation);
}

void write_session(const std::filesystem::path& path, const Session& session) {
  SessionWriter w(path, session.header);
  std::size_t a = 0;
  for (const auto& b : session.blocks) {
    const double block_start = static_cast<double>(b.t0_ns) / 1e9;
    while (a < session.annotations.size() && session.annotations[a].time <= block_start) {
      w.annotate(session.annotations[a++]);
    }
    w.append(b);
  }
  while (a < session.annotations.size()) w.annotate(session.annotations[a++]);
  w.finalize();
}

void export_csv(const Session& session, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot create " + path.string());
  out << "t_s";
  for (const auto& label : session.header.channel_labels) out << ',' << label << "_uV";
  out << '\n';
  char buf[64];
  std::string line;
  for (const auto& b : session.blocks) {
    for (std::size_t i = 0; i < b.block_len; ++i) {
      line.clear();
      const double t = static_cast<double>(b.t0_ns) / 1e9 + static_cast<double>(i) / b.fs;
      std::snprintf(buf, sizeof buf, "%.6f", t);
      line += buf;
      for (std::size_t ch = 0; ch < ads1299::kChannels; ++ch) {
        std::snprintf(buf, sizeof buf, ",%.3f", b.uv[ch * b.block_len + i]);
        line += buf;
      }
      line += '\n';
      out << line;
    }
  }
  out.close();
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

CsvTable import_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::IoFailure, "empty CSV " + path.string());
  {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    while (std::getline(ss, cell, ',')) {
      if (cell.size() > 3 && cell.ends_with("_uV")) cell.resize(cell.size() - 3);
      table.labels.push_back(cell);
    }
  }
  if (table.labels.size() != ads1299::kChannels) {
    throw Error(Errc::IoFailure, "CSV header must name 8 channels");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const char* p = line.c_str();
    char* end = nullptr;
    table.t.push_back(std::strtod(p, &end));
    for (std::size_t ch = 0; ch < ads1299::kChannels; ++ch) {
      if (*end != ',') throw Error(Errc::IoFailure, "short CSV row");
      table.channels[ch].push_back(std::strtod(end + 1, &end));
    }
  }
  return table;
}

}  // namespace peeg::session
