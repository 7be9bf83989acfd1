#pragma once

// .peeg session files: streaming writer, validating reader with truncated
// prefix recovery, and CSV export. Layout in docs/session-format.md.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "peeg/ads1299.hpp"
#include "peeg/error.hpp"
#include "peeg/sample_block.hpp"

namespace peeg::session {

inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr char kMagic[8] = {'P', 'E', 'E', 'G', 'S', 'E', 'S', 'S'};

struct Annotation {
  double time = 0.0;  // s from stream start
  std::string text;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

/// Register configuration in force from `first_seq` on.
struct Epoch {
  std::uint32_t id = 0;
  std::uint64_t first_seq = 0;
  std::uint64_t first_sample = 0;
  double vref = ads1299::kDefaultVref;
  ads1299::RegisterFile registers;

  friend bool operator==(const Epoch&, const Epoch&) = default;
};

struct SessionHeader {
  std::uint16_t format_version = kFormatVersion;
  std::string created_at;  // ISO 8601 UTC
  int fs = 250;
  std::array<std::string, ads1299::kChannels> channel_labels;
  std::array<int, ads1299::kChannels> gain{};
  double vref = ads1299::kDefaultVref;
  std::string backend;             // simulator | replay | hardware
  std::optional<std::string> scenario;  // scenario JSON when simulated
  std::string electrodes = "dry Ag/AgCl";
  ads1299::RegisterFile registers;
  // Header keys this version does not know, raw JSON text per key; written
  // back unchanged.
  std::map<std::string, std::string> extensions;

  friend bool operator==(const SessionHeader&, const SessionHeader&) = default;
};

struct Session {
  SessionHeader header;
  std::vector<Epoch> epochs;
  std::vector<Annotation> annotations;
  std::vector<SampleBlock> blocks;
  bool complete = false;  // footer present and verified
  std::uint64_t sample_count = 0;

  double duration() const noexcept;
  std::vector<double> channel(std::size_t ch) const;
  /// Channel index for a label, or nullopt.
  std::optional<std::size_t> find_channel(std::string_view label) const;
};

/// Header for a stream starting under `rf`.
SessionHeader make_header(const ads1299::RegisterFile& rf,
                          const std::array<std::string, ads1299::kChannels>& labels,
                          std::string backend, double vref = ads1299::kDefaultVref);

/// Appends records as they arrive and flushes each, so an interrupted
/// recording leaves a readable prefix. finalize() writes the footer.
class SessionWriter {
 public:
  SessionWriter(const std::filesystem::path& path, SessionHeader header);
  ~SessionWriter();

  SessionWriter(const SessionWriter&) = delete;
  SessionWriter& operator=(const SessionWriter&) = delete;

  void append(const SampleBlock& block);
  void annotate(const Annotation& annotation);
  void finalize();

  /// Closes without a footer (what a crash leaves behind).
  void abandon();

  std::uint64_t blocks_written() const noexcept { return blocks_; }
  std::uint64_t samples_written() const noexcept { return samples_; }

 private:
  void write_record(std::uint8_t type, const std::vector<std::uint8_t>& payload);
  void put(const void* data, std::size_t n);

  std::filesystem::path path_;
  std::ofstream out_;
  SessionHeader header_;
  std::uint32_t crc_ = 0;  // running CRC-32 of every byte written
  std::optional<std::uint32_t> epoch_;
  ads1299::RegisterFile epoch_registers_;
  std::uint64_t blocks_ = 0;
  std::uint64_t samples_ = 0;
  std::uint32_t annotations_ = 0;
  bool open_ = true;
};

/// Carries the recoverable prefix of a file with no footer.
class TruncatedSession : public Error {
 public:
  TruncatedSession(const std::string& what, Session prefix)
      : Error(Errc::Truncated, what), prefix_(std::move(prefix)) {}
  const Session& prefix() const noexcept { return prefix_; }

 private:
  Session prefix_;
};

/// Throws BadMagic, UnsupportedVersion, ChecksumMismatch or TruncatedSession.
Session read_session(const std::filesystem::path& path);

/// Like read_session but returns the prefix of a truncated file with
/// complete == false instead of throwing.
Session recover_session(const std::filesystem::path& path);

/// Writes a complete session file (header, epochs, blocks, annotations, footer).
void write_session(const std::filesystem::path& path, const Session& session);

/// `t_s,<label>_uV,...`; time with 6 decimals, values with 3.
void export_csv(const Session& session, const std::filesystem::path& path);

struct CsvTable {
  std::vector<std::string> labels;
  std::vector<double> t;
  std::array<std::vector<double>, ads1299::kChannels> channels;
};

CsvTable import_csv(const std::filesystem::path& path);

}  // namespace peeg::session
