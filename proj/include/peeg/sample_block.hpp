#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "peeg/ads1299.hpp"

namespace peeg {

/// One block of converted samples. Sample storage is channel-major:
/// element [ch * block_len + i] is sample i of channel ch.
struct SampleBlock {
  std::uint64_t seq = 0;
  std::int64_t t0_ns = 0;         // nominal, from stream start
  std::int64_t host_time_ns = 0;  // wall clock at capture, ns since the UNIX epoch
  int fs = 250;
  std::uint32_t epoch = 0;  // register configuration the block was converted under
  std::array<int, ads1299::kChannels> gains{};
  double vref = ads1299::kDefaultVref;
  std::uint64_t dropped_before = 0;  // samples discarded since the previous delivered block
  std::size_t block_len = 0;
  std::vector<std::int32_t> codes;
  std::vector<double> uv;

  std::span<const double> channel(std::size_t ch) const {
    return std::span<const double>(uv).subspan(ch * block_len, block_len);
  }
  std::span<const std::int32_t> channel_codes(std::size_t ch) const {
    return std::span<const std::int32_t>(codes).subspan(ch * block_len, block_len);
  }

  friend bool operator==(const SampleBlock&, const SampleBlock&) = default;
};

/// Converts raw codes to microvolts with the block's gains and vref.
void convert_block(SampleBlock& block);

/// Concatenates the blocks of one channel.
std::vector<double> channel_series(std::span<const SampleBlock> blocks, std::size_t ch);

}  // namespace peeg
