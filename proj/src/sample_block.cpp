#include "peeg/sample_block.hpp"

namespace peeg {

void convert_block(SampleBlock& block) {
  block.uv.resize(block.codes.size());
  for (std::size_t ch = 0; ch < ads1299::kChannels; ++ch) {
    const ads1299::ConversionParams p{block.vref, block.gains[ch]};
    const std::size_t base = ch * block.block_len;
    for (std::size_t i = 0; i < block.block_len; ++i) {
      block.uv[base + i] = ads1299::code_to_microvolts(block.codes[base + i], p);
    }
  }
}

std::vector<double> channel_series(std::span<const SampleBlock> blocks, std::size_t ch) {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.block_len;
  std::vector<double> out;
  out.reserve(n);
  for (const auto& b : blocks) {
    const auto s = b.channel(ch);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

}  // namespace peeg
