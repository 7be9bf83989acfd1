#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "doctest.h"
#include "peeg/acquisition.hpp"
#include "peeg/error.hpp"

namespace testutil {

template <class Fn>
peeg::Errc code_of(Fn&& fn) {
  try {
    fn();
  } catch (const peeg::Error& e) {
    return e.code();
  }
  FAIL("expected a peeg::Error");
  return peeg::Errc::Remote;
}

/// Runs a simulator scenario flat out and returns every block.
inline std::vector<peeg::SampleBlock> collect(const peeg::synth::Scenario& s, std::size_t block_len = 25) {
  peeg::PipelineConfig pc;
  pc.block_len = block_len;
  pc.realtime = false;
  peeg::Pipeline p(std::make_unique<peeg::SimulatorBackend>(s), pc);
  auto sub = p.subscribe("collect", 1u << 20);
  p.start();
  std::vector<peeg::SampleBlock> out;
  while (auto b = sub->pop(std::chrono::seconds(5))) out.push_back(std::move(*b));
  return out;
}

/// Unique path under the temp directory, removed on destruction.
struct TempPath {
  std::filesystem::path path;
  explicit TempPath(const std::string& name) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("peeg_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + "_" + name);
  }
  ~TempPath() {
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
  operator const std::filesystem::path&() const { return path; }
};

}  // namespace testutil
