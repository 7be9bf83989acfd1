#pragma once

// Producer thread turning backend frames into SampleBlocks and fanning them
// out to subscribers. Each subscriber owns a bounded queue; when it is full
// the oldest block is dropped and the gap is reported on the next delivered
// block, so a slow consumer never stalls the producer or its peers.

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "peeg/ads1299.hpp"
#include "peeg/backends.hpp"
#include "peeg/sample_block.hpp"

namespace peeg {

struct PipelineConfig {
  std::size_t block_len = 25;
  // Starting registers; defaults to the backend's initial_config(), else
  // station defaults.
  std::optional<ads1299::RegisterFile> registers;
  double vref = ads1299::kDefaultVref;
  // Sleep to the sample clock. Off: produce as fast as the backend allows.
  bool realtime = true;
  ads1299::DecodeOptions decode;
};

struct SubscriberStats {
  std::string name;
  std::size_t capacity = 0;
  std::uint64_t offered = 0;  // blocks
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t offered_samples = 0;
  std::uint64_t delivered_samples = 0;
  std::uint64_t dropped_samples = 0;
  std::uint64_t backlog_samples = 0;
  std::size_t backlog = 0;  // blocks queued
};

struct PipelineStats {
  std::uint64_t produced = 0;  // blocks
  std::uint64_t produced_samples = 0;
  std::uint64_t dropped_samples = 0;  // summed over current subscribers
  std::uint64_t frame_errors = 0;
  // Largest deviation of consecutive host_time deltas from the nominal block
  // period.
  std::int64_t jitter_ns = 0;
  std::uint32_t epoch = 0;
  std::vector<SubscriberStats> subscribers;
};

struct RegisterAck {
  std::uint8_t address = 0;
  std::uint8_t value = 0;
  std::uint32_t epoch = 0;  // first epoch carrying the new value
};

class Subscription {
 public:
  Subscription(std::string name, std::size_t capacity);

  /// Waits up to `timeout`; nullopt on timeout or once the stream ended and
  /// the queue is drained.
  std::optional<SampleBlock> pop(std::chrono::milliseconds timeout);
  std::optional<SampleBlock> try_pop();

  /// True once the stream has ended and every queued block was taken.
  bool finished() const;
  /// Stops delivery; the pipeline forgets the subscriber.
  void cancel();
  bool cancelled() const;

  const std::string& name() const noexcept { return name_; }
  SubscriberStats stats() const;

 private:
  friend class Pipeline;
  void offer(const SampleBlock& block);
  void end();
  std::optional<SampleBlock> take_locked();

  std::string name_;
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<SampleBlock> queue_;
  std::uint64_t gap_ = 0;  // samples dropped since the last pop
  bool ended_ = false;
  bool cancelled_ = false;
  SubscriberStats stats_;
};

class Pipeline {
 public:
  enum class State { Idle, Running, Finished, Closed };

  explicit Pipeline(std::unique_ptr<DeviceBackend> backend, PipelineConfig config = {});
  ~Pipeline();

  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  /// Capacity in blocks. Throws PipelineClosed after close().
  std::shared_ptr<Subscription> subscribe(std::string name, std::size_t capacity = 64);

  /// Opens the backend and starts the producer. Throws AlreadyRunning,
  /// Unsupported for a block longer than one second, or whatever the backend
  /// throws from open().
  void start();
  /// Asks the producer to stop after the current block and joins it.
  void stop();
  /// Blocks until the stream ends on its own (or stop()).
  void wait();
  /// stop() plus end-of-stream for all subscribers; the pipeline is spent.
  void close();

  State state() const;
  bool running() const { return state() == State::Running; }

  /// Validated synchronously (UnknownRegister, ReadOnlyRegister,
  /// InvalidFieldEncoding, Unsupported). While running the write is applied
  /// between blocks and this returns once it is; blocks from ack.epoch on
  /// are converted under the new value.
  RegisterAck apply_register_write(std::uint8_t address, std::uint8_t value);
  std::uint8_t read_register(std::uint8_t address) const;
  ads1299::RegisterFile registers() const;
  std::uint32_t epoch() const;
  int sample_rate() const;
  double vref() const noexcept { return config_.vref; }
  std::size_t block_len() const noexcept { return config_.block_len; }

  const DeviceBackend& backend() const noexcept { return *backend_; }
  std::array<std::string, ads1299::kChannels> channel_labels() const { return labels_; }
  PipelineStats stats() const;
  /// Why the producer stopped early (backend error), if it did.
  std::optional<std::string> failure() const;

 private:
  struct PendingWrite {
    std::uint8_t address;
    std::uint8_t value;
    std::promise<RegisterAck> done;
  };

  void run();
  RegisterAck apply_locked(std::uint8_t address, std::uint8_t value);
  void drain_writes();
  void publish(const SampleBlock& block);
  void finish();

  std::unique_ptr<DeviceBackend> backend_;
  PipelineConfig config_;
  std::array<std::string, ads1299::kChannels> labels_;

  mutable std::mutex mu_;  // registers, epoch, state, subscribers, writes
  std::condition_variable state_cv_;
  State state_ = State::Idle;
  ads1299::RegisterFile registers_;
  std::uint32_t epoch_ = 0;
  std::deque<PendingWrite> writes_;
  std::vector<std::shared_ptr<Subscription>> subscribers_;
  std::string failure_;

  std::atomic<bool> stop_requested_{false};
  std::thread producer_;
  std::mutex join_mu_;

  std::atomic<std::uint64_t> produced_{0};
  std::atomic<std::uint64_t> produced_samples_{0};
  std::atomic<std::uint64_t> frame_errors_{0};
  std::atomic<std::int64_t> jitter_ns_{0};
};

}  // namespace peeg
