#pragma once

// A running station: the acquisition pipeline plus an optional session
// recorder and a metrics worker, driven by protocol commands.

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>

#include "peeg/acquisition.hpp"
#include "peeg/protocol.hpp"
#include "peeg/session.hpp"

namespace peeg {

using BackendFactory = std::function<std::unique_ptr<DeviceBackend>()>;

struct StationConfig {
  PipelineConfig pipeline;
  std::optional<std::filesystem::path> record_path;
  bool metrics = true;
  double metrics_period_s = 1.0;
  double alpha_window_s = 2.0;
};

/// Computes METRICS from a block stream: alpha band power per channel over
/// the last alpha_window_s, and cumulative event counts from the detectors
/// run over a trailing window.
class MetricsEngine {
 public:
  MetricsEngine(int fs, std::array<std::string, ads1299::kChannels> labels, double alpha_window_s = 2.0);

  void push(const SampleBlock& block);
  /// Seconds of signal pushed since the last snapshot.
  double pending_s() const noexcept;
  protocol::Metrics snapshot();

 private:
  int fs_;
  std::array<std::string, ads1299::kChannels> labels_;
  double alpha_window_s_;
  std::size_t capacity_;
  std::array<std::deque<double>, ads1299::kChannels> ring_;
  std::uint64_t total_ = 0;  // samples pushed
  std::uint64_t since_snapshot_ = 0;
  std::uint64_t last_seq_ = 0;
  std::array<std::uint32_t, 4> counts_{};
  std::array<double, 4> last_event_{-1e9, -1e9, -1e9, -1e9};
};

class Station : public protocol::CommandTarget {
 public:
  using MetricsListener = std::function<void(const protocol::Metrics&)>;

  Station(BackendFactory factory, StationConfig config = {});
  ~Station() override;

  Station(const Station&) = delete;
  Station& operator=(const Station&) = delete;

  // protocol::CommandTarget
  protocol::Hello hello() const override;
  void start() override;
  void stop() override;
  std::uint8_t read_register(std::uint8_t address) override;
  std::uint32_t write_register(std::uint8_t address, std::uint8_t value) override;
  std::uint32_t epoch() const override;
  void annotate(double time, const std::string& text) override;
  void set_scenario(const std::string& json) override;

  /// Subscribes to the current stream. After a restart the old subscription
  /// finishes and generation() changes.
  std::shared_ptr<Subscription> subscribe(std::string name, std::size_t capacity = 64);
  std::uint64_t generation() const;
  std::shared_ptr<Pipeline> pipeline() const;

  /// Blocks until the current stream ends and the recording is finalized.
  void wait();
  bool running() const;

  int add_metrics_listener(MetricsListener listener);
  void remove_metrics_listener(int id);

 private:
  struct Recorder;

  void rebuild_locked();
  void attach_workers_locked();
  void join_workers();
  void metrics_loop(std::shared_ptr<Subscription> sub, int fs, std::array<std::string, ads1299::kChannels> labels);

  BackendFactory factory_;
  StationConfig config_;

  mutable std::mutex mu_;
  std::shared_ptr<Pipeline> pipeline_;
  std::uint64_t generation_ = 0;
  std::unique_ptr<Recorder> recorder_;
  std::thread metrics_thread_;

  std::mutex listeners_mu_;
  std::map<int, MetricsListener> listeners_;
  int next_listener_ = 1;
};

/// Annotations marking the eyes-closed/eyes-open steps of a scenario's alpha
/// intervals.
std::vector<session::Annotation> protocol_annotations(const synth::Scenario& scenario);

}  // namespace peeg
