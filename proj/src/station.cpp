#include "peeg/station.hpp"

#include <cmath>

#include "peeg/dsp.hpp"

namespace peeg {

namespace {

std::optional<std::size_t> pick_channel(const std::array<std::string, ads1299::kChannels>& labels,
                                        std::initializer_list<std::string_view> prefixes) {
  for (auto prefix : prefixes) {
    for (std::size_t ch = 0; ch < labels.size(); ++ch) {
      if (labels[ch].starts_with(prefix)) return ch;
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<session::Annotation> protocol_annotations(const synth::Scenario& scenario) {
  std::vector<session::Annotation> out;
  for (const auto& e : scenario.events) {
    if (e.kind != synth::EventKind::AlphaInterval) continue;
    out.push_back({e.start, "eyes_closed"});
    if (e.end() < scenario.duration) out.push_back({e.end(), "eyes_open"});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
  return out;
}

// --- metrics ---------------------------------------------------------------

namespace {
constexpr double kDetectWindowS = 6.0;  // ECG needs 5 s
constexpr double kEdgeGuardS = 0.5;     // events this close to the end wait for the next pass
constexpr double kDedupS = 0.3;
}  // namespace

MetricsEngine::MetricsEngine(int fs, std::array<std::string, ads1299::kChannels> labels, double alpha_window_s)
    : fs_(fs),
      labels_(std::move(labels)),
      alpha_window_s_(alpha_window_s),
      capacity_(static_cast<std::size_t>(std::max(kDetectWindowS, alpha_window_s) * fs)) {}

void MetricsEngine::push(const SampleBlock& block) {
  for (std::size_t ch = 0; ch < ads1299::kChannels; ++ch) {
    auto& r = ring_[ch];
    for (double v : block.channel(ch)) r.push_back(v);
    while (r.size() > capacity_) r.pop_front();
  }
  total_ += block.block_len;
  since_snapshot_ += block.block_len;
  last_seq_ = block.seq;
}

double MetricsEngine::pending_s() const noexcept { return static_cast<double>(since_snapshot_) / fs_; }

protocol::Metrics MetricsEngine::snapshot() {
  protocol::Metrics m;
  m.seq = last_seq_;
  since_snapshot_ = 0;
  const std::size_t have = ring_[0].size();
  const auto alpha_n = std::min(have, static_cast<std::size_t>(alpha_window_s_ * fs_));
  m.window_s = static_cast<float>(static_cast<double>(alpha_n) / fs_);
  dsp::DspConfig cfg;
  if (alpha_n >= cfg.welch_window) {
    for (std::size_t ch = 0; ch < ads1299::kChannels; ++ch) {
      std::vector<double> x(ring_[ch].end() - static_cast<std::ptrdiff_t>(alpha_n), ring_[ch].end());
      try {
        const auto s = dsp::welch_psd(x, fs_, cfg.welch_window, cfg.welch_overlap);
        m.alpha_power[ch] = static_cast<float>(dsp::bandpower(s, cfg.alpha_low_hz, cfg.alpha_high_hz));
      } catch (const Error&) {
      }
    }
  }

  const double window_start = static_cast<double>(total_ - have) / fs_;
  const double window_end = static_cast<double>(total_) / fs_;
  auto count = [&](protocol::EventCounter which, std::optional<std::size_t> ch, auto detect) {
    if (!ch) return;
    const std::vector<double> x(ring_[*ch].begin(), ring_[*ch].end());
    std::vector<double> times;
    try {
      times = detect(x);
    } catch (const Error&) {
      return;  // window still too short
    }
    const auto k = static_cast<std::size_t>(which);
    for (double t : times) {
      const double abs_t = window_start + t;
      if (abs_t > window_end - kEdgeGuardS || abs_t <= last_event_[k] + kDedupS) continue;
      ++counts_[k];
      last_event_[k] = abs_t;
    }
  };
  const double fs = fs_;
  count(protocol::EventCounter::Blinks, pick_channel(labels_, {"Fz", "Fp1", "Fp2", "EOG"}),
        [&](const auto& x) { return dsp::detect_blinks(x, fs).times; });
  count(protocol::EventCounter::Chews, pick_channel(labels_, {"Fz", "T7", "T8", "F7", "F8"}),
        [&](const auto& x) { return dsp::detect_chews(x, fs).times; });
  count(protocol::EventCounter::EmgOnsets, pick_channel(labels_, {"EMG"}),
        [&](const auto& x) { return dsp::emg_envelope_onsets(x, fs).times; });
  count(protocol::EventCounter::RPeaks, pick_channel(labels_, {"ECG"}),
        [&](const auto& x) { return dsp::detect_r_peaks(x, fs).peaks.times; });
  m.counts = counts_;
  return m;
}

// --- station ---------------------------------------------------------------

struct Station::Recorder {
  std::mutex mu;
  std::unique_ptr<session::SessionWriter> writer;
  std::shared_ptr<Subscription> sub;
  std::thread thread;
  std::string error;
};

Station::Station(BackendFactory factory, StationConfig config)
    : factory_(std::move(factory)), config_(std::move(config)) {
  std::lock_guard lk(mu_);
  rebuild_locked();
}

Station::~Station() {
  std::shared_ptr<Pipeline> p;
  {
    std::lock_guard lk(mu_);
    p = pipeline_;
  }
  if (p) p->close();
  join_workers();
}

void Station::rebuild_locked() {
  std::optional<ads1299::RegisterFile> carry;
  if (pipeline_) {
    pipeline_->close();
    if (pipeline_->backend().capabilities().register_access) carry = pipeline_->registers();
  }
  auto backend = factory_();
  PipelineConfig pc = config_.pipeline;
  if (carry && backend->capabilities().register_access) {
    // Keep the operator's settings, at the rate the new source runs at.
    auto init = backend->initial_config();
    if (!init || init->sample_rate() == carry->sample_rate()) pc.registers = carry;
  }
  pipeline_ = std::make_shared<Pipeline>(std::move(backend), pc);
  ++generation_;
}

void Station::attach_workers_locked() {
  if (config_.record_path) {
    auto rec = std::make_unique<Recorder>();
    auto header = session::make_header(pipeline_->registers(), pipeline_->channel_labels(),
                                       std::string(to_string(pipeline_->backend().kind())), pipeline_->vref());
    if (const auto* sim = dynamic_cast<const SimulatorBackend*>(&pipeline_->backend())) {
      header.scenario = synth::scenario_to_json(sim->scenario());
    } else if (const auto* rep = dynamic_cast<const ReplayBackend*>(&pipeline_->backend())) {
      header.scenario = rep->recorded().header.scenario;
    }
    rec->writer = std::make_unique<session::SessionWriter>(*config_.record_path, header);
    rec->sub = pipeline_->subscribe("recorder", 4096);
    Recorder* r = rec.get();
    rec->thread = std::thread([r] {
      while (true) {
        auto b = r->sub->pop(std::chrono::milliseconds(200));
        if (!b) {
          if (r->sub->finished()) break;
          continue;
        }
        std::lock_guard lk(r->mu);
        try {
          r->writer->append(*b);
        } catch (const std::exception& e) {
          r->error = e.what();
          r->sub->cancel();
          break;
        }
      }
      std::lock_guard lk(r->mu);
      try {
        r->writer->finalize();
      } catch (const std::exception& e) {
        if (r->error.empty()) r->error = e.what();
      }
    });
    recorder_ = std::move(rec);
  }
  if (config_.metrics) {
    auto sub = pipeline_->subscribe("metrics", 256);
    metrics_thread_ = std::thread(&Station::metrics_loop, this, sub, pipeline_->sample_rate(),
                                  pipeline_->channel_labels());
  }
}

void Station::join_workers() {
  if (metrics_thread_.joinable()) metrics_thread_.join();
  if (recorder_) {
    if (recorder_->thread.joinable()) recorder_->thread.join();
    recorder_.reset();
  }
}

void Station::metrics_loop(std::shared_ptr<Subscription> sub, int fs,
                           std::array<std::string, ads1299::kChannels> labels) {
  MetricsEngine engine(fs, std::move(labels), config_.alpha_window_s);
  while (true) {
    auto b = sub->pop(std::chrono::milliseconds(200));
    if (!b) {
      if (sub->finished()) break;
      continue;
    }
    if (b->fs != fs) break;  // rate changed mid-stream; metrics pause until restart
    engine.push(*b);
    if (engine.pending_s() + 1e-9 < config_.metrics_period_s) continue;
    const auto m = engine.snapshot();
    std::lock_guard lk(listeners_mu_);
    for (auto& [id, fn] : listeners_) fn(m);
  }
}

protocol::Hello Station::hello() const {
  auto p = pipeline();
  protocol::Hello h;
  h.server = "pieeg-station";
  const auto rf = p->registers();
  h.fs = rf.sample_rate();
  h.block_len = static_cast<std::uint16_t>(p->block_len());
  const auto g = rf.gains();
  for (std::size_t ch = 0; ch < g.size(); ++ch) h.gains[ch] = static_cast<std::uint8_t>(g[ch]);
  h.vref = p->vref();
  h.labels = p->channel_labels();
  h.epoch = p->epoch();
  h.running = p->running();
  h.backend = p->backend().describe();
  return h;
}

void Station::start() {
  std::lock_guard lk(mu_);
  if (pipeline_->state() == Pipeline::State::Running) throw Error(Errc::AlreadyRunning, "stream is running");
  if (pipeline_->state() != Pipeline::State::Idle) rebuild_locked();
  join_workers();
  attach_workers_locked();
  try {
    pipeline_->start();
  } catch (...) {
    rebuild_locked();  // ends the worker subscriptions
    join_workers();
    throw;
  }
}

void Station::stop() {
  auto p = pipeline();
  if (!p->running()) throw Error(Errc::NotRunning, "stream is not running");
  p->stop();
}

void Station::wait() {
  auto p = pipeline();
  p->wait();
  std::lock_guard lk(mu_);
  join_workers();
}

bool Station::running() const { return pipeline()->running(); }

std::uint8_t Station::read_register(std::uint8_t address) { return pipeline()->read_register(address); }

std::uint32_t Station::write_register(std::uint8_t address, std::uint8_t value) {
  return pipeline()->apply_register_write(address, value).epoch;
}

std::uint32_t Station::epoch() const { return pipeline()->epoch(); }

void Station::annotate(double time, const std::string& text) {
  std::lock_guard lk(mu_);
  if (!pipeline_->running()) throw Error(Errc::NotRunning, "annotations need a running stream");
  if (!recorder_) return;
  std::lock_guard rl(recorder_->mu);
  if (!recorder_->error.empty()) throw Error(Errc::IoFailure, recorder_->error);
  recorder_->writer->annotate({time, text});
}

void Station::set_scenario(const std::string& json) {
  auto scenario = synth::scenario_from_json(json);
  synth::validate(scenario);
  std::lock_guard lk(mu_);
  if (pipeline_->running()) throw Error(Errc::AlreadyRunning, "stop the stream before changing the scenario");
  factory_ = [scenario] { return std::make_unique<SimulatorBackend>(scenario); };
  rebuild_locked();
}

std::shared_ptr<Subscription> Station::subscribe(std::string name, std::size_t capacity) {
  std::lock_guard lk(mu_);
  return pipeline_->subscribe(std::move(name), capacity);
}

std::uint64_t Station::generation() const {
  std::lock_guard lk(mu_);
  return generation_;
}

std::shared_ptr<Pipeline> Station::pipeline() const {
  std::lock_guard lk(mu_);
  return pipeline_;
}

int Station::add_metrics_listener(MetricsListener listener) {
  std::lock_guard lk(listeners_mu_);
  const int id = next_listener_++;
  listeners_[id] = std::move(listener);
  return id;
}

void Station::remove_metrics_listener(int id) {
  std::lock_guard lk(listeners_mu_);
  listeners_.erase(id);
}

}  // namespace peeg
