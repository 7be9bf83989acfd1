#include "peeg/acquisition.hpp"

#include <algorithm>
#include <cstdlib>

namespace peeg {

// --- subscription ----------------------------------------------------------

Subscription::Subscription(std::string name, std::size_t capacity)
    : name_(std::move(name)), capacity_(std::max<std::size_t>(capacity, 1)) {
  stats_.name = name_;
  stats_.capacity = capacity_;
}

void Subscription::offer(const SampleBlock& block) {
  {
    std::lock_guard lk(mu_);
    if (cancelled_ || ended_) return;
    ++stats_.offered;
    stats_.offered_samples += block.block_len;
    if (queue_.size() >= capacity_) {
      const auto& oldest = queue_.front();
      gap_ += oldest.block_len;
      ++stats_.dropped;
      stats_.dropped_samples += oldest.block_len;
      stats_.backlog_samples -= oldest.block_len;
      queue_.pop_front();
    }
    queue_.push_back(block);
    stats_.backlog_samples += block.block_len;
    stats_.backlog = queue_.size();
  }
  cv_.notify_one();
}

void Subscription::end() {
  {
    std::lock_guard lk(mu_);
    ended_ = true;
  }
  cv_.notify_all();
}

std::optional<SampleBlock> Subscription::take_locked() {
  if (queue_.empty()) return std::nullopt;
  SampleBlock b = std::move(queue_.front());
  queue_.pop_front();
  b.dropped_before = gap_;
  gap_ = 0;
  ++stats_.delivered;
  stats_.delivered_samples += b.block_len;
  stats_.backlog_samples -= b.block_len;
  stats_.backlog = queue_.size();
  return b;
}

std::optional<SampleBlock> Subscription::pop(std::chrono::milliseconds timeout) {
  std::unique_lock lk(mu_);
  cv_.wait_for(lk, timeout, [&] { return !queue_.empty() || ended_ || cancelled_; });
  return take_locked();
}

std::optional<SampleBlock> Subscription::try_pop() {
  std::lock_guard lk(mu_);
  return take_locked();
}

bool Subscription::finished() const {
  std::lock_guard lk(mu_);
  return (ended_ || cancelled_) && queue_.empty();
}

void Subscription::cancel() {
  {
    std::lock_guard lk(mu_);
    cancelled_ = true;
  }
  cv_.notify_all();
}

bool Subscription::cancelled() const {
  std::lock_guard lk(mu_);
  return cancelled_;
}

SubscriberStats Subscription::stats() const {
  std::lock_guard lk(mu_);
  return stats_;
}

// --- pipeline --------------------------------------------------------------

Pipeline::Pipeline(std::unique_ptr<DeviceBackend> backend, PipelineConfig config)
    : backend_(std::move(backend)), config_(std::move(config)) {
  if (!backend_) throw Error(Errc::BackendUnavailable, "no backend");
  if (config_.block_len == 0) throw Error(Errc::Unsupported, "block length must be positive");
  ads1299::validate(ads1299::ConversionParams{config_.vref, 24});
  if (config_.registers) {
    registers_ = *config_.registers;
  } else if (auto rf = backend_->initial_config()) {
    registers_ = *rf;
  }
  labels_ = backend_->channel_labels();
}

Pipeline::~Pipeline() {
  try {
    close();
  } catch (...) {
  }
}

std::shared_ptr<Subscription> Pipeline::subscribe(std::string name, std::size_t capacity) {
  std::lock_guard lk(mu_);
  if (state_ == State::Closed) throw Error(Errc::PipelineClosed, "subscribe after close");
  auto sub = std::make_shared<Subscription>(std::move(name), capacity);
  if (state_ == State::Finished) sub->end();
  subscribers_.push_back(sub);
  return sub;
}

void Pipeline::start() {
  std::lock_guard lk(mu_);
  if (state_ == State::Closed) throw Error(Errc::PipelineClosed, "start after close");
  if (state_ != State::Idle) throw Error(Errc::AlreadyRunning, "pipeline already started");
  if (config_.block_len > static_cast<std::size_t>(registers_.sample_rate())) {
    throw Error(Errc::Unsupported, "block length exceeds one second of samples");
  }
  backend_->open(registers_, config_.block_len);
  state_ = State::Running;
  producer_ = std::thread([this] { run(); });
}

void Pipeline::stop() {
  {
    std::lock_guard lk(mu_);
    stop_requested_ = true;
  }
  state_cv_.notify_all();
  std::lock_guard jl(join_mu_);
  if (producer_.joinable()) producer_.join();
}

void Pipeline::wait() {
  {
    std::unique_lock lk(mu_);
    state_cv_.wait(lk, [&] { return state_ != State::Running; });
  }
  std::lock_guard jl(join_mu_);
  if (producer_.joinable()) producer_.join();
}

void Pipeline::close() {
  stop();
  std::vector<std::shared_ptr<Subscription>> subs;
  {
    std::lock_guard lk(mu_);
    if (state_ == State::Closed) return;
    state_ = State::Closed;
    subs.swap(subscribers_);
  }
  for (auto& s : subs) s->end();
  state_cv_.notify_all();
}

Pipeline::State Pipeline::state() const {
  std::lock_guard lk(mu_);
  return state_;
}

RegisterAck Pipeline::apply_register_write(std::uint8_t address, std::uint8_t value) {
  if (!backend_->capabilities().register_access) {
    throw Error(Errc::Unsupported, std::string(to_string(backend_->kind())) + " backend has no writable registers");
  }
  std::future<RegisterAck> done;
  {
    std::lock_guard lk(mu_);
    const auto next = ads1299::write_register(registers_, address, value);  // validates
    const bool rate_change = next.sample_rate() != registers_.sample_rate();
    if (state_ != State::Running) {
      registers_ = next;
      return {address, value, ++epoch_};
    }
    if (rate_change && !backend_->capabilities().rate_change) {
      throw Error(Errc::Unsupported, "data rate cannot change while streaming from this backend");
    }
    writes_.push_back({address, value, {}});
    done = writes_.back().done.get_future();
  }
  return done.get();
}

RegisterAck Pipeline::apply_locked(std::uint8_t address, std::uint8_t value) {
  auto next = ads1299::write_register(registers_, address, value);
  backend_->write_register(address, value);
  registers_ = next;
  return {address, value, ++epoch_};
}

void Pipeline::drain_writes() {
  std::lock_guard lk(mu_);
  while (!writes_.empty()) {
    auto w = std::move(writes_.front());
    writes_.pop_front();
    try {
      w.done.set_value(apply_locked(w.address, w.value));
    } catch (...) {
      w.done.set_exception(std::current_exception());
    }
  }
}

std::uint8_t Pipeline::read_register(std::uint8_t address) const {
  std::lock_guard lk(mu_);
  return registers_.read(address);
}

ads1299::RegisterFile Pipeline::registers() const {
  std::lock_guard lk(mu_);
  return registers_;
}

std::uint32_t Pipeline::epoch() const {
  std::lock_guard lk(mu_);
  return epoch_;
}

int Pipeline::sample_rate() const {
  std::lock_guard lk(mu_);
  return registers_.sample_rate();
}

PipelineStats Pipeline::stats() const {
  PipelineStats s;
  s.produced = produced_;
  s.produced_samples = produced_samples_;
  s.frame_errors = frame_errors_;
  s.jitter_ns = jitter_ns_;
  std::vector<std::shared_ptr<Subscription>> subs;
  {
    std::lock_guard lk(mu_);
    s.epoch = epoch_;
    subs = subscribers_;
  }
  for (const auto& sub : subs) {
    s.subscribers.push_back(sub->stats());
    s.dropped_samples += s.subscribers.back().dropped_samples;
  }
  return s;
}

std::optional<std::string> Pipeline::failure() const {
  std::lock_guard lk(mu_);
  if (failure_.empty()) return std::nullopt;
  return failure_;
}

void Pipeline::publish(const SampleBlock& block) {
  std::vector<std::shared_ptr<Subscription>> subs;
  {
    std::lock_guard lk(mu_);
    std::erase_if(subscribers_, [](const auto& s) { return s->cancelled(); });
    subs = subscribers_;
  }
  for (auto& s : subs) s->offer(block);
}

void Pipeline::run() {
  using clock = std::chrono::steady_clock;
  const std::size_t len = config_.block_len;
  const bool paced = config_.realtime && !backend_->capabilities().paced_by_device;
  const auto start = clock::now();

  std::int64_t seg_t0 = 0;  // t0 where the current data rate took effect
  std::uint64_t seg_samples = 0;
  int seg_fs = 0;
  std::uint64_t seq = 0;
  std::array<std::int32_t, ads1299::kChannels> last{};
  std::int64_t prev_host = 0, prev_t0 = 0;

  auto elapsed_ns = [&](std::uint64_t samples, int fs) {
    return seg_t0 + static_cast<std::int64_t>(samples * 1'000'000'000ULL / static_cast<std::uint64_t>(fs));
  };

  try {
    while (!stop_requested_) {
      drain_writes();
      if (auto change = backend_->take_config_change()) {
        std::lock_guard lk(mu_);
        registers_ = *change;
        ++epoch_;
      }

      SampleBlock b;
      {
        std::lock_guard lk(mu_);
        b.fs = registers_.sample_rate();
        b.gains = registers_.gains();
        b.epoch = epoch_;
      }
      if (b.fs != seg_fs) {
        if (seg_fs != 0) seg_t0 = elapsed_ns(seg_samples, seg_fs);
        seg_fs = b.fs;
        seg_samples = 0;
      }

      b.codes.resize(ads1299::kChannels * len);
      std::size_t n = 0;
      for (; n < len; ++n) {
        const auto raw = backend_->read_frame();
        if (!raw) break;
        try {
          last = ads1299::decode_frame(*raw, config_.decode).codes;
        } catch (const Error&) {
          ++frame_errors_;  // hold the previous sample in place of a corrupt frame
        }
        for (std::size_t ch = 0; ch < ads1299::kChannels; ++ch) b.codes[ch * len + n] = last[ch];
      }
      if (n == 0) break;
      if (n < len) {
        std::vector<std::int32_t> packed(ads1299::kChannels * n);
        for (std::size_t ch = 0; ch < ads1299::kChannels; ++ch) {
          std::copy_n(b.codes.begin() + static_cast<std::ptrdiff_t>(ch * len), n,
                      packed.begin() + static_cast<std::ptrdiff_t>(ch * n));
        }
        b.codes = std::move(packed);
      }

      b.seq = seq++;
      b.block_len = n;
      b.t0_ns = elapsed_ns(seg_samples, seg_fs);
      b.vref = config_.vref;
      convert_block(b);
      seg_samples += n;

      if (paced) {
        const auto deadline = start + std::chrono::nanoseconds(elapsed_ns(seg_samples, seg_fs));
        {
          std::unique_lock lk(mu_);
          state_cv_.wait_until(lk, deadline, [&] { return stop_requested_.load(); });
        }
      }
      b.host_time_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                           .count();
      if (paced && prev_host != 0) {
        const std::int64_t dev = std::llabs((b.host_time_ns - prev_host) - (b.t0_ns - prev_t0));
        if (dev > jitter_ns_) jitter_ns_ = dev;
      }
      prev_host = b.host_time_ns;
      prev_t0 = b.t0_ns;
      publish(b);
      ++produced_;
      produced_samples_ += n;
      if (n < len) break;
    }
  } catch (const std::exception& e) {
    std::lock_guard lk(mu_);
    failure_ = e.what();
  }
  finish();
}

void Pipeline::finish() {
  try {
    backend_->close();
  } catch (...) {
  }
  std::vector<std::shared_ptr<Subscription>> subs;
  {
    std::lock_guard lk(mu_);
    // Writes that arrived too late for the stream still land in the registers.
    while (!writes_.empty()) {
      auto w = std::move(writes_.front());
      writes_.pop_front();
      try {
        registers_ = ads1299::write_register(registers_, w.address, w.value);
        w.done.set_value({w.address, w.value, ++epoch_});
      } catch (...) {
        w.done.set_exception(std::current_exception());
      }
    }
    if (state_ == State::Running) state_ = State::Finished;
    subs = subscribers_;
  }
  for (auto& s : subs) s->end();
  state_cv_.notify_all();
}

}  // namespace peeg
