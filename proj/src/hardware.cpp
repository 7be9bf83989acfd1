#include "peeg/backends.hpp"

#ifdef PEEG_WITH_HARDWARE

#include <fcntl.h>
#include <linux/gpio.h>
#include <linux/spi/spidev.h>
#include <poll.h>
#include <sys/ioctl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>
#include <vector>

namespace peeg {
namespace {

std::string sys_error(const std::string& what) { return what + ": " + std::strerror(errno); }

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  ~Fd() { reset(); }
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    reset();
    fd_ = std::exchange(o.fd_, -1);
    return *this;
  }
  int get() const noexcept { return fd_; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

// ADS1299 over spidev with DRDY as a GPIO edge event (character device ABI v2).
class HardwareBackend final : public DeviceBackend {
 public:
  explicit HardwareBackend(HardwareConfig config) : config_(std::move(config)) {
    spi_ = Fd(::open(config_.spi_device.c_str(), O_RDWR));
    if (spi_.get() < 0) throw Error(Errc::BackendUnavailable, sys_error(config_.spi_device));
    std::uint8_t mode = SPI_MODE_1;
    std::uint8_t bits = 8;
    if (::ioctl(spi_.get(), SPI_IOC_WR_MODE, &mode) < 0 ||
        ::ioctl(spi_.get(), SPI_IOC_WR_BITS_PER_WORD, &bits) < 0 ||
        ::ioctl(spi_.get(), SPI_IOC_WR_MAX_SPEED_HZ, &config_.spi_speed_hz) < 0) {
      throw Error(Errc::BackendUnavailable, sys_error("spidev setup"));
    }

    Fd chip(::open(config_.gpio_chip.c_str(), O_RDWR));
    if (chip.get() < 0) throw Error(Errc::BackendUnavailable, sys_error(config_.gpio_chip));
    gpio_v2_line_request req{};
    req.offsets[0] = static_cast<std::uint32_t>(config_.drdy_line);
    req.num_lines = 1;
    req.config.flags = GPIO_V2_LINE_FLAG_INPUT | GPIO_V2_LINE_FLAG_EDGE_FALLING;
    std::strncpy(req.consumer, "pieeg-drdy", sizeof req.consumer - 1);
    if (::ioctl(chip.get(), GPIO_V2_GET_LINE_IOCTL, &req) < 0) {
      throw Error(Errc::BackendUnavailable, sys_error("DRDY line request"));
    }
    drdy_ = Fd(req.fd);

    if (config_.reset_line >= 0) {
      gpio_v2_line_request rst{};
      rst.offsets[0] = static_cast<std::uint32_t>(config_.reset_line);
      rst.num_lines = 1;
      rst.config.flags = GPIO_V2_LINE_FLAG_OUTPUT;
      std::strncpy(rst.consumer, "pieeg-reset", sizeof rst.consumer - 1);
      if (::ioctl(chip.get(), GPIO_V2_GET_LINE_IOCTL, &rst) < 0) {
        throw Error(Errc::BackendUnavailable, sys_error("RESET line request"));
      }
      reset_ = Fd(rst.fd);
    }
  }

  BackendKind kind() const noexcept override { return BackendKind::Hardware; }
  BackendCapabilities capabilities() const noexcept override { return {true, true, true}; }
  std::string describe() const override { return "hardware:" + config_.spi_device; }

  void open(const ads1299::RegisterFile& rf, std::size_t /*block_len*/) override {
    hardware_reset();
    command(ads1299::CommandKind::Sdatac);
    const std::uint8_t id = read_reg(ads1299::addr(ads1299::Reg::Id));
    if ((id & 0x1F) != (ads1299::kDeviceId & 0x1F)) {
      throw Error(Errc::BackendUnavailable, "unexpected device id 0x" + hex(id));
    }
    // CONFIG1..CONFIG4 except the read-only lead-off status pair.
    for (std::uint8_t a = ads1299::addr(ads1299::Reg::Config1); a < ads1299::kRegisterCount; ++a) {
      if (ads1299::register_info(a).read_only) continue;
      write_reg(a, rf.read(a));
    }
    command(ads1299::CommandKind::Start);
    command(ads1299::CommandKind::Rdatac);
    streaming_ = true;
  }

  std::optional<ads1299::FrameBytes> read_frame() override {
    pollfd p{drdy_.get(), POLLIN, 0};
    const int r = ::poll(&p, 1, config_.drdy_timeout_ms);
    if (r < 0) throw Error(Errc::BackendUnavailable, sys_error("DRDY poll"));
    if (r == 0) throw Error(Errc::BackendUnavailable, "DRDY timeout");
    gpio_v2_line_event ev{};
    if (::read(drdy_.get(), &ev, sizeof ev) != static_cast<ssize_t>(sizeof ev)) {
      throw Error(Errc::BackendUnavailable, sys_error("DRDY event read"));
    }
    ads1299::FrameBytes frame{};
    transfer(frame.data(), frame.size());
    return frame;
  }

  void write_register(std::uint8_t address, std::uint8_t value) override {
    if (streaming_) command(ads1299::CommandKind::Sdatac);
    write_reg(address, value);
    if (streaming_) command(ads1299::CommandKind::Rdatac);
  }

  void close() override {
    if (!streaming_) return;
    streaming_ = false;
    try {
      command(ads1299::CommandKind::Sdatac);
      command(ads1299::CommandKind::Stop);
    } catch (const Error&) {
    }
  }

 private:
  static std::string hex(std::uint8_t v) {
    static constexpr char d[] = "0123456789abcdef";
    return {d[v >> 4], d[v & 0xF]};
  }

  void transfer(std::uint8_t* buf, std::size_t n) {
    spi_ioc_transfer t{};
    t.tx_buf = reinterpret_cast<std::uintptr_t>(buf);
    t.rx_buf = reinterpret_cast<std::uintptr_t>(buf);
    t.len = static_cast<std::uint32_t>(n);
    t.speed_hz = config_.spi_speed_hz;
    t.bits_per_word = 8;
    if (::ioctl(spi_.get(), SPI_IOC_MESSAGE(1), &t) < 0) {
      throw Error(Errc::BackendUnavailable, sys_error("SPI transfer"));
    }
  }

  void command(ads1299::CommandKind kind) {
    const auto op = ads1299::command_opcode({kind});
    std::vector<std::uint8_t> buf(op.begin(), op.end());
    transfer(buf.data(), buf.size());
    // tSDECODE: 4 tCLK at 2.048 MHz between bytes; a short pause covers it.
    std::this_thread::sleep_for(std::chrono::microseconds(4));
  }

  std::uint8_t read_reg(std::uint8_t address) {
    const auto op = ads1299::command_opcode(ads1299::Command::rreg(address, 1));
    std::vector<std::uint8_t> buf(op.begin(), op.end());
    buf.push_back(0);
    transfer(buf.data(), buf.size());
    return buf.back();
  }

  void write_reg(std::uint8_t address, std::uint8_t value) {
    const auto op = ads1299::command_opcode(ads1299::Command::wreg(address, 1));
    std::vector<std::uint8_t> buf(op.begin(), op.end());
    buf.push_back(value);
    transfer(buf.data(), buf.size());
  }

  void hardware_reset() {
    if (reset_.get() >= 0) {
      gpio_v2_line_values v{};
      v.mask = 1;
      v.bits = 0;
      ::ioctl(reset_.get(), GPIO_V2_LINE_SET_VALUES_IOCTL, &v);
      std::this_thread::sleep_for(std::chrono::microseconds(10));
      v.bits = 1;
      ::ioctl(reset_.get(), GPIO_V2_LINE_SET_VALUES_IOCTL, &v);
    } else {
      command(ads1299::CommandKind::Reset);
    }
    // 18 tCLK after reset before the first command.
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }

  HardwareConfig config_;
  Fd spi_;
  Fd drdy_;
  Fd reset_;
  bool streaming_ = false;
};

}  // namespace

std::unique_ptr<DeviceBackend> make_hardware_backend(const HardwareConfig& config) {
  return std::make_unique<HardwareBackend>(config);
}

}  // namespace peeg

#else

namespace peeg {

std::unique_ptr<DeviceBackend> make_hardware_backend(const HardwareConfig&) {
  throw Error(Errc::BackendUnavailable, "built without hardware support (PEEG_WITH_HARDWARE=OFF)");
}

}  // namespace peeg

#endif
