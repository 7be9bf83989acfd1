#include <nlohmann/json.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "helpers.hpp"
#include "peeg/cli.hpp"
#include "peeg/server.hpp"
#include "peeg/session.hpp"

using namespace peeg;
using testutil::TempPath;

namespace {

struct Result {
  int rc;
  std::string out;
  std::string err;
};

Result peeg_run(std::vector<std::string> args) {
  args.insert(args.begin(), "peeg");
  std::ostringstream out, err;
  const int rc = cli::run(args, out, err);
  return {rc, out.str(), err.str()};
}

nlohmann::json json_of(const Result& r) {
  REQUIRE(r.rc == 0);
  return nlohmann::json::parse(r.out);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 2") {
    auto r = peeg_run({"--bogus-flag"});
    CHECK(r.rc == cli::kExitUsage);
    CHECK(r.err.find("Usage") != std::string::npos);
    r = peeg_run({});
    CHECK(r.rc == cli::kExitUsage);
    r = peeg_run({"simulate"});
    CHECK(r.rc == cli::kExitUsage);
    r = peeg_run({"analyze", "alpha", "/nonexistent.peeg"});
    CHECK(r.rc == cli::kExitUsage);
    CHECK(peeg_run({"--help"}).rc == cli::kExitOk);
  }

  TEST_CASE("simulate then analyze alpha") {
    TempPath s("cli_fig6.peeg");
    auto r = peeg_run({"simulate", "--scenario", "fig6", "--out", s.path.string()});
    REQUIRE(r.rc == 0);
    const auto j = json_of(peeg_run({"--format", "json", "analyze", "alpha", s.path.string()}));
    CHECK(j["sequence_match"].get<double>() >= 0.9);
    CHECK(j["ratio"].get<double>() >= 2.0);
    const auto text = peeg_run({"analyze", "alpha", s.path.string()});
    CHECK(text.rc == 0);
    CHECK(text.out.find("sequence_match") != std::string::npos);
    const auto session = session::read_session(s.path);
    CHECK(session.annotations.size() == 6);  // closed at 0, 10, 20; open at 5, 15, 25
  }

  TEST_CASE("artifacts, emg and ecg reports") {
    TempPath f7("cli_fig7.peeg");
    REQUIRE(peeg_run({"simulate", "--scenario", "fig7", "-o", f7.path.string()}).rc == 0);
    auto j = json_of(peeg_run({"--format", "json", "analyze", "artifacts", f7.path.string()}));
    CHECK(j["blinks"]["count"] == 9);
    CHECK(j["chews"]["count"] == 10);

    TempPath emg("cli_emg.peeg");
    REQUIRE(peeg_run({"simulate", "--scenario", "emg", "-o", emg.path.string()}).rc == 0);
    j = json_of(peeg_run({"--format", "json", "analyze", "emg", emg.path.string()}));
    CHECK(j["onsets"].size() == 5);

    TempPath ecg("cli_ecg.peeg");
    REQUIRE(peeg_run({"simulate", "--scenario", "ecg", "-o", ecg.path.string()}).rc == 0);
    j = json_of(peeg_run({"--format", "json", "analyze", "ecg", ecg.path.string()}));
    CHECK(std::abs(j["mean_hr"].get<double>() - 60.0) <= 1.0);
    const auto text = peeg_run({"analyze", "ecg", ecg.path.string()});
    CHECK(text.out.find("mean_hr") != std::string::npos);

    auto bad = peeg_run({"analyze", "ecg", "--channel", "T9", ecg.path.string()});
    CHECK(bad.rc != 0);
  }

  TEST_CASE("export csv") {
    TempPath s("cli_noise.peeg");
    TempPath csv("cli_noise.csv");
    REQUIRE(peeg_run({"simulate", "--scenario", "noise", "-o", s.path.string()}).rc == 0);
    REQUIRE(peeg_run({"export", "csv", s.path.string(), "-o", csv.path.string()}).rc == 0);
    const auto t = session::import_csv(csv.path);
    CHECK(t.t.front() == 0.0);
    CHECK(t.t.size() == session::read_session(s.path).sample_count);
  }

  TEST_CASE("corrupt session exits 3") {
    TempPath s("cli_bad.peeg");
    {
      std::ofstream o(s.path, std::ios::binary);
      o << "not a session";
    }
    CHECK(peeg_run({"analyze", "ecg", s.path.string()}).rc == cli::kExitIo);
  }

  TEST_CASE("truncated session needs --recover") {
    TempPath s("cli_cut.peeg");
    REQUIRE(peeg_run({"simulate", "--scenario", "ecg", "-o", s.path.string()}).rc == 0);
    const auto full = std::filesystem::file_size(s.path);
    std::filesystem::resize_file(s.path, full - 40);
    CHECK(peeg_run({"analyze", "ecg", s.path.string()}).rc == cli::kExitIo);
    const auto r = peeg_run({"--format", "json", "analyze", "ecg", "--recover", s.path.string()});
    CHECK(r.err.find("truncated") != std::string::npos);
    CHECK(std::abs(json_of(r)["mean_hr"].get<double>() - 60.0) <= 1.0);
    TempPath csv("cli_cut.csv");
    CHECK(peeg_run({"export", "csv", "--recover", s.path.string(), "-o", csv.path.string()}).rc == 0);
  }

  TEST_CASE("regs against a running station") {
    Station station([] { return std::make_unique<SimulatorBackend>(synth::noise_scenario(5.0)); });
    ServerConfig cfg;
    cfg.tcp_port = 0;
    cfg.websocket = false;
    Server server(station, cfg);
    const std::string ep = "127.0.0.1:" + std::to_string(server.tcp_port());
    auto r = peeg_run({"regs", "--endpoint", ep, "get", "CH1SET"});
    CHECK(r.rc == 0);
    CHECK(r.out.find("0x60") != std::string::npos);
    r = peeg_run({"regs", "--endpoint", ep, "set", "CH2SET", "0x50"});
    CHECK(r.rc == 0);
    CHECK(station.read_register(ads1299::chset_addr(1)) == 0x50);
    CHECK(peeg_run({"regs", "--endpoint", ep, "set", "ID", "0x00"}).rc == cli::kExitUsage);
    CHECK(peeg_run({"regs", "--endpoint", ep, "get", "NOPE"}).rc == cli::kExitUsage);
    CHECK(peeg_run({"regs", "--endpoint", "127.0.0.1:1", "get"}).rc == cli::kExitProtocol);
    const auto all = json_of(peeg_run({"--format", "json", "regs", "--endpoint", ep, "get"}));
    CHECK(all.size() == 24);
  }
}
