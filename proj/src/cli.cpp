#include "peeg/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "peeg/acquisition.hpp"
#include "peeg/backends.hpp"
#include "peeg/dsp.hpp"
#include "peeg/server.hpp"
#include "peeg/session.hpp"
#include "peeg/station.hpp"

namespace peeg::cli {
namespace {

using nlohmann::ordered_json;

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

std::optional<std::string> env_token() {
  const char* v = std::getenv("PEEG_TOKEN");
  if (v && *v) return std::string(v);
  return std::nullopt;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string hex2(unsigned v) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "0x%02X", v & 0xFF);
  return buf;
}

synth::Scenario scenario_arg(const std::string& name, std::uint64_t seed) {
  if (name.ends_with(".json")) return synth::load_scenario(name);
  return synth::named_scenario(name, seed);
}

std::size_t channel_arg(const session::Session& s, const std::string& label, std::size_t fallback) {
  if (label.empty()) return fallback;
  if (auto ch = s.find_channel(label)) return *ch;
  throw CLI::ValidationError("--channel", "no channel labelled '" + label + "' in the session");
}

std::size_t first_with_prefix(const session::Session& s, std::string_view prefix) {
  for (std::size_t ch = 0; ch < ads1299::kChannels; ++ch) {
    if (s.header.channel_labels[ch].starts_with(prefix)) return ch;
  }
  return 0;
}

std::uint8_t register_arg(const std::string& text) {
  for (const auto& info : ads1299::register_map()) {
    std::string upper = text;
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
    if (upper == info.name) return info.address;
  }
  std::size_t used = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(text, &used, 0);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || v > 0xFF) throw CLI::ValidationError("register", "unknown register '" + text + "'");
  return static_cast<std::uint8_t>(v);
}

std::uint8_t byte_arg(const std::string& text) {
  std::size_t used = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(text, &used, 0);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || v > 0xFF) throw CLI::ValidationError("value", "'" + text + "' is not a byte");
  return static_cast<std::uint8_t>(v);
}

std::string register_name(std::uint8_t address) {
  try {
    return std::string(ads1299::register_info(address).name);
  } catch (const Error&) {
    return "?";
  }
}

// Eyes-closed/open intervals from the session's annotations, or the default
// alternating 5 s protocol when there are none.
std::vector<dsp::ProtocolInterval> session_protocol(const session::Session& s) {
  std::vector<session::Annotation> marks;
  for (const auto& a : s.annotations) {
    if (a.text == "eyes_closed" || a.text == "eyes_open") marks.push_back(a);
  }
  std::stable_sort(marks.begin(), marks.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
  const double end = s.duration();
  if (marks.empty()) return dsp::alternating_protocol(end, 5.0);
  std::vector<dsp::ProtocolInterval> out;
  for (std::size_t i = 0; i < marks.size(); ++i) {
    const double stop = i + 1 < marks.size() ? marks[i + 1].time : end;
    if (stop <= marks[i].time) continue;
    out.push_back({marks[i].time, std::min(stop, end),
                   marks[i].text == "eyes_closed" ? dsp::EyeState::Closed : dsp::EyeState::Open});
  }
  return out;
}

ordered_json times_json(const std::vector<double>& times) {
  ordered_json a = ordered_json::array();
  for (double t : times) a.push_back(std::round(t * 1e4) / 1e4);
  return a;
}

std::string times_text(const std::vector<double>& times) {
  std::string s;
  for (double t : times) {
    if (!s.empty()) s += ' ';
    s += fmt("%.3f", t);
  }
  return s.empty() ? "-" : s;
}

struct Common {
  std::string format = "text";
  bool json() const { return format == "json"; }
};

// --- subcommands -------------------------------------------------------------

int cmd_simulate(const std::string& scenario_name, std::uint64_t seed, std::size_t block_len, const std::string& out_path,
                 std::ostream& out) {
  auto scenario = scenario_arg(scenario_name, seed);
  PipelineConfig pc;
  pc.block_len = block_len;
  pc.realtime = false;
  Pipeline pipeline(std::make_unique<SimulatorBackend>(scenario), pc);
  auto sub = pipeline.subscribe("writer", scenario.total_samples() / block_len + 2);
  auto header = session::make_header(pipeline.registers(), pipeline.channel_labels(), "simulator", pipeline.vref());
  header.scenario = synth::scenario_to_json(scenario);
  session::SessionWriter writer(out_path, header);
  for (const auto& a : protocol_annotations(scenario)) writer.annotate(a);
  pipeline.start();
  while (true) {
    auto b = sub->pop(std::chrono::milliseconds(500));
    if (!b) {
      if (sub->finished()) break;
      continue;
    }
    writer.append(*b);
  }
  pipeline.wait();
  if (auto f = pipeline.failure()) throw Error(Errc::BackendUnavailable, *f);
  writer.finalize();
  out << "wrote " << writer.blocks_written() << " blocks, " << writer.samples_written() << " samples ("
      << fmt("%.1f", static_cast<double>(writer.samples_written()) / scenario.fs) << " s) to " << out_path << "\n";
  return kExitOk;
}

void print_metrics(const protocol::Metrics& m, const std::array<std::string, ads1299::kChannels>& labels,
                   std::ostream& os) {
  os << "seq " << m.seq << " alpha";
  for (std::size_t ch = 0; ch < ads1299::kChannels; ++ch) os << ' ' << labels[ch] << '=' << fmt("%.1f", m.alpha_power[ch]);
  os << " | blinks " << m.counts[0] << " chews " << m.counts[1] << " emg " << m.counts[2] << " beats " << m.counts[3]
     << "\n";
}

bool wait_loop(Station& station, double duration_s, bool until_end) {
  const auto t0 = std::chrono::steady_clock::now();
  while (!g_interrupted) {
    if (until_end && !station.running()) return true;
    if (duration_s > 0 &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() >= duration_s) {
      return true;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  return false;
}

void install_signals() {
  g_interrupted = false;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

int cmd_record(const std::string& backend_spec, std::uint64_t seed, std::size_t block_len, const std::string& out_path,
               double duration_s, bool fast, std::ostream& out, std::ostream& err) {
  StationConfig sc;
  sc.pipeline.block_len = block_len;
  sc.pipeline.realtime = !fast;
  sc.record_path = out_path;
  Station station([=] { return make_backend(backend_spec, seed); }, sc);
  const auto labels = station.pipeline()->channel_labels();
  station.add_metrics_listener([&err, labels](const protocol::Metrics& m) { print_metrics(m, labels, err); });
  install_signals();
  station.start();
  wait_loop(station, duration_s, true);
  if (station.running()) station.stop();
  station.wait();
  const auto p = station.pipeline();
  if (auto f = p->failure()) throw Error(Errc::BackendUnavailable, *f);
  const auto s = p->stats();
  out << "recorded " << s.produced << " blocks, " << s.produced_samples << " samples to " << out_path << "\n";
  return kExitOk;
}

int cmd_serve(const std::string& backend_spec, std::uint64_t seed, std::size_t block_len, ServerConfig server_cfg,
              std::optional<std::string> record, bool idle, bool fast, double duration_s, bool exit_at_end,
              std::ostream& out) {
  StationConfig sc;
  sc.pipeline.block_len = block_len;
  sc.pipeline.realtime = !fast;
  if (record) sc.record_path = *record;
  Station station([=] { return make_backend(backend_spec, seed); }, sc);
  server_cfg.token = env_token();
  Server server(station, server_cfg);
  out << "serving " << station.pipeline()->backend().describe() << " on tcp " << server_cfg.tcp_host << ':'
      << server.tcp_port();
  if (server_cfg.websocket) out << ", ws " << server_cfg.ws_host << ':' << server.ws_port() << server_cfg.ws_path;
  out << (server_cfg.token ? " (token required)" : "") << "\n" << std::flush;
  install_signals();
  if (!idle) station.start();
  wait_loop(station, duration_s, exit_at_end);
  if (station.running()) station.stop();
  server.stop();
  station.wait();
  return kExitOk;
}

int cmd_analyze_alpha(const session::Session& s, const std::string& label, const Common& c, std::ostream& out) {
  const std::size_t ch = channel_arg(s, label, 0);
  const auto x = s.channel(ch);
  const auto protocol = session_protocol(s);
  const auto r = dsp::score_alpha_protocol(x, s.header.fs, protocol);
  if (c.json()) {
    ordered_json j;
    j["analysis"] = "alpha";
    j["channel"] = s.header.channel_labels[ch];
    j["fs"] = s.header.fs;
    j["threshold"] = r.threshold;
    j["ratio"] = r.ratio;
    j["sequence_match"] = r.sequence_match;
    j["segments"] = ordered_json::array();
    for (const auto& seg : r.segments) {
      j["segments"].push_back({{"start", seg.start},
                               {"end", seg.end},
                               {"expected", dsp::to_string(seg.expected)},
                               {"label", dsp::to_string(seg.label)},
                               {"alpha_power_uv2", seg.mean_alpha_power}});
    }
    out << j.dump(2) << "\n";
    return kExitOk;
  }
  out << "alpha protocol, channel " << s.header.channel_labels[ch] << ", " << s.header.fs << " SPS\n";
  out << "  seg   start     end  expected     label          alpha_uV2\n";
  for (std::size_t i = 0; i < r.segments.size(); ++i) {
    const auto& seg = r.segments[i];
    out << std::setw(5) << i + 1 << std::setw(8) << fmt("%.1f", seg.start) << std::setw(8) << fmt("%.1f", seg.end)
        << "  " << std::left << std::setw(11) << dsp::to_string(seg.expected) << "  " << std::setw(11)
        << dsp::to_string(seg.label) << std::right << std::setw(12) << fmt("%.2f", seg.mean_alpha_power) << "\n";
  }
  out << "threshold " << fmt("%.3f", r.threshold) << " uV2\n";
  out << "ratio " << fmt("%.2f", r.ratio) << "\n";
  out << "sequence_match " << fmt("%.3f", r.sequence_match) << "\n";
  return kExitOk;
}

int cmd_analyze_artifacts(const session::Session& s, const std::string& blink_label, const std::string& chew_label,
                          const Common& c, std::ostream& out) {
  const std::size_t bch = channel_arg(s, blink_label, 0);
  const std::size_t cch = channel_arg(s, chew_label, 0);
  const double fs = s.header.fs;
  const auto blinks = dsp::detect_blinks(s.channel(bch), fs);
  const auto chews = dsp::detect_chews(s.channel(cch), fs);
  if (c.json()) {
    ordered_json j;
    j["analysis"] = "artifacts";
    j["blinks"] = {{"channel", s.header.channel_labels[bch]}, {"count", blinks.size()}, {"times", times_json(blinks.times)}};
    j["chews"] = {{"channel", s.header.channel_labels[cch]}, {"count", chews.size()}, {"times", times_json(chews.times)}};
    out << j.dump(2) << "\n";
    return kExitOk;
  }
  out << "blinks " << blinks.size() << " (" << s.header.channel_labels[bch] << "): " << times_text(blinks.times) << "\n";
  out << "chews " << chews.size() << " (" << s.header.channel_labels[cch] << "): " << times_text(chews.times) << "\n";
  return kExitOk;
}

int cmd_analyze_emg(const session::Session& s, const std::string& label, const Common& c, std::ostream& out) {
  const std::size_t ch = channel_arg(s, label, first_with_prefix(s, "EMG"));
  const auto onsets = dsp::emg_envelope_onsets(s.channel(ch), s.header.fs);
  if (c.json()) {
    ordered_json j;
    j["analysis"] = "emg";
    j["channel"] = s.header.channel_labels[ch];
    j["count"] = onsets.size();
    j["onsets"] = times_json(onsets.times);
    j["warnings"] = onsets.warnings;
    out << j.dump(2) << "\n";
    return kExitOk;
  }
  out << "emg onsets " << onsets.size() << " (" << s.header.channel_labels[ch] << "): " << times_text(onsets.times)
      << "\n";
  for (const auto& w : onsets.warnings) out << "warning: " << w << "\n";
  return kExitOk;
}

int cmd_analyze_ecg(const session::Session& s, const std::string& label, const Common& c, std::ostream& out) {
  const std::size_t ch = channel_arg(s, label, first_with_prefix(s, "ECG"));
  const auto hr = dsp::detect_r_peaks(s.channel(ch), s.header.fs);
  if (c.json()) {
    ordered_json j;
    j["analysis"] = "ecg";
    j["channel"] = s.header.channel_labels[ch];
    j["beats"] = hr.peaks.size();
    j["mean_hr"] = hr.mean_hr ? ordered_json(std::round(*hr.mean_hr * 1e3) / 1e3) : ordered_json(nullptr);
    j["r_peaks"] = times_json(hr.peaks.times);
    out << j.dump(2) << "\n";
    return kExitOk;
  }
  out << "beats " << hr.peaks.size() << " (" << s.header.channel_labels[ch] << ")\n";
  out << "mean_hr " << (hr.mean_hr ? fmt("%.2f", *hr.mean_hr) + " bpm" : std::string("n/a")) << "\n";
  return kExitOk;
}

int cmd_regs_get(const std::string& endpoint, const std::optional<std::string>& reg, const Common& c,
                 std::ostream& out) {
  Client client(endpoint, env_token());
  std::vector<std::uint8_t> addrs;
  if (reg) {
    addrs.push_back(register_arg(*reg));
  } else {
    for (const auto& info : ads1299::register_map()) addrs.push_back(info.address);
  }
  ordered_json j = ordered_json::array();
  for (auto a : addrs) {
    protocol::Command cmd;
    cmd.op = protocol::CommandOp::Rreg;
    cmd.address = a;
    const auto ack = client.command(cmd);
    if (c.json()) {
      j.push_back({{"register", register_name(a)}, {"address", a}, {"value", ack.value}});
    } else {
      out << std::left << std::setw(11) << register_name(a) << std::right << ' ' << hex2(a) << " = " << hex2(ack.value)
          << "\n";
    }
  }
  if (c.json()) out << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_regs_set(const std::string& endpoint, const std::string& reg, const std::string& value, const Common& c,
                 std::ostream& out) {
  const auto a = register_arg(reg);
  const auto v = byte_arg(value);
  try {
    ads1299::write_register(ads1299::RegisterFile{}, a, v);  // fail before touching the network
  } catch (const Error& e) {
    throw CLI::ValidationError("value", e.what());
  }
  Client client(endpoint, env_token());
  protocol::Command cmd;
  cmd.op = protocol::CommandOp::Wreg;
  cmd.address = a;
  cmd.value = v;
  const auto ack = client.command(cmd);
  if (c.json()) {
    ordered_json j{{"register", register_name(a)}, {"address", a}, {"value", ack.value}, {"epoch", ack.epoch}};
    out << j.dump(2) << "\n";
  } else {
    out << register_name(a) << ' ' << hex2(a) << " <- " << hex2(ack.value) << " (epoch " << ack.epoch << ")\n";
  }
  return kExitOk;
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::IoFailure:
    case Errc::BadMagic:
    case Errc::UnsupportedVersion:
    case Errc::ChecksumMismatch:
    case Errc::Truncated:
    case Errc::InconsistentRate:
      return kExitIo;
    case Errc::ConnectionFailed:
    case Errc::Remote:
    case Errc::Unauthorized:
    case Errc::UnknownType:
    case Errc::LengthOverflow:
    case Errc::Malformed:
    case Errc::BindFailure:
      return kExitProtocol;
    default:
      return kExitFailure;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"PiEEG acquisition station: simulate, record, stream and analyze 8-channel biosignals", "peeg"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "peeg 0.1.0");

  Common common;
  app.add_option("--format", common.format, "Report format")->check(CLI::IsMember({"text", "json"}))->capture_default_str();

  std::uint64_t seed = 1;
  std::size_t block_len = 25;
  auto add_stream_opts = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Simulator seed")->capture_default_str();
    sub->add_option("--block-len", block_len, "Samples per block")->check(CLI::Range(1, 16000))->capture_default_str();
  };

  // simulate
  std::string scenario = "fig6", out_path;
  auto* simulate = app.add_subcommand("simulate", "Render a scenario into a session file");
  simulate->add_option("--scenario", scenario, "fig6, fig7, emg, ecg, ecg120, noise or a scenario .json")->capture_default_str();
  simulate->add_option("--out,-o", out_path, "Session file to write")->required();
  add_stream_opts(simulate);

  // record
  std::string backend = "sim:fig6";
  double duration = 0.0;
  bool fast = false;
  auto* record = app.add_subcommand("record", "Record a backend into a session file, printing live metrics");
  record->add_option("--backend", backend, "sim:<scenario>, replay:<file> or hw:<config.json>")->capture_default_str();
  record->add_option("--out,-o", out_path, "Session file to write")->required();
  record->add_option("--duration", duration, "Stop after this many seconds (0: until the source ends)");
  record->add_flag("--fast", fast, "Do not pace to the sample clock");
  add_stream_opts(record);

  // serve / replay
  ServerConfig server_cfg;
  std::string tcp_ep = "127.0.0.1:7715", ws_ep = "127.0.0.1:7716";
  bool no_ws = false, idle = false;
  std::optional<std::string> record_to;
  auto add_server_opts = [&](CLI::App* sub) {
    sub->add_option("--tcp", tcp_ep, "TCP listen address")->capture_default_str();
    sub->add_option("--ws", ws_ep, "WebSocket listen address")->capture_default_str();
    sub->add_flag("--no-ws", no_ws, "Disable the WebSocket listener");
    sub->add_option("--duration", duration, "Exit after this many seconds");
    sub->add_flag("--fast", fast, "Do not pace to the sample clock");
    add_stream_opts(sub);
  };
  auto* serve = app.add_subcommand("serve", "Stream a backend to network clients");
  serve->add_option("--backend", backend, "sim:<scenario>, replay:<file> or hw:<config.json>")->capture_default_str();
  serve->add_option("--record", record_to, "Also record each started stream to this session file");
  serve->add_flag("--idle", idle, "Wait for a START command instead of streaming at once");
  add_server_opts(serve);

  std::string session_path;
  auto* replay = app.add_subcommand("replay", "Stream a recorded session to network clients, then exit");
  replay->add_option("session", session_path, "Session file")->required()->check(CLI::ExistingFile);
  add_server_opts(replay);

  // analyze
  std::string channel, blink_channel, chew_channel;
  auto* analyze = app.add_subcommand("analyze", "Analyze a session file");
  analyze->require_subcommand(1);
  auto* a_alpha = analyze->add_subcommand("alpha", "Eyes closed/open alpha protocol report");
  auto* a_art = analyze->add_subcommand("artifacts", "Blink and chewing events");
  auto* a_emg = analyze->add_subcommand("emg", "EMG burst onsets");
  auto* a_ecg = analyze->add_subcommand("ecg", "R peaks and mean heart rate");
  bool recover = false;
  for (auto* sub : {a_alpha, a_art, a_emg, a_ecg}) {
    sub->add_option("session", session_path, "Session file")->required()->check(CLI::ExistingFile);
    sub->add_flag("--recover", recover, "Use the readable prefix of a file with no footer");
  }
  for (auto* sub : {a_alpha, a_emg, a_ecg}) sub->add_option("--channel", channel, "Channel label");
  a_art->add_option("--blink-channel", blink_channel, "Channel label for blinks (default: first channel)");
  a_art->add_option("--chew-channel", chew_channel, "Channel label for chewing (default: first channel)");

  // regs
  std::string endpoint = env_or("PEEG_ENDPOINT", "127.0.0.1:7715");
  std::optional<std::string> reg;
  std::string reg_name, reg_value;
  auto* regs = app.add_subcommand("regs", "Read or write converter registers on a running station");
  regs->require_subcommand(1);
  regs->add_option("--endpoint", endpoint, "Station address (PEEG_ENDPOINT)")->capture_default_str();
  auto* regs_get = regs->add_subcommand("get", "Read one register, or all");
  regs_get->add_option("register", reg, "Name (CH1SET) or address (0x05)");
  auto* regs_set = regs->add_subcommand("set", "Write one register");
  regs_set->add_option("register", reg_name, "Name (CH1SET) or address (0x05)")->required();
  regs_set->add_option("value", reg_value, "Byte value (0x50)")->required();

  // export
  auto* exp = app.add_subcommand("export", "Export a session");
  exp->require_subcommand(1);
  auto* exp_csv = exp->add_subcommand("csv", "Write t_s plus one microvolt column per channel");
  exp_csv->add_option("session", session_path, "Session file")->required()->check(CLI::ExistingFile);
  exp_csv->add_option("--out,-o", out_path, "CSV file")->required();
  exp_csv->add_flag("--recover", recover, "Use the readable prefix of a file with no footer");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    if (rc == 0) return kExitOk;
    err << app.help();
    return kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(scenario, seed, block_len, out_path, out);
    if (*record) return cmd_record(backend, seed, block_len, out_path, duration, fast, out, err);
    if (*serve || *replay) {
      const auto [th, tp] = parse_endpoint(tcp_ep);
      server_cfg.tcp_host = th;
      server_cfg.tcp_port = tp;
      server_cfg.websocket = !no_ws;
      if (!no_ws) {
        const auto [wh, wp] = parse_endpoint(ws_ep);
        server_cfg.ws_host = wh;
        server_cfg.ws_port = wp;
      }
      if (*replay) {
        return cmd_serve("replay:" + session_path, seed, block_len, server_cfg, std::nullopt, false, fast, duration,
                         true, out);
      }
      return cmd_serve(backend, seed, block_len, server_cfg, record_to, idle, fast, duration, false, out);
    }
    auto load = [&] {
      if (!recover) return session::read_session(session_path);
      auto s = session::recover_session(session_path);
      if (!s.complete) err << "peeg: warning: truncated session, using " << s.blocks.size() << " blocks\n";
      return s;
    };
    if (*analyze) {
      const auto s = load();
      if (*a_alpha) return cmd_analyze_alpha(s, channel, common, out);
      if (*a_art) return cmd_analyze_artifacts(s, blink_channel, chew_channel, common, out);
      if (*a_emg) return cmd_analyze_emg(s, channel, common, out);
      return cmd_analyze_ecg(s, channel, common, out);
    }
    if (*regs) {
      if (*regs_get) return cmd_regs_get(endpoint, reg, common, out);
      return cmd_regs_set(endpoint, reg_name, reg_value, common, out);
    }
    if (*exp_csv) {
      const auto s = load();
      session::export_csv(s, out_path);
      out << "wrote " << s.sample_count << " rows to " << out_path << "\n";
      return kExitOk;
    }
  } catch (const CLI::ValidationError& e) {
    err << "peeg: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "peeg: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "peeg: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace peeg::cli
