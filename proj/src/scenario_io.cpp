#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "peeg/error.hpp"
#include "peeg/synth.hpp"

namespace peeg::synth {
namespace {

using nlohmann::json;

constexpr int kScenarioVersion = 1;

json gains_to_json(const EventGains& g) {
  return {{"alpha", g.alpha}, {"blink", g.blink}, {"chew", g.chew}, {"emg", g.emg}, {"ecg", g.ecg}};
}

EventGains gains_from_json(const json& j) {
  EventGains g;
  g.alpha = j.value("alpha", 0.0);
  g.blink = j.value("blink", 0.0);
  g.chew = j.value("chew", 0.0);
  g.emg = j.value("emg", 0.0);
  g.ecg = j.value("ecg", 0.0);
  return g;
}

double default_freq(EventKind kind) {
  switch (kind) {
    case EventKind::AlphaInterval: return kDefaultAlphaHz;
    case EventKind::Chew: return kDefaultChewModulationHz;
    default: return 0.0;
  }
}

}  // namespace

std::string scenario_to_json(const Scenario& s) {
  json j;
  j["scenario_version"] = kScenarioVersion;
  j["name"] = s.name;
  j["duration_s"] = s.duration;
  j["fs"] = s.fs;
  j["seed"] = s.seed;
  j["channels"] = json::array();
  for (const auto& c : s.channels) {
    j["channels"].push_back({{"label", c.label},
                             {"noise_uv_rms", c.noise_uv_rms},
                             {"mains_hz", c.mains_hz},
                             {"mains_uv", c.mains_uv},
                             {"event_gain", gains_to_json(c.event_gain)}});
  }
  j["events"] = json::array();
  for (const auto& e : s.events) {
    json ej = {{"kind", to_string(e.kind)},
               {"start_s", e.start},
               {"length_s", e.length},
               {"amplitude_uv", e.amplitude_uv}};
    if (e.kind == EventKind::AlphaInterval || e.kind == EventKind::Chew) ej["freq_hz"] = e.freq_hz;
    if (e.kind == EventKind::EcgRun) ej["bpm"] = e.bpm;
    j["events"].push_back(std::move(ej));
  }
  return j.dump(2);
}

Scenario scenario_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::InvalidScenario, std::string("not valid JSON: ") + e.what());
  }
  try {
    const int version = j.at("scenario_version").get<int>();
    if (version != kScenarioVersion) {
      throw Error(Errc::UnsupportedVersion, "scenario_version " + std::to_string(version));
    }
    Scenario s;
    s.name = j.value("name", std::string("custom"));
    s.duration = j.at("duration_s").get<double>();
    s.fs = j.value("fs", 250);
    s.seed = j.value("seed", std::uint64_t{1});
    const auto& channels = j.at("channels");
    if (!channels.is_array() || channels.size() != kChannels) {
      throw Error(Errc::InvalidScenario, "channels must list exactly 8 entries");
    }
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
      const auto& c = channels[ch];
      s.channels[ch].label = c.at("label").get<std::string>();
      s.channels[ch].noise_uv_rms = c.value("noise_uv_rms", 0.0);
      s.channels[ch].mains_hz = c.value("mains_hz", 0);
      s.channels[ch].mains_uv = c.value("mains_uv", 0.0);
      s.channels[ch].event_gain = gains_from_json(c.value("event_gain", json::object()));
    }
    for (const auto& ej : j.value("events", json::array())) {
      Event e;
      e.kind = event_kind_from_string(ej.at("kind").get<std::string>());
      e.start = ej.at("start_s").get<double>();
      e.length = ej.at("length_s").get<double>();
      e.amplitude_uv = ej.at("amplitude_uv").get<double>();
      e.freq_hz = ej.value("freq_hz", default_freq(e.kind));
      e.bpm = ej.value("bpm", 0.0);
      s.events.push_back(e);
    }
    validate(s);
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidScenario, e.what());
  }
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return scenario_from_json(ss.str());
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << scenario_to_json(scenario) << '\n';
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

}  // namespace peeg::synth
