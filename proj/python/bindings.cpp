#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "peeg/ads1299.hpp"
#include "peeg/cli.hpp"
#include "peeg/dsp.hpp"
#include "peeg/session.hpp"
#include "peeg/synth.hpp"

namespace py = pybind11;
using namespace peeg;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::span<const double> view(const Array& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D array");
  return {a.data(), static_cast<std::size_t>(a.size())};
}

Array to_array(const std::vector<double>& v) { return Array(static_cast<py::ssize_t>(v.size()), v.data()); }

Array channel_matrix(const std::array<std::vector<double>, ads1299::kChannels>& ch) {
  const auto n = static_cast<py::ssize_t>(ch[0].size());
  Array out({static_cast<py::ssize_t>(ads1299::kChannels), n});
  auto* p = out.mutable_data();
  for (std::size_t c = 0; c < ch.size(); ++c) std::copy(ch[c].begin(), ch[c].end(), p + c * n);
  return out;
}

dsp::FilterKind filter_kind(const std::string& name) {
  if (name == "bandpass") return dsp::FilterKind::Bandpass;
  if (name == "notch") return dsp::FilterKind::Notch;
  if (name == "highpass") return dsp::FilterKind::Highpass;
  if (name == "lowpass") return dsp::FilterKind::Lowpass;
  throw py::value_error("filter kind must be bandpass, notch, highpass or lowpass");
}

synth::Scenario scenario_arg(const std::string& name_or_json, std::uint64_t seed) {
  if (!name_or_json.empty() && name_or_json.front() == '{') return synth::scenario_from_json(name_or_json);
  return synth::named_scenario(name_or_json, seed);
}

py::dict truth_dict(const synth::GroundTruth& t) {
  py::dict d;
  d["alpha_closed"] = t.alpha_closed;
  d["blink_apexes"] = t.blink_apexes;
  d["chew_centers"] = t.chew_centers;
  d["emg_onsets"] = t.emg_onsets;
  d["r_peaks"] = t.r_peaks;
  return d;
}

}  // namespace

PYBIND11_MODULE(_peeg, m) {
  m.doc() = "PiEEG station core";

  // Kept alive for the interpreter's lifetime, like the module itself.
  static py::handle error_type = py::exception<Error>(m, "Error").inc_ref();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = error_type(e.what());
      inst.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type.ptr(), inst.ptr());
    }
  });

  // converter
  m.attr("FRAME_BYTES") = ads1299::kFrameBytes;
  m.attr("CHANNELS") = ads1299::kChannels;

  m.def(
      "decode_frame",
      [](py::bytes raw, bool check_sync) {
        const std::string s = raw;
        const auto f = ads1299::decode_frame(
            std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()), {check_sync});
        return py::make_tuple(f.status, std::vector<std::int32_t>(f.codes.begin(), f.codes.end()));
      },
      py::arg("raw"), py::arg("check_sync") = true, "27-byte frame to (status, codes)");
  m.def(
      "encode_frame",
      [](const std::vector<std::int32_t>& codes, std::uint32_t status) {
        if (codes.size() != ads1299::kChannels) throw py::value_error("expected 8 codes");
        ads1299::DataFrame f;
        f.status = status;
        std::copy(codes.begin(), codes.end(), f.codes.begin());
        const auto b = ads1299::encode_frame(f);
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
      },
      py::arg("codes"), py::arg("status") = ads1299::kStatusSyncNibble << 20);
  m.def(
      "code_to_microvolts",
      [](std::int32_t code, int gain, double vref) { return ads1299::code_to_microvolts(code, {vref, gain}); },
      py::arg("code"), py::arg("gain") = 24, py::arg("vref") = ads1299::kDefaultVref);
  m.def(
      "microvolts_to_code",
      [](double uv, int gain, double vref) { return ads1299::microvolts_to_code(uv, {vref, gain}); },
      py::arg("uv"), py::arg("gain") = 24, py::arg("vref") = ads1299::kDefaultVref);

  py::class_<ads1299::RegisterFile>(m, "RegisterFile")
      .def(py::init<>())
      .def_static("power_on_reset", &ads1299::RegisterFile::power_on_reset)
      .def("read", &ads1299::RegisterFile::read)
      .def("write", &ads1299::RegisterFile::write)
      .def("gains", [](const ads1299::RegisterFile& rf) {
        const auto g = rf.gains();
        return std::vector<int>(g.begin(), g.end());
      })
      .def_property_readonly("sample_rate", &ads1299::RegisterFile::sample_rate)
      .def("to_bytes", [](const ads1299::RegisterFile& rf) {
        return py::bytes(reinterpret_cast<const char*>(rf.bytes().data()), rf.bytes().size());
      });

  // synthesis
  m.def(
      "scenario_json", [](const std::string& name, std::uint64_t seed) {
        return synth::scenario_to_json(synth::named_scenario(name, seed));
      },
      py::arg("name"), py::arg("seed") = 1);
  m.def(
      "render",
      [](const std::string& scenario, std::uint64_t seed) {
        const auto sc = scenario_arg(scenario, seed);
        synth::validate(sc);
        const auto r = synth::render(sc);
        py::list labels;
        for (const auto& c : sc.channels) labels.append(c.label);
        py::dict d;
        d["fs"] = r.fs;
        d["labels"] = labels;
        d["channels"] = channel_matrix(r.channels);
        d["truth"] = truth_dict(r.truth);
        return d;
      },
      py::arg("scenario"), py::arg("seed") = 1, "Named scenario or scenario JSON to uV (8, n)");

  // analysis
  py::class_<dsp::FilterCoefficients>(m, "Filter")
      .def(py::init([](const std::string& kind, double fs, double low_hz, double high_hz, int order) {
             return dsp::design_filter({filter_kind(kind), low_hz, high_hz, order, fs});
           }),
           py::arg("kind"), py::arg("fs"), py::arg("low_hz") = 0.0, py::arg("high_hz") = 0.0, py::arg("order") = 4)
      .def("gain_db", &dsp::FilterCoefficients::gain_db)
      .def("sos", [](const dsp::FilterCoefficients& f) {
        std::vector<std::array<double, 6>> rows;
        for (const auto& s : f.sections) rows.push_back({s.b0, s.b1, s.b2, 1.0, s.a1, s.a2});
        return rows;
      })
      .def("filter", [](const dsp::FilterCoefficients& f, const Array& x) { return to_array(dsp::filter(f, view(x))); })
      .def("filtfilt",
           [](const dsp::FilterCoefficients& f, const Array& x) { return to_array(dsp::filtfilt(f, view(x))); });

  m.def(
      "welch_psd",
      [](const Array& x, double fs, std::size_t window_len, double overlap) {
        const auto s = dsp::welch_psd(view(x), fs, window_len, overlap);
        return py::make_tuple(to_array(s.freqs), to_array(s.psd));
      },
      py::arg("x"), py::arg("fs"), py::arg("window_len") = 256, py::arg("overlap") = 0.5);
  m.def(
      "bandpower",
      [](const Array& x, double fs, double low_hz, double high_hz, std::size_t window_len, double overlap) {
        return dsp::bandpower(dsp::welch_psd(view(x), fs, window_len, overlap), low_hz, high_hz);
      },
      py::arg("x"), py::arg("fs"), py::arg("low_hz"), py::arg("high_hz"), py::arg("window_len") = 256,
      py::arg("overlap") = 0.5);
  m.def(
      "alpha_ratio",
      [](const Array& x, double fs, double step_s) {
        const auto n = static_cast<double>(x.size()) / fs;
        const auto protocol = dsp::alternating_protocol(n, step_s);
        const auto r = dsp::score_alpha_protocol(view(x), fs, protocol);
        return py::make_tuple(r.ratio, r.sequence_match);
      },
      py::arg("x"), py::arg("fs"), py::arg("step_s") = 5.0, "(closed/open ratio, sequence match)");
  m.def(
      "detect_blinks", [](const Array& x, double fs) { return dsp::detect_blinks(view(x), fs).times; }, py::arg("x"),
      py::arg("fs"));
  m.def(
      "detect_chews", [](const Array& x, double fs) { return dsp::detect_chews(view(x), fs).times; }, py::arg("x"),
      py::arg("fs"));
  m.def(
      "emg_onsets", [](const Array& x, double fs) { return dsp::emg_envelope_onsets(view(x), fs).times; },
      py::arg("x"), py::arg("fs"));
  m.def(
      "detect_r_peaks",
      [](const Array& x, double fs) {
        const auto hr = dsp::detect_r_peaks(view(x), fs);
        return py::make_tuple(hr.peaks.times, hr.mean_hr);
      },
      py::arg("x"), py::arg("fs"), "(peak times, mean bpm or None)");

  // sessions
  py::class_<session::Session>(m, "Session")
      .def_property_readonly("fs", [](const session::Session& s) { return s.header.fs; })
      .def_property_readonly("labels",
                             [](const session::Session& s) {
                               return std::vector<std::string>(s.header.channel_labels.begin(),
                                                               s.header.channel_labels.end());
                             })
      .def_property_readonly("backend", [](const session::Session& s) { return s.header.backend; })
      .def_property_readonly("complete", [](const session::Session& s) { return s.complete; })
      .def_property_readonly("sample_count", [](const session::Session& s) { return s.sample_count; })
      .def_property_readonly("duration", &session::Session::duration)
      .def_property_readonly("block_count", [](const session::Session& s) { return s.blocks.size(); })
      .def_property_readonly("epoch_count", [](const session::Session& s) { return s.epochs.size(); })
      .def_property_readonly("annotations",
                             [](const session::Session& s) {
                               py::list out;
                               for (const auto& a : s.annotations) out.append(py::make_tuple(a.time, a.text));
                               return out;
                             })
      .def("channel", [](const session::Session& s, std::size_t ch) {
        if (ch >= ads1299::kChannels) throw py::index_error("channel out of range");
        return to_array(s.channel(ch));
      })
      .def("data", [](const session::Session& s) {
        std::array<std::vector<double>, ads1299::kChannels> ch;
        for (std::size_t c = 0; c < ch.size(); ++c) ch[c] = s.channel(c);
        return channel_matrix(ch);
      });
  m.def("read_session", &session::read_session, py::arg("path"));
  m.def("recover_session", &session::recover_session, py::arg("path"));
  m.def("export_csv", &session::export_csv, py::arg("session"), py::arg("path"));

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "peeg");
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the peeg tool in-process; returns (exit code, stdout, stderr)");
}
