import json

import numpy as np
import pytest

import peeg


def test_frame_round_trip():
    codes = [0, 1, -1, 8388607, -8388608, 123456, -654321, 42]
    raw = peeg.encode_frame(codes)
    assert len(raw) == peeg.FRAME_BYTES == 27
    status, back = peeg.decode_frame(raw)
    assert back == codes
    assert status >> 20 == 0xC


def test_bad_frame_raises_with_code():
    with pytest.raises(peeg.Error) as exc:
        peeg.decode_frame(b"\x00" * 26)
    assert exc.value.code == "WrongLength"
    with pytest.raises(peeg.Error) as exc:
        peeg.decode_frame(b"\x00" * 27)
    assert exc.value.code == "BadSyncNibble"


def test_conversion():
    assert peeg.code_to_microvolts(8388607, gain=24) == pytest.approx(4.5 / 24 * 1e6)
    assert peeg.microvolts_to_code(peeg.code_to_microvolts(1000)) == 1000


def test_register_file():
    rf = peeg.RegisterFile()
    assert rf.sample_rate == 250
    assert rf.gains() == [24] * 8
    rf.write(0x05, 0x50)
    assert rf.gains()[0] == 12
    with pytest.raises(peeg.Error) as exc:
        rf.write(0x00, 0x3E)
    assert exc.value.code == "ReadOnlyRegister"


def test_render_and_alpha():
    r = peeg.render("fig6", seed=3)
    assert r["fs"] == 250
    assert r["channels"].shape == (8, 7500)
    assert r["labels"][0] == "Fz"
    ratio, match = peeg.alpha_ratio(r["channels"][0], 250)
    assert ratio >= 2.0
    assert match == 1.0


def test_scenario_json_round_trip():
    text = peeg.scenario_json("fig7", seed=5)
    assert json.loads(text)["scenario_version"] == 1
    a = peeg.render(text)["channels"]
    b = peeg.render("fig7", seed=5)["channels"]
    assert np.array_equal(a, b)


def test_filter_matches_scipy():
    signal = pytest.importorskip("scipy.signal")
    f = peeg.Filter("bandpass", 250, 1.0, 40.0, order=4)
    ref = signal.butter(2, [1.0, 40.0], btype="bandpass", fs=250, output="sos")
    x = np.random.default_rng(1).standard_normal(1000)
    ours = f.filtfilt(x)
    theirs = signal.sosfiltfilt(ref, x, padlen=3 * (2 * len(ref) + 1))
    assert np.max(np.abs(ours - theirs)) < 1e-9
    assert f.gain_db(1.0) == pytest.approx(-3.0103, abs=1e-3)


def test_welch_matches_scipy():
    signal = pytest.importorskip("scipy.signal")
    x = np.random.default_rng(2).standard_normal(2048)
    freqs, psd = peeg.welch_psd(x, 250)
    rf, rp = signal.welch(x, fs=250, window="hann", nperseg=256, noverlap=128, detrend=False)
    assert np.allclose(freqs, rf)
    assert np.allclose(psd, rp, rtol=1e-9, atol=0)


def test_detectors():
    fig7 = peeg.render("fig7")
    x = fig7["channels"][0]
    assert len(peeg.detect_blinks(x, 250)) == 9
    assert len(peeg.detect_chews(x, 250)) == 10
    ecg = peeg.render("ecg")
    ch = ecg["labels"].index("ECG")
    peaks, bpm = peeg.detect_r_peaks(ecg["channels"][ch], 250)
    assert bpm == pytest.approx(60.0, abs=1.0)
    assert len(peaks) >= 28


def test_simulate_and_read(tmp_path):
    path = tmp_path / "fig6.peeg"
    code, _, err = peeg.run_cli(["simulate", "--scenario", "fig6", "--seed", "2", "--out", str(path)])
    assert code == 0, err
    s = peeg.read_session(path)
    assert s.complete
    assert s.fs == 250
    assert s.sample_count == 7500
    assert s.data().shape == (8, 7500)
    rendered = peeg.render("fig6", seed=2)["channels"]
    lsb = peeg.code_to_microvolts(1)
    assert np.max(np.abs(s.data() - rendered)) <= lsb
    assert [t for t, _ in s.annotations][:2] == [0.0, 5.0]


def test_corrupt_session(tmp_path):
    path = tmp_path / "junk.peeg"
    path.write_bytes(b"not a session")
    with pytest.raises(peeg.Error) as exc:
        peeg.read_session(path)
    assert exc.value.code in ("BadMagic", "Truncated")


def test_cli_usage_error():
    code, _, _ = peeg.run_cli(["--bogus-flag"])
    assert code == 2
