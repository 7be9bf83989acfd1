"""Python bindings for the PiEEG station core."""

from ._peeg import (
    CHANNELS,
    FRAME_BYTES,
    Error,
    Filter,
    RegisterFile,
    Session,
    alpha_ratio,
    bandpower,
    code_to_microvolts,
    decode_frame,
    detect_blinks,
    detect_chews,
    detect_r_peaks,
    emg_onsets,
    encode_frame,
    export_csv,
    microvolts_to_code,
    read_session,
    recover_session,
    render,
    run_cli,
    scenario_json,
    welch_psd,
)

__version__ = "0.1.0"
