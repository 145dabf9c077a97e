"""File formats: parameter and scenario text files, CSV artifacts and
the raw-frame binary dump.

Text files are simple ``key = value`` lines with ``#`` comments;
scenario files additionally use repeatable ``[section]`` headers.  All
CSV output is written with fixed formatting so equal inputs produce
byte-identical files.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .detect import Detection
from .linkbudget import LinkBudgetParams
from .scene import Beam, ClutterObject, RadioFrame, Scenario, Target
from .track import Track

PARAM_KEYS_DB = [
    "f_c_hz", "delta_f_hz", "l_cp", "t_rx_s", "n_subcarriers", "m_symbols",
    "p_tx_dbm", "oip3_tx_dbm", "iip3_rx_dbm", "n_tx", "n_rx",
    "g_tx_db", "g_rx_db", "isolation_db", "c_total_db",
    "noise_psd_dbm_hz", "noise_figure_db", "rcs_dbsm", "gamma_min_db",
]


def _parse_value(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_sections(path) -> list:
    """Parse a sectioned key-value file into (section_name, dict) pairs.

    Lines before the first ``[section]`` belong to an implicit '' section;
    duplicate section names are kept in order (unlike configparser).
    """
    sections = [("", {})]
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            sections.append((line[1:-1].strip().lower(), {}))
            continue
        if "=" not in line:
            raise ValueError(f"cannot parse line {raw!r} in {path}")
        key, value = line.split("=", 1)
        sections[-1][1][key.strip().lower()] = _parse_value(value)
    return [(name, kv) for name, kv in sections if kv or name]


def read_params_file(path) -> LinkBudgetParams:
    """Load link budget parameters from a flat key-value file (dB units)."""
    sections = parse_sections(path)
    merged = {}
    for name, kv in sections:
        if name in ("", "params"):
            merged.update(kv)
    missing = [k for k in PARAM_KEYS_DB if k not in merged]
    if missing:
        raise ValueError(f"parameter file {path} is missing keys: {missing}")
    return LinkBudgetParams.from_db(**{k: merged[k] for k in PARAM_KEYS_DB})


def write_params_file(params: LinkBudgetParams, path) -> None:
    d = params.as_db_dict()
    lines = ["# link budget parameters (dB/dBm units)"]
    lines += [f"{k} = {d[k]!r}" for k in PARAM_KEYS_DB]
    Path(path).write_text("\n".join(lines) + "\n")


def _format_waypoints(waypoints: np.ndarray) -> str:
    return "; ".join(f"{float(t)!r}:{float(x)!r}:{float(y)!r}"
                     for t, x, y in waypoints)


def _parse_waypoints(text: str) -> np.ndarray:
    rows = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        t, x, y = (float(v) for v in chunk.split(":"))
        rows.append((t, x, y))
    return np.array(rows)


def write_scenario_file(scenario: Scenario, path) -> None:
    """Serialize a scenario (and its parameters) to a sectioned text file."""
    p = scenario.params.as_db_dict()
    lines = ["[scenario]"]
    lines.append(f"duration_s = {scenario.duration_s!r}")
    lines.append(f"rng_seed = {scenario.rng_seed}")
    lines.append(f"frame_duration_s = {scenario.frame_duration_s!r}")
    lines.append(f"symbols_per_frame = {scenario.symbols_per_frame}")
    lines.append(f"include_noise = {str(scenario.include_noise).lower()}")
    lines.append(f"include_leakage = {str(scenario.include_leakage).lower()}")
    lines.append("")
    lines.append("[params]")
    lines += [f"{k} = {p[k]!r}" for k in PARAM_KEYS_DB]
    for tgt in scenario.targets:
        lines.append("")
        lines.append("[target]")
        lines.append(f"id = {tgt.target_id}")
        lines.append(f"rcs_dbsm = {float(10.0 * np.log10(tgt.rcs_mean_m2))!r}")
        lines.append(f"rcs_model = {tgt.rcs_model}")
        lines.append(f"waypoints = {_format_waypoints(tgt.waypoints)}")
    for clu in scenario.clutter:
        lines.append("")
        lines.append("[clutter]")
        lines.append(f"range_m = {float(clu.range_m)!r}")
        lines.append(f"coupling_loss_db = {float(10.0 * np.log10(clu.coupling_loss))!r}")
        lines.append(f"doppler_hz = {float(clu.doppler_hz)!r}")
        lines.append(f"phase_jitter_std = {float(clu.phase_jitter_std)!r}")
    for beam in scenario.beams:
        lines.append("")
        lines.append("[beam]")
        lines.append(f"boresight_az_deg = {float(beam.boresight_az_deg)!r}")
        lines.append(f"dwell_s = {float(beam.dwell_s)!r}")
        lines.append(f"hpbw_az_deg = {float(beam.hpbw_az_deg)!r}")
        lines.append(f"hpbw_el_deg = {float(beam.hpbw_el_deg)!r}")
        lines.append(f"gain_boresight_db = {float(10.0 * np.log10(beam.gain_boresight))!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_scenario_file(path) -> Scenario:
    sections = parse_sections(path)
    scen_kv, params_kv = {}, {}
    targets, clutter, beams = [], [], []
    for name, kv in sections:
        if name == "scenario":
            scen_kv.update(kv)
        elif name in ("", "params"):
            params_kv.update(kv)
        elif name == "target":
            targets.append(Target(
                target_id=str(kv.get("id", f"target{len(targets)}")),
                waypoints=_parse_waypoints(kv["waypoints"]),
                rcs_mean_m2=10.0 ** (float(kv["rcs_dbsm"]) / 10.0),
                rcs_model=kv.get("rcs_model", "constant"),
            ))
        elif name == "clutter":
            clutter.append(ClutterObject(
                range_m=float(kv["range_m"]),
                coupling_loss=10.0 ** (float(kv["coupling_loss_db"]) / 10.0),
                doppler_hz=float(kv.get("doppler_hz", 0.0)),
                phase_jitter_std=float(kv.get("phase_jitter_std", 0.0)),
            ))
        elif name == "beam":
            beams.append(Beam(
                boresight_az_deg=float(kv["boresight_az_deg"]),
                dwell_s=float(kv.get("dwell_s", 0.05)),
                hpbw_az_deg=float(kv.get("hpbw_az_deg", 14.0)),
                hpbw_el_deg=float(kv.get("hpbw_el_deg", 6.4)),
                gain_boresight=10.0 ** (float(kv.get("gain_boresight_db", 0.0)) / 10.0),
            ))
        else:
            raise ValueError(f"unknown section [{name}] in {path}")
    missing = [k for k in PARAM_KEYS_DB if k not in params_kv]
    if missing:
        raise ValueError(f"scenario file {path} is missing parameter keys: {missing}")
    params = LinkBudgetParams.from_db(**{k: params_kv[k] for k in PARAM_KEYS_DB})
    return Scenario(
        params=params, targets=targets, clutter=clutter, beams=beams,
        duration_s=float(scen_kv.get("duration_s", 1.0)),
        rng_seed=int(scen_kv.get("rng_seed", 0)),
        frame_duration_s=float(scen_kv.get("frame_duration_s", 0.01)),
        symbols_per_frame=int(scen_kv.get("symbols_per_frame", 1120)),
        include_noise=bool(scen_kv.get("include_noise", True)),
        include_leakage=bool(scen_kv.get("include_leakage", True)),
    )


# ---------------------------------------------------------------------------
# CSV artifacts

def write_truth_csv(scenario: Scenario, path, frame_indices=None) -> None:
    rows = ["frame_index,time_s,target_id,range_m,radial_velocity_mps,az_offset_deg"]
    if frame_indices is None:
        frame_indices = range(scenario.n_frames)
    for i in frame_indices:
        t = (i + 0.5) * scenario.frame_duration_s
        for rec in scenario.truth_at(i):
            rows.append(f"{i},{t:.6f},{rec.target_id},{rec.range_m:.6f},"
                        f"{rec.radial_velocity_mps:.6f},{rec.az_offset_deg:.6f}")
    Path(path).write_text("\n".join(rows) + "\n")


def detection_flags(det: Detection) -> str:
    flags = []
    if det.replica_suppressed:
        flags.append("replica")
    if det.clutter_band:
        flags.append("clutter_band")
    return "|".join(flags) if flags else "-"


def write_detections_csv(rows, path) -> None:
    """``rows`` is an iterable of (frame_index, time_s, Detection)."""
    out = ["frame_index,time_s,range_m,velocity_mps,sinr_db,flags"]
    for frame_index, time_s, det in rows:
        sinr = "nan" if det.sinr_db is None else f"{det.sinr_db:.3f}"
        out.append(f"{frame_index},{time_s:.6f},{det.range_m:.6f},"
                   f"{det.velocity_mps:.6f},{sinr},{detection_flags(det)}")
    Path(path).write_text("\n".join(out) + "\n")


def write_tracks_csv(tracks, path) -> None:
    out = ["track_id,state,frame_index,range_m,velocity_mps,sinr_db"]
    for trk in tracks:
        for pt in trk.history:
            sinr = "nan" if pt.sinr_db is None else f"{pt.sinr_db:.3f}"
            out.append(f"{trk.track_id},{trk.state},{pt.frame_index},"
                       f"{pt.range_m:.6f},{pt.velocity_mps:.6f},{sinr}")
    Path(path).write_text("\n".join(out) + "\n")


def write_track_summary_csv(tracks, path) -> None:
    out = ["track_id,state,created_frame,validated_frame,retired_frame,"
           "n_points,validation_latency_frames,lifetime_frames,replica"]
    for trk in tracks:
        validated = "" if trk.validated_frame is None else trk.validated_frame
        retired = "" if trk.retired_frame is None else trk.retired_frame
        latency = ("" if trk.validated_frame is None
                   else trk.validated_frame - trk.created_frame + 1)
        last = trk.history[-1].frame_index if trk.history else trk.created_frame
        out.append(f"{trk.track_id},{trk.state},{trk.created_frame},{validated},"
                   f"{retired},{len(trk.history)},{latency},"
                   f"{last - trk.created_frame + 1},{int(trk.replica)}")
    Path(path).write_text("\n".join(out) + "\n")


def write_periodogram_csv(p, path, top_db: float | None = None) -> None:
    """Dump periodogram bins as CSV; optionally only cells within
    ``top_db`` of the frame maximum to keep full-size frames manageable."""
    power = p.power
    out = ["range_bin,doppler_bin,range_m,velocity_mps,power_db"]
    with np.errstate(divide="ignore"):
        pdb = 10.0 * np.log10(power)
    if top_db is not None:
        keep = pdb >= pdb.max() - top_db
    else:
        keep = np.ones_like(pdb, dtype=bool)
    for i, j in zip(*np.nonzero(keep)):
        out.append(f"{i},{j},{p.range_at(i):.6f},"
                   f"{p.velocity_at(j):.6f},{pdb[i, j]:.4f}")
    Path(path).write_text("\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# Raw frame dump (little-endian binary)
#
# Layout:
#   magic    8 bytes  b"ISACFRDM"
#   version  <u4      currently 1
#   n_subcarriers, symbols_per_frame, n_frames   <u4 each
#   delta_f_hz, f_c_hz, l_cp, frame_duration_s   <f8 each
#   dl_mask  symbols_per_frame x <u1
# then per frame:
#   frame_index <i8, timestamp <f8
#   tx grid: n_subcarriers*symbols_per_frame cells, row-major
#            (subcarrier major), interleaved float32 I,Q
#   rx grid: same layout

DUMP_MAGIC = b"ISACFRDM"
DUMP_VERSION = 1
_HEADER = struct.Struct("<8sIIII dddd")


def write_frame_dump(path, scenario: Scenario, frames) -> int:
    """Write (tx, rx) RadioFrame pairs; returns the number of frames."""
    frames = list(frames)
    p = scenario.params
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(
            DUMP_MAGIC, DUMP_VERSION, p.n_subcarriers,
            scenario.symbols_per_frame, len(frames),
            p.delta_f_hz, p.f_c_hz, p.l_cp, scenario.frame_duration_s))
        fh.write(scenario.dl_mask.astype("<u1").tobytes())
        for tx, rx in frames:
            fh.write(struct.pack("<qd", tx.frame_index, tx.timestamp))
            for frame in (tx, rx):
                iq = np.empty(frame.grid.shape + (2,), dtype="<f4")
                iq[..., 0] = frame.grid.real
                iq[..., 1] = frame.grid.imag
                fh.write(iq.tobytes())
    return len(frames)


def read_frame_dump(path):
    """Read a frame dump; returns (header dict, list of (tx, rx) frames)."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        (magic, version, n_sc, n_sym, n_frames,
         delta_f, f_c, l_cp, frame_dur) = _HEADER.unpack(head)
        if magic != DUMP_MAGIC:
            raise ValueError(f"{path} is not a frame dump (bad magic)")
        if version != DUMP_VERSION:
            raise ValueError(f"unsupported frame dump version {version}")
        dl_mask = np.frombuffer(fh.read(n_sym), dtype="<u1").astype(bool)
        header = {
            "n_subcarriers": n_sc, "symbols_per_frame": n_sym,
            "n_frames": n_frames, "delta_f_hz": delta_f, "f_c_hz": f_c,
            "l_cp": l_cp, "frame_duration_s": frame_dur, "dl_mask": dl_mask,
        }
        frames = []
        cells = n_sc * n_sym * 2
        for _ in range(n_frames):
            frame_index, timestamp = struct.unpack("<qd", fh.read(16))
            grids = []
            for _ in range(2):
                iq = np.frombuffer(fh.read(cells * 4), dtype="<f4")
                iq = iq.reshape(n_sc, n_sym, 2)
                grids.append((iq[..., 0] + 1j * iq[..., 1]).astype(np.complex64))
            tx = RadioFrame(grid=grids[0], dl_mask=dl_mask,
                            frame_index=frame_index, timestamp=timestamp)
            rx = RadioFrame(grid=grids[1], dl_mask=dl_mask,
                            frame_index=frame_index, timestamp=timestamp)
            frames.append((tx, rx))
    return header, frames
