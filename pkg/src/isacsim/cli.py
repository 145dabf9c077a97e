"""Command line front end.

Subcommands: ``linkbudget`` (analytic model from a parameter file),
``report`` (model report plus SINR-vs-range curves), ``simulate``
(scenario to truth CSV and raw-frame dump), ``process`` / ``detect``
(sensing chain over a raw-frame dump), ``replay`` (full end-to-end run
with metrics).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace as dc_replace
from pathlib import Path

from . import harness, io
from .detect import CfarConfig, annotate_sinr, cfar_detect, suppress_tdd_replicas
from .dsp import (eca_c_remove, estimate_channel, estimate_noise_floor,
                  exclusion_mask, crap_acquire, crap_remove, periodogram)
from .linkbudget import default_params
from .scene import mask_gap_period_symbols, synthesize_frame
from .units import SPEED_OF_LIGHT as C


def _load_params(args):
    if args.params is None:
        return default_params()
    return io.read_params_file(args.params)


def _add_cfar_args(sub):
    sub.add_argument("--pfa", type=float, default=1e-4,
                     help="CFAR false alarm probability (default 1e-4)")
    sub.add_argument("--train", default="8,8", metavar="R,D",
                     help="training cells per side, range,doppler")
    sub.add_argument("--guard", default="3,3", metavar="R,D",
                     help="guard cells per side, range,doppler")
    sub.add_argument("--cluster", default="12,8", metavar="R,D",
                     help="local-max cluster half-widths, range,doppler")
    sub.add_argument("--no-replica-suppression", action="store_true")
    sub.add_argument("--pad-range", type=int, default=2)
    sub.add_argument("--pad-doppler", type=int, default=1)
    sub.add_argument("--window", choices=["rect", "hann"], default="rect")


def _cfar_from_args(args) -> CfarConfig:
    tr, td = (int(v) for v in args.train.split(","))
    gr, gd = (int(v) for v in args.guard.split(","))
    cr, cd = (int(v) for v in args.cluster.split(","))
    return CfarConfig(pfa=args.pfa, train_range=tr, train_doppler=td,
                      guard_range=gr, guard_doppler=gd,
                      cluster_range=cr, cluster_doppler=cd)


def cmd_linkbudget(args) -> int:
    params = _load_params(args)
    report = harness.model_report(params)
    print(harness.render_model_report(report))
    if args.linear:
        print("linear values:")
        for key in ("r_star_m", "r_max_m", "r_cp_m", "r_limit_m"):
            print(f"  {key} = {report[key]!r}")
    if args.sweep_range:
        start, stop, step = (float(v) for v in args.sweep_range.split(":"))
        out = args.csv or "sinr_vs_range.csv"
        harness.write_sinr_curve_csv(params, out, start, stop, step)
        print(f"wrote {out}")
    return 0


def cmd_report(args) -> int:
    params = _load_params(args)
    report = harness.model_report(params)
    text = harness.render_model_report(report)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "model_report.txt").write_text(text + "\n")
        stop = report["r_limit_m"] - 1.0
        harness.write_sinr_curve_csv(params, out / "sinr_vs_range.csv",
                                     10.0, stop, 1.0)
        print(f"wrote {out}/model_report.txt and {out}/sinr_vs_range.csv")
    return 0


def _load_scenario(args):
    if args.config:
        scenario = io.read_scenario_file(args.config)
    elif getattr(args, "experiment", None) == 1:
        from .scene import make_experiment1_scenario
        scenario = make_experiment1_scenario()
    elif getattr(args, "experiment", None) == 2:
        from .scene import make_experiment2_scenario
        scenario = make_experiment2_scenario()
    else:
        raise SystemExit("need --config or --experiment {1,2}")
    if args.seed is not None:
        scenario.rng_seed = args.seed
    return scenario


def cmd_simulate(args) -> int:
    scenario = _load_scenario(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = args.frames if args.frames is not None else scenario.n_frames
    n = min(n, scenario.n_frames)
    io.write_truth_csv(scenario, out / "truth.csv", range(n))
    if args.dump:
        frames = (synthesize_frame(scenario, i)[:2] for i in range(n))
        io.write_frame_dump(out / args.dump, scenario, frames)
        print(f"wrote {n} frames to {out / args.dump}")
    print(f"wrote {out}/truth.csv ({n} frames)")
    return 0


def _process_dump(args, emit_periodograms: bool) -> int:
    header, frames = io.read_frame_dump(args.dump)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t_symbol = (1.0 + header["l_cp"]) / header["delta_f_hz"]
    period = mask_gap_period_symbols(header["dl_mask"])
    velocity_step = None
    if period is not None and period < header["symbols_per_frame"]:
        velocity_step = C / (2.0 * header["f_c_hz"] * period * t_symbol)
    cfg = _cfar_from_args(args)
    range_bin = C / (2.0 * header["n_subcarriers"] * header["delta_f_hz"])

    cmap = None
    start = 0
    if args.crap_acquire:
        acq = [estimate_channel(tx, rx) for tx, rx in frames[:args.crap_acquire]]
        cmap = crap_acquire(acq)
        start = args.crap_acquire

    keep = None
    if getattr(args, "periodogram_frames", None):
        keep = {int(v) for v in args.periodogram_frames.split(",")}

    rows = []
    for tx, rx in frames[start:]:
        ch = estimate_channel(tx, rx)
        if cmap is not None:
            ch = crap_remove(ch, cmap)
        elif args.clutter == "eca-c":
            ch = eca_c_remove(ch)
        per = periodogram(ch, header["delta_f_hz"], t_symbol, header["f_c_hz"],
                          pad_range=args.pad_range, pad_doppler=args.pad_doppler,
                          window=args.window)
        vh = 2.5
        vbands = [(-vh, vh)]
        if velocity_step:
            vbands += [(k * velocity_step - vh, k * velocity_step + vh)
                       for k in (-3, -2, -1, 1, 2, 3)]
        estimate_noise_floor(per, exclude=exclusion_mask(
            per, range_bands_m=[(0.0, 60.0)], velocity_bands_mps=vbands))
        dets = cfar_detect(per, cfg)
        dets = annotate_sinr(dets, per)
        if not args.no_replica_suppression:
            dets = suppress_tdd_replicas(dets, velocity_step, range_tol_m=range_bin)
        t = (tx.frame_index + 0.5) * header["frame_duration_s"]
        rows += [(tx.frame_index, t, d) for d in dets]
        if emit_periodograms and (keep is None or tx.frame_index in keep):
            io.write_periodogram_csv(per, out / f"periodogram_{tx.frame_index:06d}.csv",
                                     top_db=args.top_db)
    io.write_detections_csv(rows, out / "detections.csv")
    print(f"wrote {out}/detections.csv ({len(rows)} detections)")
    return 0


def cmd_process(args) -> int:
    return _process_dump(args, emit_periodograms=True)


def cmd_detect(args) -> int:
    return _process_dump(args, emit_periodograms=False)


def cmd_replay(args) -> int:
    scenario = _load_scenario(args)
    if args.clutter == "crap":
        config = harness.ChainConfig.close_range()
    else:
        config = harness.ChainConfig.long_range()
        config.clutter_removal = args.clutter
    if args.pfa is not None:
        config.cfar = dc_replace(config.cfar, pfa=args.pfa)
    metrics = harness.replay(scenario, config, out_dir=args.out,
                             progress=args.progress)
    print(f"frames               : {metrics.n_frames}")
    print(f"detection rate       : {metrics.detection_rate:.3f}")
    print(f"matched detections   : {metrics.n_matched}")
    print(f"range bias           : {metrics.bias_m:.3f} m")
    print(f"range error q50/q95  : {metrics.range_error_q50_m:.3f} / "
          f"{metrics.range_error_q95_m:.3f} m")
    print(f"valid tracks         : {metrics.n_valid_tracks} "
          f"({metrics.false_track_count} false)")
    print(f"per-frame time       : {metrics.frame_seconds_mean * 1e3:.0f} ms mean, "
          f"{metrics.frame_seconds_max * 1e3:.0f} ms max")
    if args.check:
        ok = (metrics.range_error_q50_m <= args.check_q50
              and metrics.range_error_q95_m <= args.check_q95
              and metrics.n_matched > 0)
        if not ok:
            print(f"CHECK FAILED: q50 {metrics.range_error_q50_m:.3f} "
                  f"(limit {args.check_q50}), q95 {metrics.range_error_q95_m:.3f} "
                  f"(limit {args.check_q95})", file=sys.stderr)
            return 1
        print("CHECK PASSED")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="isacsim",
        description="Mono-static OFDM sensing simulator and analysis toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    lb = sub.add_parser("linkbudget", help="analytic link budget model")
    lb.add_argument("--params", help="parameter file (default: built-in FR2 set)")
    lb.add_argument("--linear", action="store_true", help="also print linear values")
    lb.add_argument("--sweep-range", metavar="START:STOP:STEP",
                    help="emit SINR-vs-range CSV over this range sweep")
    lb.add_argument("--csv", help="output CSV path for --sweep-range")
    lb.set_defaults(func=cmd_linkbudget)

    rp = sub.add_parser("report", help="model report and SINR curves")
    rp.add_argument("--params")
    rp.add_argument("--out", help="directory for report + curve CSV")
    rp.set_defaults(func=cmd_report)

    sim = sub.add_parser("simulate", help="synthesize frames and ground truth")
    sim.add_argument("--config", help="scenario file")
    sim.add_argument("--experiment", type=int, choices=[1, 2])
    sim.add_argument("--seed", type=int)
    sim.add_argument("--frames", type=int, help="limit the number of frames")
    sim.add_argument("--out", required=True)
    sim.add_argument("--dump", metavar="FILE.bin",
                     help="also write a raw-frame dump with this name")
    sim.set_defaults(func=cmd_simulate)

    for name, fn, extra in (("process", cmd_process, True),
                            ("detect", cmd_detect, False)):
        pr = sub.add_parser(name, help=f"{name} a raw-frame dump")
        pr.add_argument("--dump", required=True, help="raw-frame dump file")
        pr.add_argument("--out", required=True)
        pr.add_argument("--clutter", choices=["eca-c", "none"], default="eca-c")
        pr.add_argument("--crap-acquire", type=int, metavar="K",
                        help="use the first K frames as clutter acquisition")
        _add_cfar_args(pr)
        if extra:
            pr.add_argument("--periodogram-frames", metavar="I,J,...",
                            help="frame indices to dump as periodogram CSV (default all)")
            pr.add_argument("--top-db", type=float, default=60.0,
                            help="only dump cells within this many dB of the peak")
        pr.set_defaults(func=fn)

    rep = sub.add_parser("replay", help="full end-to-end scenario replay")
    rep.add_argument("--config", help="scenario file")
    rep.add_argument("--experiment", type=int, choices=[1, 2])
    rep.add_argument("--seed", type=int)
    rep.add_argument("--clutter", choices=["eca-c", "crap", "none"], default="eca-c")
    rep.add_argument("--pfa", type=float)
    rep.add_argument("--out", help="directory for CSV artifacts")
    rep.add_argument("--progress", action="store_true")
    rep.add_argument("--check", action="store_true",
                     help="exit nonzero unless accuracy thresholds hold")
    rep.add_argument("--check-q50", type=float, default=0.30)
    rep.add_argument("--check-q95", type=float, default=0.90)
    rep.set_defaults(func=cmd_replay)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
