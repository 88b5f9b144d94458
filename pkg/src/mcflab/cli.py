"""Command-line interface: scenario generation, experiment runs, neck/track/
tube analysis over saved histories, sequence-inequality tools, and reports.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .errors import McflabError, TrackLost
from .experiment import (
    ExperimentConfig,
    run_experiment,
    load_bundle,
    report,
    plot_series,
)
from .flow import load_history
from .loj import (
    LojSequence,
    check_hypotheses,
    sqrt_increment_sum,
    empirical_delta,
    measure_LS_inequality,
)
from .mesh import save_off
from .necks import detect_necks, track_strong_neck, measure_tilt, EPS_WINDOW
from .scenarios import Scenario, generate
from .tubes import assemble_tubes


def _load_config(path):
    with open(path) as fh:
        return json.load(fh)


def _scenario_from_config(cfg, seed=None):
    sc = cfg.get("scenario", cfg)
    scenario = Scenario(
        name=sc.get("name", sc.get("generator", "scenario")),
        generator=sc["generator"],
        params=sc.get("params", {}),
        seed=sc.get("seed", 0),
    )
    if seed is not None:
        scenario.seed = seed
    return scenario


def read_sequence_csv(path):
    """Sequence CSV with columns (index, value), sorted by index."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows and not rows[0][0].strip().lstrip("-").isdigit():
        rows = rows[1:]  # header
    rows.sort(key=lambda r: int(r[0]))
    return np.array([float(r[1]) for r in rows])


def write_sequence_csv(values, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "value"])
        for i, v in enumerate(values):
            writer.writerow([i, repr(float(v))])


# -- subcommands ------------------------------------------------------------


def cmd_gen(args):
    cfg = _load_config(args.config)
    scenario = _scenario_from_config(cfg, args.seed)
    mesh, meta = generate(scenario)
    os.makedirs(args.out, exist_ok=True)
    save_off(mesh, os.path.join(args.out, f"{scenario.name}.off"))
    with open(os.path.join(args.out, f"{scenario.name}_meta.json"), "w") as fh:
        json.dump(meta, fh, indent=1, default=float)
    print(f"{scenario.name}: {mesh.n_vertices} vertices, {len(mesh.faces)} faces -> {args.out}")
    return 0


def cmd_run(args):
    cfg = _load_config(args.config)
    config = ExperimentConfig.from_dict(cfg)
    if args.seed is not None:
        config.scenario.seed = args.seed
    if args.out is not None:
        config.outdir = args.out
    bundle = run_experiment(config)
    if args.plots and bundle.series:
        plot_series(bundle.series, os.path.join(config.outdir, "plots"))
    text, _, code = report(bundle)
    print(text)
    return code


def _detection_args(args):
    return {"eps_threshold": args.eps_threshold, "window": args.window}


def cmd_necks(args):
    history = load_history(args.history)
    snapshots = range(len(history)) if args.all else [len(history) - 1]
    os.makedirs(args.out, exist_ok=True)
    for k in snapshots:
        st = history[k]
        necks = detect_necks(st.mesh, st.curv, **_detection_args(args))
        path = os.path.join(args.out, f"necks_{k:04d}.json")
        with open(path, "w") as fh:
            json.dump([n.to_dict() for n in necks], fh, indent=1)
        print(f"snapshot {k} (t={st.time:.5g}): {len(necks)} necks -> {path}")
    return 0


def cmd_track(args):
    history = load_history(args.history)
    final = history[len(history) - 1]
    necks = detect_necks(final.mesh, final.curv, **_detection_args(args))
    results = []
    for neck in necks:
        try:
            track = track_strong_neck(history, neck, args.eps1, args.lookback, tol_r=args.tol_r)
        except (TrackLost, McflabError) as exc:
            results.append({"neck": neck.to_dict(), "error": str(exc)})
            continue
        entry = {"track": track.to_dict()}
        if len(track.samples) >= 2:
            total, profile = measure_tilt(track)
            entry["tilt"] = {"total_deg": total, "profile_deg": profile}
        results.append(entry)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "tracks.json")
    with open(path, "w") as fh:
        json.dump(results, fh, indent=1)
    print(f"{len(necks)} necks, {sum(1 for r in results if 'track' in r)} tracked -> {path}")
    return 0


def cmd_tubes(args):
    history = load_history(args.history)
    st = history[args.snapshot if args.snapshot >= 0 else len(history) + args.snapshot]
    necks = detect_necks(st.mesh, st.curv, **_detection_args(args))
    tubes = assemble_tubes(st.mesh, necks, window=args.window)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "tubes.json")
    with open(path, "w") as fh:
        json.dump([t.to_dict() for t in tubes], fh, indent=1)
    print(f"{len(necks)} necks -> {len(tubes)} tubes -> {path}")
    return 0


def cmd_loj(args):
    if args.loj_cmd == "check":
        values = read_sequence_csv(args.sequence)
        flags = check_hypotheses(LojSequence(values, K=args.K, mu=args.mu, delta=args.delta))
        out = {
            "non_increasing": flags.non_increasing,
            "recurrence": flags.recurrence,
            "bounded": flags.bounded,
            "all_hold": flags.all_hold,
            "tightest_K": flags.tightest_K,
        }
        print(json.dumps(out, indent=1))
        return 0 if flags.all_hold else 1
    if args.loj_cmd == "sum":
        values = read_sequence_csv(args.sequence)
        s = sqrt_increment_sum(LojSequence(values, K=args.K, mu=args.mu, delta=max(np.abs(values).max(), 1e-300)))
        print(repr(s))
        return 0
    if args.loj_cmd == "delta":
        delta_hat, manifest = empirical_delta(
            args.K, args.mu, args.eps,
            families=tuple(args.families.split(",")),
            n_sequences=args.n_sequences, T=args.T, seed=args.seed or 0,
        )
        print(json.dumps({"delta_hat": delta_hat, "manifest": manifest}, indent=1))
        return 0
    if args.loj_cmd == "ls-measure":
        history = load_history(args.history)
        records, minimal_K = measure_LS_inequality(
            history, mu=args.mu, gate_eps=args.gate_eps, gate_window=args.gate_window
        )
        print(json.dumps({"minimal_K": minimal_K, "records": records}, indent=1))
        return 0
    raise SystemExit(f"unknown loj subcommand {args.loj_cmd!r}")


def cmd_report(args):
    bundle = load_bundle(args.bundle)
    text, _, code = report(bundle)
    print(text)
    return code


# -- parser -----------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="mcflab", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="generate a scenario mesh")
    g.add_argument("--config", required=True, help="JSON with a scenario block")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", default=".")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run a full experiment")
    r.add_argument("--config", required=True, help="JSON ExperimentConfig")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", default=None)
    r.add_argument("--plots", action="store_true", help="write SVG series plots")
    r.set_defaults(func=cmd_run)

    def detection(sp):
        sp.add_argument("history", help="history directory (index.csv + OFF files)")
        sp.add_argument("--eps-threshold", type=float, default=0.25, dest="eps_threshold")
        sp.add_argument("--window", type=float, default=EPS_WINDOW)
        sp.add_argument("--out", default=".")

    n = sub.add_parser("necks", help="detect necks on history snapshots")
    detection(n)
    n.add_argument("--all", action="store_true", help="every snapshot, not just the last")
    n.set_defaults(func=cmd_necks)

    t = sub.add_parser("track", help="track final-snapshot necks backward")
    detection(t)
    t.add_argument("--eps1", type=float, default=0.35)
    t.add_argument("--lookback", type=float, default=0.05)
    t.add_argument("--tol-r", type=float, default=0.1, dest="tol_r")
    t.set_defaults(func=cmd_track)

    tu = sub.add_parser("tubes", help="assemble necks into tubes")
    detection(tu)
    tu.add_argument("--snapshot", type=int, default=-1)
    tu.set_defaults(func=cmd_tubes)

    lj = sub.add_parser("loj", help="sequence-inequality tools")
    ljsub = lj.add_subparsers(dest="loj_cmd", required=True)
    c = ljsub.add_parser("check", help="hypothesis flags for a sequence CSV")
    c.add_argument("sequence", help="CSV (index, value)")
    c.add_argument("--K", type=float, required=True)
    c.add_argument("--mu", type=float, required=True)
    c.add_argument("--delta", type=float, required=True)
    s = ljsub.add_parser("sum", help="square-root increment sum of a sequence CSV")
    s.add_argument("sequence")
    s.add_argument("--K", type=float, default=1.0)
    s.add_argument("--mu", type=float, default=0.5)
    d = ljsub.add_parser("delta", help="empirical smallness threshold")
    d.add_argument("--K", type=float, required=True)
    d.add_argument("--mu", type=float, required=True)
    d.add_argument("--eps", type=float, required=True)
    d.add_argument("--families", default="power,geometric")
    d.add_argument("--n-sequences", type=int, default=200, dest="n_sequences")
    d.add_argument("--T", type=int, default=200)
    d.add_argument("--seed", type=int, default=0)
    m = ljsub.add_parser("ls-measure", help="inequality measurement on a rescaled history")
    m.add_argument("history")
    m.add_argument("--mu", type=float, default=0.5)
    m.add_argument("--gate-eps", type=float, default=0.3, dest="gate_eps")
    m.add_argument("--gate-window", type=float, default=0.3, dest="gate_window")
    lj.set_defaults(func=cmd_loj)

    rep = sub.add_parser("report", help="verdict table for a bundle directory")
    rep.add_argument("bundle")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except McflabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
