"""Experiment orchestration: run a scenario through the flow, collect every
diagnostic, and emit a reproducible bundle (OFF history + CSV series + JSON
reports + manifest).  ``report`` turns a bundle into a verdict table.
"""

from __future__ import annotations

import json
import os
import platform
from dataclasses import dataclass, field, asdict

import numpy as np

from . import __version__
from .errors import InsufficientSupport, DegenerateFit, McflabError, TooShort, TrackLost
from .flow import StepControl, run_flow, save_history, load_history
from .functionals import (
    functional_series,
    write_series_csv,
    read_series_csv,
    SERIES_FIELDS,
)
from .necks import detect_necks, track_strong_neck, measure_tilt, EPS_WINDOW
from .scenarios import Scenario, generate
from .tubes import assemble_tubes


@dataclass
class ExperimentConfig:
    scenario: Scenario
    ctrl: StepControl = field(default_factory=StepControl)
    snapshot_every: float = 0.01
    t_max: float = float("inf")
    # diagnostic toggles and thresholds
    neck_eps_threshold: float = 0.25
    neck_window: float = EPS_WINDOW
    track_eps1: float = 0.35
    track_lookback: float = 0.05
    track_tol_r: float = 0.1
    entropy_n_center: int = 5
    entropy_n_scale: int = 15
    diam_method: str = "landmark"
    with_regularity: bool = True
    with_necks: bool = True
    with_tracks: bool = True
    outdir: str = "experiment_out"

    def __post_init__(self):
        if self.snapshot_every <= 0:
            raise ValueError("snapshot cadence must be positive")
        if self.track_lookback <= 0:
            raise ValueError("track lookback must be positive")

    def to_dict(self):
        d = asdict(self)
        d["ctrl"] = {
            k: (v if np.isfinite(v) else "inf") for k, v in asdict(self.ctrl).items()
        }
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        sc = d.pop("scenario")
        if isinstance(sc, dict):
            sc = Scenario(**sc)
        ctrl = d.pop("ctrl", None)
        if isinstance(ctrl, dict):
            ctrl = {k: (np.inf if v == "inf" else v) for k, v in ctrl.items()}
            ctrl = StepControl(**ctrl)
        kwargs = {"scenario": sc}
        if ctrl is not None:
            kwargs["ctrl"] = ctrl
        kwargs.update(d)
        return cls(**kwargs)


@dataclass
class ExperimentBundle:
    outdir: str
    config: ExperimentConfig
    history: object              # FlowHistory
    series: list                 # FunctionalSample list
    necks: list                  # NeckFit list (final snapshot)
    tracks: list                 # StrongNeckTrack list
    tilts: list                  # (total_deg, profile) per successful track
    tubes: list                  # Tube list
    manifest: dict
    partial: bool = False        # some diagnostics failed; see manifest["errors"]


def _manifest_thresholds(config):
    """Every numeric threshold any stage consumes, by name."""
    c = config
    return {
        "cfl": c.ctrl.cfl,
        "dt_max": c.ctrl.dt_max,
        "mesh_cfl": c.ctrl.mesh_cfl,
        "stop_maxA": c.ctrl.stop_maxA,
        "stop_quality": c.ctrl.stop_quality,
        "snapshot_every": c.snapshot_every,
        "t_max": c.t_max,
        "neck_eps_threshold": c.neck_eps_threshold,
        "neck_window": c.neck_window,
        "track_eps1": c.track_eps1,
        "track_lookback": c.track_lookback,
        "track_tol_r": c.track_tol_r,
        "entropy_n_center": c.entropy_n_center,
        "entropy_n_scale": c.entropy_n_scale,
    }


def run_experiment(config):
    """Run a scenario end to end and write the bundle under config.outdir.

    Diagnostics that raise record the error in the manifest and mark the
    bundle partial instead of aborting the remaining stages.  Deterministic
    given the scenario seed: reruns produce byte-identical CSV/JSON.
    """
    os.makedirs(config.outdir, exist_ok=True)
    errors = []

    mesh, meta = generate(config.scenario)
    history = run_flow(
        mesh, config.ctrl, snapshot_every=config.snapshot_every, t_max=config.t_max
    )
    save_history(history, os.path.join(config.outdir, "history"))

    series = []
    try:
        series = functional_series(
            history,
            entropy_kwargs={
                "n_center": config.entropy_n_center,
                "n_scale": config.entropy_n_scale,
            },
            diam_method=config.diam_method,
            with_regularity=config.with_regularity,
        )
        write_series_csv(series, os.path.join(config.outdir, "series.csv"))
    except McflabError as exc:
        errors.append({"stage": "functionals", "error": type(exc).__name__, "message": str(exc)})

    necks, tracks, tilts, tubes = [], [], [], []
    final = history.states[-1]
    if config.with_necks:
        try:
            necks = detect_necks(
                final.mesh, final.curv, config.neck_eps_threshold, window=config.neck_window
            )
            with open(os.path.join(config.outdir, "necks.json"), "w") as fh:
                json.dump([n.to_dict() for n in necks], fh, indent=1)
            tubes = assemble_tubes(final.mesh, necks, window=config.neck_window)
            with open(os.path.join(config.outdir, "tubes.json"), "w") as fh:
                json.dump([t.to_dict() for t in tubes], fh, indent=1)
        except McflabError as exc:
            errors.append({"stage": "necks", "error": type(exc).__name__, "message": str(exc)})

    if config.with_tracks and necks:
        for neck in necks:
            try:
                track = track_strong_neck(
                    history, neck, config.track_eps1, config.track_lookback,
                    tol_r=config.track_tol_r,
                )
            except (TrackLost, InsufficientSupport, DegenerateFit) as exc:
                errors.append({"stage": "track", "error": type(exc).__name__, "message": str(exc)})
                continue
            tracks.append(track)
            try:
                total, profile = measure_tilt(track)
                tilts.append({"total_deg": total, "profile_deg": profile})
            except TooShort:
                tilts.append({"total_deg": None, "profile_deg": []})
        with open(os.path.join(config.outdir, "tracks.json"), "w") as fh:
            json.dump(
                [{"track": t.to_dict(), "tilt": tl} for t, tl in zip(tracks, tilts)],
                fh,
                indent=1,
            )

    manifest = {
        "version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "scenario": {
            "name": config.scenario.name,
            "generator": config.scenario.generator,
            "params": config.scenario.params,
            "seed": config.scenario.seed,
        },
        "ground_truth": {k: v for k, v in meta.items() if not isinstance(v, (dict,))},
        "thresholds": _manifest_thresholds(config),
        "stop_reason": history.stop_reason,
        "n_snapshots": len(history),
        "errors": errors,
        "partial": bool(errors),
    }
    with open(os.path.join(config.outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, default=float)

    return ExperimentBundle(
        outdir=config.outdir,
        config=config,
        history=history,
        series=series,
        necks=necks,
        tracks=tracks,
        tilts=tilts,
        tubes=tubes,
        manifest=manifest,
        partial=bool(errors),
    )


def load_bundle(outdir):
    """Reload the machine-readable parts of a bundle (no re-derivation)."""
    with open(os.path.join(outdir, "manifest.json")) as fh:
        manifest = json.load(fh)
    history = load_history(os.path.join(outdir, "history"))
    series_path = os.path.join(outdir, "series.csv")
    series = read_series_csv(series_path) if os.path.exists(series_path) else []
    return ExperimentBundle(
        outdir=outdir,
        config=None,
        history=history,
        series=series,
        necks=[],
        tracks=[],
        tilts=[],
        tubes=[],
        manifest=manifest,
        partial=manifest.get("partial", False),
    )


# -- verdicts ---------------------------------------------------------------

MONOTONE_SLACK = 5e-3        # absolute slack for entropy / Gaussian-area decrease
AREA_SLACK = 1e-6            # relative slack for the area monotonicity check


def _monotone_violation(values, slack):
    """Largest increase between consecutive samples (0 when non-increasing)."""
    v = np.asarray(values, dtype=np.float64)
    if len(v) < 2:
        return 0.0
    return float(max(np.diff(v).max(), 0.0))


def compute_verdicts(bundle):
    """Machine-readable verdict dict for a bundle.

    Hard invariants (``hard_ok``): area strictly non-increasing up to
    relative slack, entropy and Gaussian area non-increasing up to the
    monotonicity slack.  Everything else is descriptive.
    """
    s = bundle.series
    verdicts = {"partial": bundle.partial, "stop_reason": bundle.manifest.get("stop_reason")}
    if not s:
        verdicts["hard_ok"] = False
        verdicts["reason"] = "no functional series"
        return verdicts

    rinv = np.array([x.int_rinv for x in s])
    area = [x.area for x in s]
    ent = [x.entropy for x in s]
    F = [x.F_origin for x in s]
    diam = [x.diam for x in s]

    area_rise = _monotone_violation(area, 0.0)
    ent_rise = _monotone_violation(ent, 0.0)
    F_rise = _monotone_violation(F, 0.0)

    verdicts.update(
        {
            "n_samples": len(s),
            "area_initial": area[0],
            "area_final": area[-1],
            "area_max_rise": area_rise,
            "area_ok": area_rise <= AREA_SLACK * max(area[0], 1e-300),
            "entropy_max_rise": ent_rise,
            "entropy_ok": ent_rise <= MONOTONE_SLACK,
            "F_origin_max_rise": F_rise,
            "F_origin_ok": F_rise <= MONOTONE_SLACK,
            "diam_min": float(min(diam)),
            "diam_max": float(max(diam)),
            "diam_rel_variation": float((max(diam) - min(diam)) / max(max(diam), 1e-300)),
            "int_H_max": float(max(x.int_H_1 for x in s)),
            "int_A_max": float(max(x.int_A_1 for x in s)),
            "maxH_growth": float(s[-1].maxH / max(s[0].maxH, 1e-300)),
            "maxA_growth": float(s[-1].maxA / max(s[0].maxA, 1e-300)),
            "int_rinv_max": (
                float(np.nanmax(rinv)) if np.isfinite(rinv).any() else float("nan")
            ),
            "topping_max_ratio": float(max(x.diam / max(x.int_H_1, 1e-300) for x in s)),
            "n_necks": len(bundle.necks),
            "n_tracks": len(bundle.tracks),
            "n_tubes": len(bundle.tubes),
            "max_tilt_deg": float(
                max((t["total_deg"] for t in bundle.tilts if t["total_deg"] is not None), default=0.0)
            ),
        }
    )
    verdicts["hard_ok"] = bool(
        verdicts["area_ok"] and verdicts["entropy_ok"] and verdicts["F_origin_ok"]
    )
    return verdicts


def report(bundle, out=None):
    """Human-readable verdict table plus machine-readable verdicts.

    Writes ``verdicts.json`` next to the bundle when ``out`` is not given.
    Returns (text, verdicts, exit_code); exit_code is nonzero iff a hard
    invariant (a monotonicity suite) failed.
    """
    verdicts = compute_verdicts(bundle)
    lines = [f"experiment report: {bundle.outdir}"]
    lines.append(f"  stop reason: {verdicts.get('stop_reason')}  partial: {verdicts['partial']}")
    for key in sorted(k for k in verdicts if k not in ("partial", "stop_reason")):
        lines.append(f"  {key}: {verdicts[key]}")
    status = "OK" if verdicts.get("hard_ok") else "FAIL"
    lines.append(f"  hard invariants: {status}")
    text = "\n".join(lines)

    path = out or os.path.join(bundle.outdir, "verdicts.json")
    with open(path, "w") as fh:
        json.dump(verdicts, fh, indent=1, default=float)
    return text, verdicts, 0 if verdicts.get("hard_ok") else 1


def plot_series(samples, outdir):
    """One SVG line plot per series quantity (time on x)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(outdir, exist_ok=True)
    t = [s.t for s in samples]
    written = []
    for name in SERIES_FIELDS[1:]:
        y = [getattr(s, name) for s in samples]
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.plot(t, y, marker=".", lw=1)
        ax.set_xlabel("t")
        ax.set_ylabel(name)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = os.path.join(outdir, f"{name}.svg")
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written


# -- the standard scenario suite -------------------------------------------

STANDARD_SUITE = [
    Scenario("sphere", "sphere", {"level": 3, "radius": 1.0}),
    Scenario("capped_cylinder", "capped_cylinder", {"radius": 0.2, "half_length": 2.0}),
    Scenario("dumbbell", "dumbbell", {"ball_radius": 1.0, "neck_radius": 0.15, "separation": 3.0}),
    Scenario("torus", "torus", {"r": 0.25, "R": 1.0}),
    Scenario("bent_tube", "bent_tube", {"tube_radius": 0.1, "bend_radius": 1.0, "arm_length": 1.0}),
    Scenario("wiggly_tube", "wiggly_tube", {"tube_radius": 0.15, "length": 6.0, "amplitude": 0.2, "wavelength": 3.0}),
]
