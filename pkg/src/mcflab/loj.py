"""Discrete Lojasiewicz machinery: hypothesis checking and increment sums
for non-increasing sequences with a two-step gap recurrence, empirical
smallness thresholds, and the gradient-flow inequality measurements on
rescaled flow histories.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    GateFailed,
    GeneratorInvalid,
    HypothesesFail,
    InsufficientSupport,
    DegenerateFit,
    TooShort,
)
from .mesh import surface_integral

_TOL = 1e-12


# -- sequences -------------------------------------------------------------


@dataclass
class LojSequence:
    """A finite real sequence f(0..T) with recurrence parameters (K, mu, delta).

    The modeled hypotheses: f non-increasing; |f(t)|^{1+mu} <= K * (f(t-1) -
    f(t+1)) for interior t; max |f| <= delta.
    """

    values: np.ndarray
    K: float
    mu: float
    delta: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not 0.0 < self.mu < 1.0:
            raise ValueError("mu must be in (0, 1)")
        if self.K <= 0 or self.delta <= 0:
            raise ValueError("K and delta must be positive")

    @property
    def T(self):
        return len(self.values) - 1


@dataclass
class HypothesisFlags:
    non_increasing: bool
    recurrence: bool
    bounded: bool
    tightest_K: float = float("nan")

    @property
    def all_hold(self):
        return self.non_increasing and self.recurrence and self.bounded


def check_hypotheses(seq):
    """Evaluate the three sequence hypotheses, with the tightest valid K.

    The recurrence is checked against the sequence's own K with absolute
    slack 1e-12; the tightest K is the max over interior indices of
    |f(t)|^{1+mu} / (f(t-1) - f(t+1)) where the gap is positive.
    """
    f = seq.values
    if seq.T < 2:
        raise TooShort("need at least 3 values (T >= 2)")
    non_increasing = bool(np.all(f[1:] <= f[:-1] + _TOL))
    gaps = f[:-2] - f[2:]                       # f(t-1) - f(t+1), t = 1..T-1
    lhs = np.abs(f[1:-1]) ** (1.0 + seq.mu)
    recurrence = bool(np.all(lhs <= seq.K * gaps + _TOL))
    bounded = bool(np.max(np.abs(f)) <= seq.delta + _TOL)
    tightest = float("nan")
    if recurrence:
        pos = gaps > 0
        if pos.any():
            tightest = float(np.max(lhs[pos] / gaps[pos]))
        elif np.all(lhs <= _TOL):
            tightest = 0.0
    return HypothesisFlags(
        non_increasing=non_increasing,
        recurrence=recurrence,
        bounded=bounded,
        tightest_K=tightest,
    )


def sqrt_increment_sum(seq):
    """Sum over steps of |f(j) - f(j-1)|^{1/2}, compensated summation.

    The absolute value makes the sum well defined for the non-increasing
    sequences the hypotheses describe (whose literal increments are <= 0).
    """
    f = seq.values
    return math.fsum(math.sqrt(abs(f[j] - f[j - 1])) for j in range(1, len(f)))


def decay_bound_check(seq, C):
    """Check the power-law decay f(t) <= C * t^{-1/mu} while f stays >= 0.

    The checked range is t = 1 .. t0 where t0 is the smallest index from
    which on the sequence is strictly negative (t0 = 0 when f is negative
    from the start, making the range empty).  Requires the hypotheses.
    """
    flags = check_hypotheses(seq)
    if not flags.all_hold:
        raise HypothesesFail(f"sequence fails hypotheses: {flags}")
    f = seq.values
    neg = f < 0
    t0 = seq.T + 1
    for j in range(len(f)):
        if neg[j:].all():
            t0 = j
            break
    for t in range(1, min(t0, seq.T) + 1):
        bound = C * float(t) ** (-1.0 / seq.mu)
        if f[t] > bound + _TOL:
            return False, t
    return True, None


# -- sequence generator families -------------------------------------------


def _power_sequence(amplitude, mu, T, offset=10.0):
    t = np.arange(T + 1, dtype=np.float64)
    f = (t + offset) ** (-1.0 / mu)
    return amplitude * f / f[0]


def _geometric_sequence(amplitude, q, T):
    return amplitude * q ** np.arange(T + 1, dtype=np.float64)


def _admissible_amplitude_cap(kind, K, mu, T, param):
    """Largest amplitude at which the family still satisfies the recurrence."""
    probe = generate_family(kind, 1.0, K, mu, T, param, check=False)
    gaps = probe[:-2] - probe[2:]
    lhs = np.abs(probe[1:-1]) ** (1.0 + mu)
    pos = gaps > 0
    if not pos.any():
        return 0.0
    # scaling by a: lhs scales a^{1+mu}, gap scales a; admissible iff
    # a^mu * max(lhs/gap) <= K
    worst = float(np.max(lhs[pos] / gaps[pos]))
    if worst == 0.0:
        return float("inf")
    return (K / worst) ** (1.0 / mu)


def generate_family(kind, amplitude, K, mu, T, param, check=True):
    """One sequence from a named family, hypothesis-checked by default."""
    if kind == "power":
        f = _power_sequence(amplitude, mu, T, offset=param)
    elif kind == "geometric":
        f = _geometric_sequence(amplitude, param, T)
    else:
        raise GeneratorInvalid(f"unknown family {kind!r}")
    if check:
        flags = check_hypotheses(LojSequence(f, K=K, mu=mu, delta=max(amplitude, 1e-300)))
        if not flags.all_hold:
            raise GeneratorInvalid(f"{kind} family at amplitude {amplitude} fails hypotheses: {flags}")
    return f


# families as (kind, parameter draw) pairs; parameters are drawn per sequence
_FAMILIES = {
    "power": lambda rng: rng.uniform(5.0, 50.0),        # offset
    "geometric": lambda rng: rng.uniform(0.3, 0.9),     # ratio q
}


def empirical_delta(K, mu, eps, families=("power", "geometric"), n_sequences=200, T=200, seed=0):
    """Empirical smallness threshold: the largest amplitude delta_hat such
    that every generated hypothesis-satisfying sequence of amplitude at most
    delta_hat has sqrt_increment_sum <= eps.

    Bisection over amplitude against N sequences per family with per-sequence
    seeds derived from (seed, family, index); returns (delta_hat, manifest).
    """
    specs = []
    for kind in families:
        if kind not in _FAMILIES:
            raise GeneratorInvalid(f"unknown family {kind!r}")
        for i in range(n_sequences):
            rng = np.random.default_rng([seed, zlib.crc32(kind.encode()), i])
            specs.append((kind, _FAMILIES[kind](rng)))

    caps = [_admissible_amplitude_cap(kind, K, mu, T, param) for kind, param in specs]
    amp_cap = min(caps)

    def all_pass(amplitude):
        if amplitude == 0.0:
            return True
        for kind, param in specs:
            f = generate_family(kind, amplitude, K, mu, T, param)
            s = sqrt_increment_sum(LojSequence(f, K=K, mu=mu, delta=amplitude))
            if s > eps:
                return False
        return True

    manifest = {
        "K": K, "mu": mu, "eps": eps, "families": list(families),
        "family_params": "drawn per sequence from fixed ranges",
        "n_sequences_per_family": n_sequences, "T": T, "seed": seed,
        "amplitude_cap": amp_cap,
    }
    if eps <= 0.0:
        return 0.0, manifest
    if all_pass(amp_cap):
        manifest["hit_amplitude_cap"] = True
        return amp_cap, manifest
    lo, hi = 0.0, amp_cap
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if all_pass(mid):
            lo = mid
        else:
            hi = mid
    manifest["hit_amplitude_cap"] = False
    return lo, manifest


# -- rescaled-flow functional series ---------------------------------------


def _vertex_gaussian_weight(mesh):
    d2 = np.einsum("ij,ij->i", mesh.vertices, mesh.vertices)
    return np.exp(-0.25 * d2) / (4.0 * np.pi)


def _gaussian_area_vertex(mesh):
    """F with vertex-area quadrature (consistent with the drift integrals)."""
    return float(surface_integral(mesh, _vertex_gaussian_weight(mesh)))


@dataclass
class FGapSeries:
    """Gaussian-area series of a rescaled history with step drift integrals.

    F[j] uses vertex-area quadrature; ``gaps2`` are the two-sided gaps
    F[j-1] - F[j+1] (j = 1..T-1); ``drift`` is the per-step weighted-L1
    velocity integral of |Hvec + x_perp/2| times ds.
    """

    times: np.ndarray
    F: np.ndarray
    gaps2: np.ndarray
    drift: np.ndarray
    ds: float


def run_rescaled_with_fgaps(initial, center, ds, n_steps, ctrl=None):
    """Rescaled flow run accumulating the F series and step drift integrals."""
    from .flow import run_rescaled

    drifts = []

    def record(state, new, ds_step):
        v = state.mesh.vertices - np.asarray(center, dtype=np.float64)
        xperp = np.einsum("ij,ij->i", v, state.curv.normal)
        speed = np.abs(-state.curv.H + 0.5 * xperp)   # |Hvec + x_perp/2| along the normal
        rho = _vertex_gaussian_weight(state.mesh)
        drifts.append(ds_step * float(surface_integral(state.mesh, speed * rho)))

    hist = run_rescaled(initial, center, ds, n_steps, ctrl=ctrl, callback=record)
    F = np.array([_gaussian_area_vertex(st.mesh) for st in hist.states])
    series = FGapSeries(
        times=hist.times,
        F=F,
        gaps2=F[:-2] - F[2:],
        drift=np.array(drifts),
        ds=ds,
    )
    return hist, series


# -- gradient-flow inequality measurements ---------------------------------


def model_cylinder_F():
    """F of the self-shrinker cylinder (radius sqrt 2), measured on a mesh."""
    from .scenarios import capped_cylinder
    from .functionals import gaussian_area

    return gaussian_area(capped_cylinder(np.sqrt(2.0), 8.0, n_theta=64))


def measure_LS_inequality(history, Z_value=None, mu=0.5, gate_eps=0.3, gate_window=0.3):
    """Two sides of |F(s) - F(Z)|^{1+mu} <= K * (F(s-1) - F(s+1)) per step.

    Every snapshot must pass a cylinder-closeness gate (a cylinder fit near
    the origin with eps_measured <= gate_eps), standing in for the
    graph-over-the-cylinder hypothesis; GateFailed reports the first failing
    snapshot.  Returns (records, minimal_K) where records hold per-step
    (s, lhs, gap) and minimal_K is the smallest K validating the inequality
    over the positive-gap range.
    """
    from .necks import fit_cylinder

    states = history.states
    if len(states) < 3:
        raise TooShort("need at least 3 snapshots")
    for st in states:
        i = int(np.argmin(np.linalg.norm(st.mesh.vertices, axis=1)))
        try:
            fit = fit_cylinder(st.mesh, i, np.sqrt(2.0) / gate_window, window=gate_window)
        except (InsufficientSupport, DegenerateFit) as exc:
            raise GateFailed(f"cylinder gate failed: {exc}", time=st.time)
        if fit.eps_measured > gate_eps:
            raise GateFailed(
                f"cylinder gate eps {fit.eps_measured:.3f} > {gate_eps}", time=st.time
            )

    if Z_value is None:
        Z_value = model_cylinder_F()
    F = np.array([_gaussian_area_vertex(st.mesh) for st in states])
    lhs = np.abs(F[1:-1] - Z_value) ** (1.0 + mu)
    gaps = F[:-2] - F[2:]
    records = [
        {"s": float(states[j + 1].time), "lhs": float(lhs[j]), "gap": float(gaps[j])}
        for j in range(len(gaps))
    ]
    pos = gaps > 0
    minimal_K = float(np.max(lhs[pos] / gaps[pos])) if pos.any() else 0.0
    return records, minimal_K


def tilt_sum_chain(series, entropy_bound):
    """Both sides of the movement-vs-gap chain on a rescaled run.

    lhs = sum of per-step weighted-L1 drift; rhs = Lambda^{1/2} * sum of
    sqrt(ds * (F(j) - F(j+1))) over steps (consecutive gaps, which telescope
    to F(first) - F(last) exactly).  Returns (lhs, rhs, telescoped_sum).
    """
    F = series.F
    gaps1 = [F[j] - F[j + 1] for j in range(len(F) - 1)]
    telescoped = math.fsum(gaps1)
    lhs = math.fsum(series.drift)
    rhs = math.sqrt(entropy_bound) * math.fsum(
        math.sqrt(series.ds * max(g, 0.0)) for g in gaps1
    )
    return lhs, rhs, telescoped
