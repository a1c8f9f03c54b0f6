"""From zero counts to CX counts: calibration and per-bucket inversion.

Zero counts are first mapped back to a phase estimate. With readout inverted and the
idle-victim baseline p0 known, E[P(1)] = (1 - cos(mu) * (1 - 2 p0)) / 2, so

    mu_hat = arccos((1 - 2 p) / (1 - 2 p0))

is linear in the number of concurrent CX for graded snoops. Each bucket is then a
small non-negative linear system K x = mu_hat.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .sidechannel import (
    CgdConfig, CrosstalkModel, TenantPartition, ZeroCountTrace, probe_schedule, simulate_cgd,
)
from .traces import CnotTrace

MIN_R2 = 0.9
MIN_SLOPE = 0.02  # radians per CX; anything flatter is treated as uninformative
RANK_RTOL = 0.05  # singular values below this fraction of the largest count as zero


class InferenceError(ValueError):
    pass


@dataclass(frozen=True)
class CalibrationTable:
    snoops: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    baseline: np.ndarray            # (n_snoop,) zero count with idle victim
    zero_deviation: np.ndarray      # (n_snoop, n_edge) baseline minus zero count for one CX
    slope: np.ndarray               # (n_snoop, n_edge) fitted phase per CX
    r2: np.ndarray                  # (n_snoop, n_edge) fit quality
    shots: int
    eps_excite: float
    eps_relax: float
    window: int
    max_k: int
    curves: dict = field(default_factory=dict, compare=False)   # (snoop, edge) -> mean zero counts over k

    @property
    def usable(self) -> np.ndarray:
        """Rows with a clean linear response on at least one edge."""
        good = (self.r2 >= MIN_R2) & (self.slope >= MIN_SLOPE)
        return good.any(axis=1)

    def phase(self, zero_counts: np.ndarray) -> np.ndarray:
        """Phase estimate per snoop for zero counts shaped (n_snoop, ...)."""
        return _phase(zero_counts, self.baseline, self.shots, self.eps_excite, self.eps_relax)


def _p_true(zeros, shots, ee, er):
    p_obs = 1.0 - np.asarray(zeros, float) / shots
    return np.clip((p_obs - ee) / (1.0 - ee - er), 0.0, 1.0)


def _phase(zeros, baseline, shots, ee, er) -> np.ndarray:
    zeros = np.asarray(zeros, float)
    p = _p_true(zeros, shots, ee, er)
    p0 = _p_true(baseline, shots, ee, er).reshape((-1,) + (1,) * (zeros.ndim - 1))
    scale = np.maximum(1.0 - 2.0 * p0, 1e-9)
    return np.arccos(np.clip((1.0 - 2.0 * p) / scale, -1.0, 1.0))


def _fit_through_origin(k: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    slope = float(k @ y / (k @ k))
    ss_res = float(((y - slope * k) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return slope, r2


def calibrate(part: TenantPartition, model: CrosstalkModel, cfg: CgdConfig, max_k: int,
              cx_duration: int = 180) -> CalibrationTable:
    """Probe each victim edge with k = 0..max_k CX inside one window and fit the response."""
    if max_k < 1:
        raise InferenceError("max_k must be at least 1")
    if max_k * cx_duration > cfg.window:
        raise InferenceError(f"{max_k} CX of {cx_duration} dt do not fit in a {cfg.window} dt window")
    if not part.victim_edges:
        raise InferenceError("victim region has no coupling edges to calibrate")
    snoops = part.snoops
    edges = part.victim_edges
    ks = np.arange(max_k + 1)
    zero = np.zeros((len(snoops), len(edges), max_k + 1))
    for j, e in enumerate(edges):
        for k in ks:
            sched = probe_schedule(part, [e] * int(k), cx_duration, total=cfg.window)
            run_cfg = CgdConfig(cfg.shots_per_bucket, cfg.window, cfg.repetitions, cfg.dd_enabled,
                                seed=hash_seed(cfg.seed, j, int(k)))
            zero[:, j, k] = simulate_cgd(sched, part, model, run_cfg, n_buckets=1).zero_mean[:, 0]
    baseline = zero[:, :, 0].mean(axis=1)
    phase = _phase(zero, baseline, cfg.shots_per_bucket, model.eps_excite, model.eps_relax)
    slope = np.zeros((len(snoops), len(edges)))
    r2 = np.zeros_like(slope)
    for i in range(len(snoops)):
        for j in range(len(edges)):
            slope[i, j], r2[i, j] = _fit_through_origin(ks.astype(float), phase[i, j])
    deviation = np.maximum(baseline[:, None] - zero[:, :, 1], 0.0)
    curves = {(s, e): zero[i, j].copy() for i, s in enumerate(snoops) for j, e in enumerate(edges)}
    return CalibrationTable(snoops, edges, baseline, deviation, slope, r2, cfg.shots_per_bucket,
                            model.eps_excite, model.eps_relax, cfg.window, max_k, curves)


def hash_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _solve(K: np.ndarray, d: np.ndarray) -> tuple[np.ndarray, bool]:
    """Non-negative solution; minimum-norm when K lacks full column rank."""
    sv = np.linalg.svd(K, compute_uv=False)
    if sv.size < K.shape[1] or sv.min() <= RANK_RTOL * sv.max():
        return np.maximum(np.linalg.pinv(K, rcond=RANK_RTOL) @ d, 0.0), True
    x, _ = nnls(K, d)
    return x, False


def largest_remainder(x: np.ndarray) -> np.ndarray:
    """Integerize x >= 0 keeping the rounded total; ties go to the lower index."""
    total = int(np.rint(x.sum()))
    base = np.floor(x).astype(int)
    short = total - int(base.sum())
    if short > 0:
        order = sorted(range(len(x)), key=lambda j: (-(x[j] - base[j]), j))
        for j in order[:short]:
            base[j] += 1
    elif short < 0:
        order = sorted((j for j in range(len(x)) if base[j] > 0), key=lambda j: (x[j] - base[j], j))
        for j in order[:-short]:
            base[j] -= 1
    return base


def estimate_trace(obs: ZeroCountTrace, cal: CalibrationTable, part: TenantPartition,
                   cx_duration: int = 180, label: str | None = None) -> CnotTrace:
    if obs.snoop_qubits != cal.snoops:
        raise InferenceError("observation and calibration use different snoop qubits")
    if obs.window != cal.window:
        raise InferenceError(f"observation window {obs.window} differs from calibration window {cal.window}")
    phase = cal.phase(obs.zero_mean)                     # (n_snoop, n_buckets)
    rows = np.flatnonzero(cal.usable)
    flags: list[str] = []
    counts: dict = {}
    residuals = []
    edges = cal.edges
    if rows.size:
        K = cal.slope[rows]
        K = np.where(cal.r2[rows] >= MIN_R2, K, 0.0)
        ill_posed = False
        for b in range(obs.n_buckets):
            x, ill = _solve(K, phase[rows, b])
            ill_posed |= ill
            xi = largest_remainder(x)
            residuals.append(float(np.linalg.norm(K @ xi - phase[rows, b])))
            for j, v in enumerate(xi):
                if v > 0:
                    counts[(b, edges[j])] = int(v)
        if ill_posed:
            flags.append("ill_posed")
    else:
        # nearest-snoop fallback: read each edge off its closest snoop alone
        flags.append("degraded")
        for j, e in enumerate(edges):
            i = min(range(len(cal.snoops)), key=lambda i: (part.distance[(cal.snoops[i], e)], cal.snoops[i]))
            s = cal.slope[i, j]
            for b in range(obs.n_buckets):
                v = int(np.rint(phase[i, b] / s)) if s > 1e-9 else 0
                if v > 0:
                    counts[(b, e)] = v
    return CnotTrace(
        part.coupling.n_physical, obs.window, obs.n_buckets, counts, part.coupling.sorted_edges, cx_duration,
        label, "inferred", tuple(flags), {"residual": residuals},
    )

