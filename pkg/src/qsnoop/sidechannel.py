"""Simulated crosstalk-based gate detection (CGD) by snoop qubits.

Snoop qubits are put in superposition, idle for one window, rotated back and measured.
CX gates running on nearby victim edges during the window kick the snoop phase by Φ,
which turns into a flipped outcome with probability sin²(Φ/2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .circuit import Circuit, Delay, H, Measure, pair
from .traces import CnotTrace
from .transpiler import CouplingMap, TimedSchedule

SENSITIVITY_CLASSES = ("insensitive", "binary", "graded")
KAPPA0 = 0.35
# Per-device sensitivity overrides; qubits not listed are graded.
DEVICE_SENSITIVITY: dict[str, dict[int, str]] = {
    "lagos7": {3: "binary", 4: "graded", 5: "graded", 6: "insensitive", 2: "insensitive"},
}


class SideChannelError(ValueError):
    pass


class NoSnoopQubits(SideChannelError):
    pass


class TenantOverlap(SideChannelError):
    pass


class ThreatModelViolation(SideChannelError):
    pass


class InsufficientVariance(SideChannelError):
    pass


@dataclass(frozen=True)
class TenantPartition:
    coupling: CouplingMap
    victim_qubits: frozenset[int]
    snoop_qubits: frozenset[int]
    victim_edges: tuple[tuple[int, int], ...]
    # (snoop, victim edge) -> graph distance from snoop to the nearer endpoint
    distance: dict = field(default_factory=dict, compare=False)

    @property
    def snoops(self) -> tuple[int, ...]:
        return tuple(sorted(self.snoop_qubits))


def partition_tenants(cmap: CouplingMap, victim_qubits: Iterable[int],
                      snoop_qubits: Iterable[int] | None = None) -> TenantPartition:
    victim = frozenset(int(q) for q in victim_qubits)
    if not victim:
        raise SideChannelError("victim region is empty")
    if any(not 0 <= q < cmap.n_physical for q in victim):
        raise SideChannelError(f"victim qubits {sorted(victim)} outside device {cmap.name}")
    if snoop_qubits is None:
        snoop = frozenset(range(cmap.n_physical)) - victim
    else:
        snoop = frozenset(int(q) for q in snoop_qubits)
        if snoop & victim:
            raise TenantOverlap(f"qubits {sorted(snoop & victim)} requested by both tenants")
        if any(not 0 <= q < cmap.n_physical for q in snoop):
            raise SideChannelError("snoop qubits outside device")
    if not snoop:
        raise NoSnoopQubits("victim occupies the whole device; no snoop qubits remain")
    vedges = tuple(e for e in cmap.sorted_edges if e[0] in victim and e[1] in victim)
    d = cmap.distance
    dist = {(s, e): int(min(d[s, e[0]], d[s, e[1]])) for s in sorted(snoop) for e in vedges}
    return TenantPartition(cmap, victim, snoop, vedges, dist)


@dataclass(frozen=True)
class CrosstalkModel:
    kappa: dict                      # (snoop, edge) -> radians per fully-overlapping CX
    sensitivity: dict                # snoop -> class
    kick_jitter_sigma: float = 0.05
    idle_dephasing_sigma: float = 0.002
    dd_attenuation: float = 0.9
    eps_excite: float = 0.01
    eps_relax: float = 0.03
    binary_cap: float = KAPPA0

    def __post_init__(self):
        if any(v < 0 for v in self.kappa.values()):
            raise SideChannelError("kappa must be non-negative")
        if not 0 < self.dd_attenuation <= 1:
            raise SideChannelError("dd_attenuation must lie in (0, 1]")
        if not (0 <= self.eps_excite < 0.5 and 0 <= self.eps_relax < 0.5):
            raise SideChannelError("readout error rates must lie in [0, 0.5)")
        if self.kick_jitter_sigma < 0 or self.idle_dephasing_sigma < 0:
            raise SideChannelError("noise scales must be non-negative")
        bad = {c for c in self.sensitivity.values() if c not in SENSITIVITY_CLASSES}
        if bad:
            raise SideChannelError(f"unknown sensitivity class {bad}")

    def noiseless(self) -> "CrosstalkModel":
        return replace(self, kick_jitter_sigma=0.0, idle_dephasing_sigma=0.0, eps_excite=0.0, eps_relax=0.0)

    def noise_sigma(self, window: float) -> float:
        return math.hypot(self.kick_jitter_sigma, self.idle_dephasing_sigma * math.sqrt(window))


def default_model(part: TenantPartition, kappa0: float = KAPPA0, sensitivity: dict | None = None,
                  **kw) -> CrosstalkModel:
    """κ(s, e) = κ0 · 2^-(dist-1), with device-config sensitivity classes."""
    if sensitivity is None:
        overrides = DEVICE_SENSITIVITY.get(part.coupling.name, {})
        sensitivity = {s: overrides.get(s, "graded") for s in part.snoops}
    kappa = {k: kappa0 * 2.0 ** (-(d - 1)) for k, d in part.distance.items()}
    return CrosstalkModel(kappa, dict(sensitivity), binary_cap=kw.pop("binary_cap", kappa0), **kw)


@dataclass(frozen=True)
class CgdConfig:
    shots_per_bucket: int = 10_000
    window: int = 180
    repetitions: int = 75
    dd_enabled: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.shots_per_bucket < 1 or self.repetitions < 1:
            raise SideChannelError("shots and repetitions must be positive")
        if self.window < 1:
            raise SideChannelError("window must be positive")


@dataclass(frozen=True)
class ZeroCountTrace:
    snoop_qubits: tuple[int, ...]
    zero_counts: np.ndarray          # (repetitions, n_snoop, n_buckets), integer
    joint_zero_counts: np.ndarray    # (repetitions, n_buckets)
    shots: int
    window: int

    @property
    def n_buckets(self) -> int:
        return self.zero_counts.shape[2]

    @property
    def zero_mean(self) -> np.ndarray:
        return self.zero_counts.mean(axis=0)

    @property
    def zero_std(self) -> np.ndarray:
        return self.zero_counts.std(axis=0, ddof=1) if self.zero_counts.shape[0] > 1 else np.zeros(self.zero_mean.shape)

    @property
    def joint_mean(self) -> np.ndarray:
        return self.joint_zero_counts.mean(axis=0)

    @property
    def one_counts(self) -> np.ndarray:
        return self.shots - self.zero_counts

    def row(self, snoop: int) -> int:
        return self.snoop_qubits.index(snoop)

    def to_table(self) -> str:
        lines = ["snoop_qubit,bucket,zero_mean,zero_std,shots"]
        zm, zs = self.zero_mean, self.zero_std
        for i, s in enumerate(self.snoop_qubits):
            for b in range(self.n_buckets):
                lines.append(f"{s},{b},{zm[i, b]:.4f},{zs[i, b]:.4f},{self.shots}")
        return "\n".join(lines) + "\n"


def _shape(model: CrosstalkModel, snoop: int, x: float) -> float:
    cls = model.sensitivity.get(snoop, "graded")
    if cls == "insensitive":
        return 0.0
    if cls == "binary":
        return min(x, model.binary_cap)
    return x


def mean_phase(model: CrosstalkModel, snoop: int, concurrent_cx: Sequence[tuple[tuple[int, int], float]],
               dd_enabled: bool = False) -> float:
    """Deterministic part of the phase kick."""
    for _, f in concurrent_cx:
        if not 0.0 <= f <= 1.0:
            raise SideChannelError(f"overlap fraction {f} outside [0, 1]")
    x = sum(model.kappa.get((snoop, pair(*e)), 0.0) * f for e, f in concurrent_cx)
    mu = _shape(model, snoop, x)
    return mu * model.dd_attenuation if dd_enabled else mu


def sample_phase_kick(model: CrosstalkModel, snoop: int, concurrent_cx, window: float,
                      rng: np.random.Generator, dd_enabled: bool = False) -> float:
    mu = mean_phase(model, snoop, concurrent_cx, dd_enabled)
    jitter = rng.normal(0.0, model.kick_jitter_sigma) if model.kick_jitter_sigma else 0.0
    idle = rng.normal(0.0, model.idle_dephasing_sigma * math.sqrt(window)) if model.idle_dephasing_sigma else 0.0
    return mu + jitter + idle


def expected_zero_fraction(mu: float, sigma: float, eps_excite: float, eps_relax: float) -> float:
    """E[P(read 0)] for Φ ~ N(mu, sigma²): E[sin²(Φ/2)] = (1 - cos(mu)·exp(-sigma²/2)) / 2."""
    p1 = (1.0 - math.cos(mu) * math.exp(-sigma * sigma / 2)) / 2
    return (1 - p1) * (1 - eps_excite) + p1 * eps_relax


def concurrent_cx(victim: TimedSchedule, start: int, window: int) -> list[tuple[tuple[int, int], float]]:
    """CX events overlapping [start, start+window) with their overlap fraction."""
    out = []
    for sg in victim.cx_events():
        ov = min(sg.end, start + window) - max(sg.start, start)
        if ov > 0:
            out.append((pair(*sg.gate.qubits), ov / sg.duration))
    return out


def check_threat_model(victim: TimedSchedule, part: TenantPartition):
    for sg in victim.cx_events():
        if not set(sg.gate.qubits) <= part.victim_qubits:
            raise ThreatModelViolation(f"victim CX on {sg.gate.qubits} leaves the victim region {sorted(part.victim_qubits)}")


def snoop_program(part: TenantPartition, bucket: int, window: int) -> Circuit:
    """The per-bucket snoop circuit: delay to the bucket, H, idle one window, H, measure."""
    gates = []
    for s in part.snoops:
        if bucket:
            gates.append(Delay(bucket * window, s))
        gates += [H(s), Delay(window, s), H(s)]
    gates += [Measure(s) for s in part.snoops]
    return Circuit(part.coupling.n_physical, gates, name=f"cgd_b{bucket}")


def simulate_cgd(victim: TimedSchedule, part: TenantPartition, model: CrosstalkModel, cfg: CgdConfig,
                 n_buckets: int | None = None) -> ZeroCountTrace:
    check_threat_model(victim, part)
    snoops = part.snoops
    nb = n_buckets if n_buckets is not None else max(1, math.ceil(victim.total_duration / cfg.window))
    sigma = model.noise_sigma(cfg.window)
    zeros = np.zeros((cfg.repetitions, len(snoops), nb), dtype=np.int64)
    joint = np.zeros((cfg.repetitions, nb), dtype=np.int64)
    jit, idle = model.kick_jitter_sigma, model.idle_dephasing_sigma * math.sqrt(cfg.window)
    for b in range(nb):
        conc = concurrent_cx(victim, b * cfg.window, cfg.window)
        mu = np.array([mean_phase(model, s, conc, cfg.dd_enabled) for s in snoops])
        for r in range(cfg.repetitions):
            rng = np.random.default_rng([cfg.seed, b, r])
            shape = (cfg.shots_per_bucket, len(snoops))
            phi = np.broadcast_to(mu, shape)
            if sigma > 0:
                phi = phi + rng.normal(0.0, jit, shape) + rng.normal(0.0, idle, shape)
            p1 = np.sin(phi / 2) ** 2
            p_read1 = p1 * (1 - model.eps_relax) + (1 - p1) * model.eps_excite
            ones = rng.random(shape) < p_read1
            zeros[r, :, b] = cfg.shots_per_bucket - ones.sum(axis=0)
            joint[r, b] = int((~ones.any(axis=1)).sum())
    return ZeroCountTrace(snoops, zeros, joint, cfg.shots_per_bucket, cfg.window)


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if len(x) < 3:
        raise InsufficientVariance("need at least 3 points for a correlation")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise InsufficientVariance("constant series has no defined correlation")
    return float(np.corrcoef(x, y)[0, 1])


def correlation_report(traces: ZeroCountTrace | Sequence[ZeroCountTrace],
                       true_counts: CnotTrace | Sequence[CnotTrace], pool: str = "mean") -> dict[int, float]:
    """Pearson r between each snoop's zero count and the bucket CX count, pooled over inputs.

    pool="mean" uses one point per bucket (the repetition mean); pool="repetition" uses every
    repetition's shot batch as its own point.
    """
    if pool not in ("mean", "repetition"):
        raise SideChannelError(f"unknown pooling {pool!r}")
    if isinstance(traces, ZeroCountTrace):
        traces, true_counts = [traces], [true_counts]
    if len(traces) != len(true_counts):
        raise SideChannelError("traces and counts must pair up")
    snoops = traces[0].snoop_qubits
    xs, ys = [], []
    for zt, ct in zip(traces, true_counts):
        if zt.n_buckets != ct.n_buckets:
            raise SideChannelError(f"bucket grids differ ({zt.n_buckets} vs {ct.n_buckets})")
        if zt.snoop_qubits != snoops:
            raise SideChannelError("snoop sets differ between traces")
        if pool == "mean":
            xs.append(ct.bucket_totals())
            ys.append(zt.zero_mean)
        else:
            reps = zt.zero_counts.shape[0]
            xs.append(np.tile(ct.bucket_totals(), reps))
            ys.append(zt.zero_counts.transpose(1, 0, 2).reshape(len(snoops), -1))
    x = np.concatenate(xs)
    y = np.concatenate(ys, axis=1)
    return {s: pearson(x, y[i]) for i, s in enumerate(snoops)}


def probe_schedule(part: TenantPartition, edges: Sequence[tuple[int, int]], cx_duration: int = 180,
                   offset: int = 0, total: int | None = None) -> TimedSchedule:
    """Victim schedule running the given CX edges back to back from `offset`."""
    from .circuit import CX
    from .transpiler import GateDurations, Provenance, ScheduledGate

    d = GateDurations(cx=cx_duration)
    gates = []
    for i, e in enumerate(edges):
        if pair(*e) not in part.victim_edges:
            raise ThreatModelViolation(f"probe edge {e} is not a victim edge")
        gates.append(ScheduledGate(CX(*e), offset + i * cx_duration, cx_duration))
    end = max([offset + len(edges) * cx_duration] + ([total] if total else []))
    return TimedSchedule(part.coupling, tuple(gates), end, Provenance("probe", "none", "O0", "manual"), d, name="probe")


def cx_count_sweep(part: TenantPartition, edge: tuple[int, int], max_k: int = 8,
                   cx_duration: int = 180) -> tuple[TimedSchedule, int]:
    """Victim schedule whose bucket k holds k back-to-back CX on `edge`, for k = 0..max_k.

    Returns the schedule and the window (max_k CX long) that aligns buckets with the sweep.
    """
    from .circuit import CX
    from .transpiler import GateDurations, Provenance, ScheduledGate

    if pair(*edge) not in part.victim_edges:
        raise ThreatModelViolation(f"sweep edge {edge} is not a victim edge")
    window = max_k * cx_duration
    gates = [ScheduledGate(CX(*edge), k * window + i * cx_duration, cx_duration)
             for k in range(max_k + 1) for i in range(k)]
    return TimedSchedule(part.coupling, tuple(gates), (max_k + 1) * window, Provenance("probe", "none", "O0", "manual"),
                         GateDurations(cx=cx_duration), name="cx_sweep"), window
