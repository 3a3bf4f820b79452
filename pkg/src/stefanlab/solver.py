"""Frontier solvers for the absorbed interacting-particle system.

Two routes to the frontier Lambda_t = P(absorption by t):

* ``simulate_particles``: n particles advance by Gaussian increments; at every
  grid instant the physical cascade is resolved exactly on the empirical
  measure (``physical_jump_scan``), deaths shift the survivors down, and the
  dead fraction is the frontier estimate.
* ``picard_minimal``: fixed-point iteration Lambda <- mean F(running max of
  (-B + Lambda)) over a common set of Brownian paths, increasing pointwise to
  the minimal solution. Assumes no time-0 jump (its value at 0 is F(0) = 0).

All randomness is drawn from counter-based streams (see rng), so results are
bit-identical across runs and thread counts.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import rng
from .densities import Density

__all__ = [
    "PicardConfig",
    "SolverConfig",
    "FrontierPath",
    "ParticleEnsemble",
    "PicardResult",
    "physical_jump_scan",
    "physical_jump_bruteforce",
    "initial_jump_stratified",
    "simulate_particles",
    "picard_minimal",
    "compute_Y_samples",
    "iter_y_chunks",
]

_CHUNK = 8192  # fixed path-chunk size; independent of thread count by design


class SolverConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PicardConfig:
    n_paths: int = 10_000
    max_iters: int = 50
    tol: float = 1e-3

    def __post_init__(self):
        if self.n_paths < 1:
            raise SolverConfigError(f"picard.n_paths must be >= 1, got {self.n_paths}")
        if self.max_iters < 1:
            raise SolverConfigError(f"picard.max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0.0:
            raise SolverConfigError(f"picard.tol must be positive, got {self.tol}")


@dataclass(frozen=True)
class SolverConfig:
    n_particles: int = 10_000
    dt: float = 1e-3
    T: float = 0.25
    seed: int = 0
    bridge_correction: bool = False
    jump_threshold: float | None = None
    threads: int = 1
    picard: PicardConfig = field(default_factory=PicardConfig)

    def __post_init__(self):
        if self.n_particles < 1:
            raise SolverConfigError(f"n_particles must be >= 1, got {self.n_particles}")
        if not self.dt > 0.0:
            raise SolverConfigError(f"dt must be positive, got {self.dt}")
        if not self.T > 0.0:
            raise SolverConfigError(f"T must be positive, got {self.T}")
        k = round(self.T / self.dt)
        if k < 1 or abs(k * self.dt - self.T) > 1e-9 * max(self.T, 1.0):
            raise SolverConfigError(f"dt={self.dt} does not divide T={self.T} evenly")

    @property
    def n_steps(self):
        return round(self.T / self.dt)

    def t_grid(self):
        return np.linspace(0.0, self.T, self.n_steps + 1)

    def effective_jump_threshold(self):
        if self.jump_threshold is not None:
            return float(self.jump_threshold)
        return max(5.0 / self.n_particles, 10.0 * math.sqrt(self.dt))

    def to_dict(self):
        d = asdict(self)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        pic = d.pop("picard", None)
        known = {f for f in cls.__dataclass_fields__ if f != "picard"}
        extra = set(d) - known
        if extra:
            raise SolverConfigError(f"unknown config field {sorted(extra)[0]!r}")
        try:
            picard = PicardConfig(**pic) if pic else PicardConfig()
        except TypeError as exc:
            raise SolverConfigError(f"bad picard config: {exc}")
        return cls(picard=picard, **d)

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class FrontierPath:
    """Nondecreasing frontier on a uniform time grid, plus detected jumps."""

    t: np.ndarray
    lam: np.ndarray
    jumps: list = field(default_factory=list)  # (t, delta) with delta > threshold

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        if self.t.shape != self.lam.shape or self.t.ndim != 1:
            raise ValueError("frontier t and lam must be matching 1-d arrays")
        if np.any(np.diff(self.lam) < 0.0):
            raise ValueError("frontier must be nondecreasing")
        if self.lam[0] < 0.0 or self.lam[-1] > 1.0 + 1e-12:
            raise ValueError("frontier values must lie in [0, 1]")

    @property
    def alive_fraction(self):
        return 1.0 - self.lam

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,lambda,alive_fraction\n")
            for t, lam in zip(self.t, self.lam):
                fh.write(f"{float(t)!r},{float(lam)!r},{1.0 - float(lam)!r}\n")

    @staticmethod
    def read_csv(path):
        ts, lams = [], []
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            if header[:2] != ["t", "lambda"]:
                raise ValueError(f"{path}: expected header t,lambda,alive_fraction")
            for line in fh:
                parts = line.strip().split(",")
                if len(parts) < 2:
                    continue
                ts.append(float(parts[0]))
                lams.append(float(parts[1]))
        return FrontierPath(t=np.asarray(ts), lam=np.asarray(lams))


@dataclass
class ParticleEnsemble:
    n: int
    positions: np.ndarray  # full-length; entries of dead particles are stale
    alive: np.ndarray
    death_time: np.ndarray  # +inf while alive
    seed: int
    rng_streams: str = "philox(key=seed, counter=(block, kind)); lane = particle index"

    @property
    def dead_fraction(self):
        return 1.0 - float(np.count_nonzero(self.alive)) / self.n


@dataclass
class PicardResult:
    frontier: FrontierPath
    iterations: int
    history: list  # sup-change per iteration
    converged: bool
    iterates: list = field(default_factory=list)  # per-iteration frontiers, if kept


# ---------------------------------------------------------------------------
# cascade resolution
# ---------------------------------------------------------------------------


def _scan_sorted(y_sorted, n):
    """k* = min{k >= 0 : y_(k+1) > k/n} with y_(m+1) = +inf, for sorted y."""
    m = len(y_sorted)
    if m == 0:
        return 0
    ok = y_sorted > np.arange(m) / n
    hits = np.nonzero(ok)[0]
    return int(hits[0]) if len(hits) else m


def physical_jump_scan(values, n):
    """Jump size of the physical cascade on the empirical measure.

    Sorts the current positions and returns Delta = k*/n where k* is the
    smallest k with y_(k+1) > k/n (so the k* lowest particles die, and after
    the survivors shift down by Delta they all sit strictly above 0).
    """
    y = np.sort(np.asarray(values, dtype=float))
    if len(y) > n:
        raise ValueError(f"got {len(y)} positions for ensemble size {n}")
    return _scan_sorted(y, n) / n


def physical_jump_bruteforce(values, n, x_step=1e-6):
    """Reference cascade size: scan x = x_step, 2 x_step, ... for the first x
    with (#{0 < y_i <= x} + #{y_i <= 0}) / n < x, snapped to the k/n grid.

    Test oracle only; quadratic-ish in 1/x_step where the scan is O(m log m).
    """
    y = np.sort(np.asarray(values, dtype=float))
    if not x_step > 0.0:
        raise ValueError("x_step must be positive")
    # no x below the sub-zero mass fraction can satisfy counts/n < x
    c0 = int(np.searchsorted(y, 0.0, side="right"))
    j = max(1, int(math.floor(c0 / n / x_step)))
    block = 8192
    limit = int(math.ceil((1.0 + 2.0 / n) / x_step)) + 2
    while j <= limit:
        hi = min(j + block, limit + 1)
        xs = np.arange(j, hi) * x_step
        counts = np.searchsorted(y, xs, side="right")
        cond = counts / n < xs
        hit = np.nonzero(cond)[0]
        if len(hit):
            x = xs[hit[0]]
            return min(round(x * n), len(y)) / n
        # counts is nondecreasing, so every x at or below the last count line
        # fails too; the scan may jump there without skipping a candidate hit
        j = max(hi, int(math.floor(counts[-1] / n / x_step)))
    return min(1.0, len(y) / n)


def initial_jump_stratified(y0_sorted, n):
    """Discrete time-0 jump for a stratified ensemble y_(k) = F^{-1}((2k-1)/(2n)).

    Equals the infimum rule inf{x > 0 : F(x) < x} sampled at the stratified
    quantiles: the first index with y_(k) strictly above (2k-1)/(2n) caps the
    cascade at (k-1)/n; if every particle sits at or below its line the whole
    ensemble freezes (jump 1).
    """
    y0_sorted = np.asarray(y0_sorted, dtype=float)
    lines = (2.0 * np.arange(1, n + 1) - 1.0) / (2.0 * n)
    above = y0_sorted > lines
    hits = np.nonzero(above)[0]
    if len(hits) == 0:
        return 1.0
    return int(hits[0]) / n


# ---------------------------------------------------------------------------
# particle scheme
# ---------------------------------------------------------------------------


def simulate_particles(density: Density, cfg: SolverConfig):
    """Run the cascade-resolving Euler scheme; returns (FrontierPath, ParticleEnsemble).

    Initialization is stratified (X_i = F^{-1}((i - 1/2)/n)), which makes the
    time-0 jump deterministic. Each step: Gaussian increments for the alive
    particles, one exact cascade resolution, survivors shift down by the jump.
    With cfg.bridge_correction, survivors are additionally killed with the
    within-step barrier-crossing probability exp(-2 z_old z_new / dt) and the
    cascade reruns once, removing the O(sqrt(dt)) endpoint-monitoring bias.
    """
    n = cfg.n_particles
    K = cfg.n_steps
    t = cfg.t_grid()
    sqdt = math.sqrt(cfg.dt)
    threshold = cfg.effective_jump_threshold()

    u = (np.arange(n) + 0.5) / n
    pos = np.asarray(density.sample(u), dtype=float)
    lam0 = initial_jump_stratified(pos, n)
    alive = np.ones(n, dtype=bool)
    death_time = np.full(n, np.inf)
    n_dead0 = round(lam0 * n)
    if n_dead0 > 0:
        alive[:n_dead0] = False
        death_time[:n_dead0] = 0.0
        pos[alive] -= lam0

    lam = np.empty(K + 1)
    lam[0] = lam0
    jumps = []
    if lam0 > threshold:
        jumps.append((0.0, lam0))

    for k in range(1, K + 1):
        step_delta = 0.0
        if np.any(alive):
            xi = rng.normal_block(cfg.seed, rng.GAUSS_STEP, k, n)
            aidx = np.nonzero(alive)[0]
            z_old = pos[aidx].copy()
            pos[aidx] += sqdt * xi[aidx]

            order = np.argsort(pos[aidx], kind="stable")
            kstar = _scan_sorted(pos[aidx][order], n)
            if kstar > 0:
                dead = aidx[order[:kstar]]
                alive[dead] = False
                death_time[dead] = t[k]
                delta = kstar / n
                pos[alive] -= delta
                step_delta += delta

            if cfg.bridge_correction and np.any(alive):
                aidx2 = np.nonzero(alive)[0]
                keep = np.isin(aidx, aidx2)
                zo = z_old[keep]
                zn = pos[aidx2]
                ub = rng.uniform_block(cfg.seed, rng.BRIDGE, k, n)[aidx2]
                p_hit = np.exp(-2.0 * zo * zn / cfg.dt)
                crossed = ub < p_hit
                if np.any(crossed):
                    pos[aidx2[crossed]] = 0.0
                    order2 = np.argsort(pos[aidx2], kind="stable")
                    kstar2 = _scan_sorted(pos[aidx2][order2], n)
                    dead2 = aidx2[order2[:kstar2]]
                    alive[dead2] = False
                    death_time[dead2] = t[k]
                    delta2 = kstar2 / n
                    pos[alive] -= delta2
                    step_delta += delta2

        lam[k] = (n - int(np.count_nonzero(alive))) / n
        if step_delta > threshold:
            jumps.append((float(t[k]), step_delta))

    frontier = FrontierPath(t=t, lam=lam, jumps=jumps)
    ensemble = ParticleEnsemble(n=n, positions=pos, alive=alive,
                                death_time=death_time, seed=cfg.seed)
    return frontier, ensemble


# ---------------------------------------------------------------------------
# running-max sample paths
# ---------------------------------------------------------------------------


def _path_chunks(n_paths, chunk=_CHUNK):
    return [(lo, min(lo + chunk, n_paths)) for lo in range(0, n_paths, chunk)]


def _running_max_chunk(seed, stream, chunk_id, lo, hi, sq_steps, lam):
    """Y paths for chunk [lo, hi): running max of (-B + lam) on the grid."""
    m = hi - lo
    K = len(sq_steps)
    z = rng.normal_block(seed, stream, chunk_id, m * K).reshape(m, K)
    negb = np.empty((m, K + 1))
    negb[:, 0] = 0.0
    np.cumsum(z * -sq_steps, axis=1, out=negb[:, 1:])
    negb += lam[None, :]
    return np.maximum.accumulate(negb, axis=1)


def iter_y_chunks(frontier: FrontierPath, n_paths, seed, stream=rng.Y_SAMPLES):
    """Yield ((lo, hi), Y_chunk) running-max samples against the frontier.

    Chunks have a fixed layout, so any consumer that reduces in chunk order is
    deterministic regardless of how the chunks are processed.
    """
    sq_steps = np.sqrt(np.diff(frontier.t))
    lam = frontier.lam
    for chunk_id, (lo, hi) in enumerate(_path_chunks(n_paths)):
        yield (lo, hi), _running_max_chunk(seed, stream, chunk_id, lo, hi, sq_steps, lam)


def compute_Y_samples(frontier: FrontierPath, n_paths, seed, stream=rng.Y_SAMPLES):
    """Materialized (n_paths, K+1) running-max samples; mind the memory for
    large n_paths (the bounds estimators stream iter_y_chunks instead)."""
    out = np.empty((n_paths, len(frontier.t)))
    for (lo, hi), y in iter_y_chunks(frontier, n_paths, seed, stream=stream):
        out[lo:hi] = y
    return out


# ---------------------------------------------------------------------------
# minimal-solution iteration
# ---------------------------------------------------------------------------


def picard_minimal(density: Density, cfg: SolverConfig, keep_iterates=False):
    """Iterate Lambda <- mean_j F(running max of (-B_j + Lambda)) from 0.

    The same Brownian paths (common random numbers) are reused every iteration,
    which makes the iterates pointwise nondecreasing exactly: the running max
    is monotone in Lambda, F is evaluated through a monotone interpolation, and
    the per-chunk summation trees are fixed. Targets densities with no time-0
    jump; the iteration pins Lambda_0 = F(0) = 0.
    """
    K = cfg.n_steps
    t = cfg.t_grid()
    M = cfg.picard.n_paths
    sqdt = math.sqrt(cfg.dt)

    chunks = _path_chunks(M)
    negb32 = np.empty((M, K + 1), dtype=np.float32)
    for chunk_id, (lo, hi) in enumerate(chunks):
        z = rng.normal_block(cfg.seed, rng.PICARD_PATHS, chunk_id, (hi - lo) * K).reshape(hi - lo, K)
        path = np.empty((hi - lo, K + 1))
        path[:, 0] = 0.0
        np.cumsum(z * -sqdt, axis=1, out=path[:, 1:])
        negb32[lo:hi] = path.astype(np.float32)

    lam = np.zeros(K + 1)
    history = []
    iterates = []
    converged = False
    iterations = 0
    partial = np.empty((len(chunks), K + 1))

    def run_chunk(ci):
        lo, hi = chunks[ci]
        z = negb32[lo:hi].astype(np.float64) + lam[None, :]
        y = np.maximum.accumulate(z, axis=1)
        partial[ci] = np.asarray(density.cdf_fast(y)).sum(axis=0)

    for it in range(cfg.picard.max_iters):
        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                list(pool.map(run_chunk, range(len(chunks))))
        else:
            for ci in range(len(chunks)):
                run_chunk(ci)
        new_lam = partial.sum(axis=0) / M
        sup_change = float(np.max(np.abs(new_lam - lam)))
        history.append(sup_change)
        lam = new_lam
        if keep_iterates:
            iterates.append(lam.copy())
        iterations = it + 1
        if sup_change < cfg.picard.tol:
            converged = True
            break

    frontier = FrontierPath(t=t, lam=lam, jumps=[])
    return PicardResult(frontier=frontier, iterations=iterations,
                        history=history, converged=converged, iterates=iterates)
