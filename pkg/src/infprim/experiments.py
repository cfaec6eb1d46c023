"""Calibration histogram and the traditional vs. local-search comparison."""

from __future__ import annotations

import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .backends import AnnealParams, infer
from .errors import DomainError
from .ising import EXHAUSTIVE_CAP, ClusterSet, IsingProblem, exhaustive_solve, sk_fix
from .processing import belief_raw, f_init
from .protocol import run_protocol, template_local_search, template_traditional


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for the calibration run. ``n`` is the SK size before the last spin is fixed."""

    instances: int = 100
    n: int = 12
    reads: int = 201
    bins: int = 10
    seed: int = 0
    temperature: float = 0.8246
    tau: int = 20
    trotter_slices: int = 30
    backend: str = "piqa"
    workers: int = 1

    def __post_init__(self):
        if self.instances < 1 or self.reads < 1:
            raise DomainError("instance and read counts must be positive")
        if self.bins < 2:
            raise DomainError("bins must be >= 2")
        if self.n < 3:
            raise DomainError("n must be >= 3")
        if self.n - 1 > EXHAUSTIVE_CAP:
            raise DomainError(f"n - 1 = {self.n - 1} exceeds the exhaustive cap {EXHAUSTIVE_CAP}")

    @classmethod
    def full_scale(cls, **kw) -> "ExperimentConfig":
        return cls(**{"instances": 1500, "n": 17, "reads": 1001, **kw})

    def anneal_params(self) -> AnnealParams:
        return AnnealParams(temperature=self.temperature, tau=self.tau,
                            trotter_slices=self.trotter_slices, reads=self.reads)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def instance_seed(seed: int, k: int, stream: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(k, stream))


def unique_ground_state(problem: IsingProblem) -> tuple[np.ndarray, float]:
    """The single ground state of ``problem``; degenerate instances are refused."""
    configs, e0 = exhaustive_solve(problem)
    if len(configs) != 1:
        raise DomainError(f"instance has {len(configs)} ground states; a unique one is required")
    return configs[0], e0


def calibration_instance(problem: IsingProblem, params: AnnealParams, backend: str = "piqa"):
    """One traditional call; returns per-bit ``(S, P, ground)``."""
    ground, _ = unique_ground_state(problem)
    R = ClusterSet.singletons(problem.n)
    cands = infer(backend, f_init(R, problem.n), problem, params)
    belief = belief_raw(cands, R)
    return belief.S, belief.P, ground


@dataclass
class Histogram:
    edges: np.ndarray
    total: np.ndarray
    agree: np.ndarray
    disagree: np.ndarray
    config: dict = field(default_factory=dict)

    @property
    def error_fraction(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.total > 0, self.disagree / np.maximum(self.total, 1), np.nan)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# config: {json.dumps(self.config, sort_keys=True)}\n")
        buf.write("# counts include every bit of every instance, sampled ground state or not\n")
        buf.write("bin_lo,bin_hi,total,agree,disagree,error_fraction\n")
        for k in range(len(self.total)):
            frac = self.error_fraction[k]
            buf.write(f"{float(self.edges[k])!r},{float(self.edges[k + 1])!r},{int(self.total[k])},{int(self.agree[k])},"
                      f"{int(self.disagree[k])},{'' if np.isnan(frac) else repr(float(frac))}\n")
        return buf.getvalue()


def histogram_from_bits(P: np.ndarray, correct: np.ndarray, bins: int) -> Histogram:
    """Bin uncertainties over ``[0, 0.5]`` (right edge inclusive) and split by correctness."""
    edges = np.linspace(0.0, 0.5, bins + 1)
    total, _ = np.histogram(P, bins=edges)
    agree, _ = np.histogram(P[correct], bins=edges)
    return Histogram(edges, total, agree, total - agree)


def calibration_histogram(cfg: ExperimentConfig) -> Histogram:
    """Run the calibration experiment over ``cfg.instances`` fresh SK instances."""
    params = cfg.anneal_params()

    def one(k: int):
        problem = sk_fix(cfg.n, instance_seed(cfg.seed, k))
        S, P, ground = calibration_instance(problem, params.replace(seed=instance_seed(cfg.seed, k, 1)),
                                            cfg.backend)
        return P, S == ground

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(one, range(cfg.instances)))
    else:
        results = [one(k) for k in range(cfg.instances)]
    P = np.concatenate([p for p, _ in results])
    correct = np.concatenate([c for _, c in results])
    hist = histogram_from_bits(P, correct, cfg.bins)
    hist.config = asdict(cfg)
    return hist


def monotone_trend(error_fraction, max_inversions: int = 1, ratio: float = 3.0) -> tuple[bool, str]:
    """Check that error fractions rise across bins.

    Empty bins are skipped. Passes with at most ``max_inversions`` adjacent
    decreases and a top bin at least ``ratio`` times the bottom bin.
    """
    f = np.asarray(error_fraction, dtype=float)
    f = f[~np.isnan(f)]
    if f.size < 2:
        return False, "fewer than two populated bins"
    inversions = int(np.sum(np.diff(f) < 0))
    if f[0] == 0:
        ratio_ok = f[-1] > 0
    else:
        ratio_ok = f[-1] >= ratio * f[0]
    detail = f"inversions={inversions} bottom={f[0]:.4f} top={f[-1]:.4f}"
    return inversions <= max_inversions and ratio_ok, detail


@dataclass
class Comparison:
    hits_traditional: np.ndarray
    hits_local: np.ndarray

    @property
    def rate_traditional(self) -> float:
        return float(self.hits_traditional.mean())

    @property
    def rate_local(self) -> float:
        return float(self.hits_local.mean())

    @property
    def fraction_local_worse(self) -> float:
        return float(np.mean(self.hits_local.mean(axis=1) < self.hits_traditional.mean(axis=1)))


def compare_protocols(instances: int = 20, n: int = 12, budget: int = 12, rounds: int = 2,
                      p_ladder=None, runs: int = 5, seed: int = 0, backend: str = "piqa",
                      params: AnnealParams | None = None, workers: int = 1) -> Comparison:
    """Ground-state hit indicators of both templates at equal total reads.

    The traditional template spends ``budget`` reads in one call; the local
    search spreads the same budget over ``rounds + 1`` calls. Returns arrays
    of shape ``(instances, runs)``.
    """
    if budget % (rounds + 1):
        raise DomainError("budget must divide evenly over rounds + 1 calls")
    p_ladder = p_ladder or list(np.linspace(0.3, 0.1, rounds))
    params = params or AnnealParams()
    trad = template_traditional(backend=backend, anneal_params=params.replace(reads=budget))
    local = template_local_search(rounds, p_ladder, backend=backend,
                                  anneal_params=params.replace(reads=budget // (rounds + 1)))
    hits_t = np.zeros((instances, runs), dtype=bool)
    hits_l = np.zeros((instances, runs), dtype=bool)
    for k in range(instances):
        problem = sk_fix(n, instance_seed(seed, k))
        _, e0 = exhaustive_solve(problem)
        tol = 1e-9 * max(1.0, abs(e0))
        for j in range(runs):
            run_seed = int(instance_seed(seed, k, 2 + j).generate_state(1)[0])
            hits_t[k, j] = run_protocol(trad, problem, run_seed, workers).best_energy <= e0 + tol
            hits_l[k, j] = run_protocol(local, problem, run_seed, workers).best_energy <= e0 + tol
    return Comparison(hits_t, hits_l)
