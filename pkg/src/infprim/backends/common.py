"""Parameters, per-spin schedules and spin pinning shared by the samplers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..beliefs import Belief, CandidateSet
from ..errors import DimensionError, DomainError, UnsupportedClusterError
from ..ising import ClusterSet, IsingProblem, energies, fix_spin
from ..schedule import ScheduleFunctions, linear_schedule, uncertainty_heuristic


@dataclass(frozen=True)
class AnnealParams:
    """Sampler settings.

    ``temperature`` is the PIQA bath temperature and the final temperature of
    the classical annealer, whose ladder starts at ``t_hot``. ``tau`` counts
    sweeps per leg of the reverse/forward path.
    """

    temperature: float = 0.8246
    tau: int = 20
    trotter_slices: int = 30
    reads: int = 1
    seed: int | None = None
    t_hot: float = 3.0

    def __post_init__(self):
        if not self.temperature > 0:
            raise DomainError(f"temperature must be > 0, got {self.temperature}")
        if self.tau < 1:
            raise DomainError(f"tau must be >= 1, got {self.tau}")
        if self.trotter_slices < 1:
            raise DomainError(f"trotter_slices must be >= 1, got {self.trotter_slices}")
        if self.reads < 1:
            raise DomainError(f"reads must be >= 1, got {self.reads}")
        if not self.t_hot > 0:
            raise DomainError(f"t_hot must be > 0, got {self.t_hot}")

    def replace(self, **changes) -> "AnnealParams":
        from dataclasses import replace
        return replace(self, **changes)


def read_seeds(seed, reads: int) -> list[np.random.SeedSequence]:
    """Independent per-read seed sequences; read ``k`` never depends on ``reads``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (k,)) for k in range(reads)]


@dataclass(frozen=True, eq=False)
class ScheduleSpec:
    """Reverse-anneal targets and timing offsets for every cluster.

    The global parameter follows the triangle ``1 -> min(s') -> 1`` over
    ``2 * tau`` sweeps; cluster ``i`` sees ``max(s_global(t - offset_i), s'_i)``.
    """

    functions: ScheduleFunctions
    clusters: ClusterSet
    s_prime: np.ndarray
    offsets: np.ndarray
    tau: int

    def __post_init__(self):
        sp = np.array(self.s_prime, dtype=float).reshape(-1)
        off = np.zeros(len(self.clusters)) if self.offsets is None else np.array(self.offsets, dtype=float).reshape(-1)
        if sp.shape[0] != len(self.clusters) or off.shape[0] != len(self.clusters):
            raise DimensionError("s_prime and offsets need one entry per cluster")
        if np.any(sp < 0) or np.any(sp > 1):
            raise DomainError("s' values must lie in [0, 1]")
        if self.tau < 1:
            raise DomainError("tau must be >= 1")
        if len(self.clusters) == 0:
            raise DomainError("empty schedule")
        self.functions.check_shape()
        object.__setattr__(self, "s_prime", sp)
        object.__setattr__(self, "offsets", off)

    @property
    def s_min(self) -> float:
        return float(self.s_prime.min())

    @property
    def total_sweeps(self) -> int:
        return 2 * self.tau

    def s_global(self, t: float) -> float:
        """Triangle path evaluated at time ``t`` in sweeps; 1 outside ``[0, 2 tau]``."""
        lo, tau = self.s_min, self.tau
        if t <= 0 or t >= 2 * tau:
            return 1.0
        if t <= tau:
            return 1.0 - (1.0 - lo) * t / tau
        return lo + (1.0 - lo) * (t - tau) / tau

    def cluster_s(self, t: float) -> np.ndarray:
        return np.array([max(self.s_global(t - d), sp) for sp, d in zip(self.s_prime, self.offsets)])

    def spin_s_prime(self, n: int) -> np.ndarray:
        """Per-spin ``s'`` for singleton-only cluster sets."""
        if not self.clusters.all_singleton:
            raise UnsupportedClusterError("per-spin schedules need singleton clusters; "
                                          "multi-spin drivers are only available as classical cluster moves")
        idx = self.clusters.singleton_index(n)
        if np.any(idx < 0):
            raise DimensionError("schedule does not cover every spin")
        return self.s_prime[idx]

    def sweep_table(self, n: int) -> np.ndarray:
        """``(2 tau, n)`` per-spin ``s`` at sweep midpoints."""
        idx = self.clusters.singleton_index(n)
        self.spin_s_prime(n)
        rows = [self.cluster_s(k + 0.5)[idx] for k in range(self.total_sweeps)]
        return np.array(rows)


def build_schedule(belief: Belief, heuristic: Callable[[float], float] | None = None,
                   offsets: Sequence[float] | None = None, tau: int = 20,
                   functions: ScheduleFunctions | None = None) -> ScheduleSpec:
    """Turn cluster uncertainties into reverse-anneal targets ``s'_i = heuristic(P_i)``."""
    functions = functions or linear_schedule()
    heuristic = heuristic or uncertainty_heuristic(functions)
    s_prime = []
    for p in belief.P:
        if not 0.0 <= p <= 0.5:
            raise DomainError(f"P outside [0, 0.5]: {p}")
        s_prime.append(1.0 if p == 0.0 else 0.0 if p == 0.5 else float(heuristic(p)))
    return ScheduleSpec(functions, belief.R, np.array(s_prime), offsets, tau)


@dataclass(frozen=True, eq=False)
class FixedSpinReduction:
    """Problem with certain spins removed, plus what is needed to lift results back."""

    reduced: IsingProblem
    free: np.ndarray
    pinned: np.ndarray
    belief: Belief | None
    cluster_map: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def mapping(self) -> np.ndarray:
        return self.free

    def lift(self, G: np.ndarray) -> np.ndarray:
        G = np.asarray(G, dtype=np.int8)
        if G.ndim == 1:
            G = G[None, :]
        out = np.tile(self.pinned, (G.shape[0], 1))
        out[:, self.free] = G
        return out


def apply_fixed_spins(problem: IsingProblem, belief: Belief) -> FixedSpinReduction:
    """Fold every singleton cluster with ``P = 0`` into fields at value ``S_i``.

    Multi-spin clusters lose their pinned members; clusters left empty or
    duplicated by that are dropped.
    """
    if belief.n != problem.n:
        raise DimensionError(f"belief covers {belief.n} bits, problem has {problem.n}")
    pin: set[int] = set()
    for c, p in zip(belief.R, belief.P):
        if p == 0.0:
            if len(c) > 1:
                raise UnsupportedClusterError(f"cannot pin multi-spin cluster {c} with P = 0")
            pin.add(c[0])
    reduced = problem
    for i in sorted(pin, reverse=True):
        reduced = fix_spin(reduced, i, int(belief.S[i]))
    free = np.array([i for i in range(problem.n) if i not in pin], dtype=np.int64)
    new_index = -np.ones(problem.n, dtype=np.int64)
    new_index[free] = np.arange(free.size)
    pinned = np.array(belief.S, dtype=np.int8)

    clusters, P, keep, seen = [], [], [], set()
    for k, (c, p) in enumerate(zip(belief.R, belief.P)):
        members = tuple(int(new_index[i]) for i in c if i not in pin)
        if not members or members in seen:
            continue
        seen.add(members)
        clusters.append(members)
        P.append(p)
        keep.append(k)
    red_belief = Belief(ClusterSet(tuple(clusters)), belief.S[free], P) if free.size else None
    return FixedSpinReduction(reduced, free, pinned, red_belief, np.array(keep, dtype=np.int64))


def lift_candidates(problem: IsingProblem, red: FixedSpinReduction, G_reduced) -> CandidateSet:
    G = red.lift(G_reduced)
    return CandidateSet(G, energies(problem, G))


def pinned_only(problem: IsingProblem, red: FixedSpinReduction, reads: int) -> CandidateSet:
    return lift_candidates(problem, red, np.zeros((reads, 0), dtype=np.int8))
