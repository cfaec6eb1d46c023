"""Sum-product belief propagation on pairwise Ising models.

Messages are cavity fields: ``u[i->j]`` is the effective field that spin
``i`` exerts on ``j`` once the edge ``(i, j)`` is removed,

    u[i->j] = (T/2) * [logcosh((J_ij + g)/T) - logcosh((J_ij - g)/T)],
    g = h_i + sum_{k in N(i), k != j} u[k->i],

and the marginal of ``i`` is ``b_i(s) ∝ exp(s * (h_i + sum_k u[k->i]) / T)``.
Updates are synchronous with damping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .backends.common import apply_fixed_spins
from .beliefs import Belief, CandidateSet
from .errors import DomainError, UnsupportedClusterError
from .ising import ClusterSet, IsingProblem, energies


@dataclass(frozen=True)
class BPParams:
    T: float = 1.0
    max_iters: int = 1000
    damping: float = 0.3
    tolerance: float = 1e-12

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError(f"T must be > 0, got {self.T}")
        if not 0.0 <= self.damping < 1.0:
            raise DomainError(f"damping must lie in [0, 1), got {self.damping}")
        if not self.tolerance > 0:
            raise DomainError("tolerance must be > 0")
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")


@dataclass(frozen=True, eq=False)
class Marginals:
    """Per-bit ``(b(+1), b(-1))`` rows plus convergence diagnostics."""

    b: np.ndarray
    converged: bool = True
    iterations: int = 0
    fields: np.ndarray | None = None

    def __post_init__(self):
        b = np.array(self.b, dtype=float).reshape(-1, 2)
        if np.any(b < 0) or np.any(b.sum(axis=1) <= 0):
            raise DomainError("marginals must be non-negative with positive total")
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.b.shape[0]

    def to_csv(self, belief: Belief | None = None, comment: str | None = None) -> str:
        belief = belief or marginal_to_belief(self, ClusterSet.singletons(self.n))
        lines = [f"# converged={self.converged} iterations={self.iterations}"]
        if comment:
            lines.append(f"# {comment}")
        lines.append("bit,b_plus,b_minus,S,P")
        for i, (bp, bm) in enumerate(self.b):
            lines.append(f"{i},{float(bp)!r},{float(bm)!r},{int(belief.S[i])},{float(belief.P[i])!r}")
        return "\n".join(lines) + "\n"


def _logcosh(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - np.log(2.0)


def bp_run(problem: IsingProblem, params: BPParams = BPParams()) -> Marginals:
    """Damped synchronous sum-product; stops when the largest message change < tolerance.

    Non-convergence is reported through ``Marginals.converged``.
    """
    T = params.T
    n = problem.n
    src = np.concatenate([problem.edges[:, 0], problem.edges[:, 1]])
    dst = np.concatenate([problem.edges[:, 1], problem.edges[:, 0]])
    Jd = np.concatenate([problem.J, problem.J])
    m = src.size
    # reverse[e] is the index of the message travelling the opposite way
    half = problem.J.size
    reverse = np.concatenate([np.arange(half, m), np.arange(half)])
    u = np.zeros(m)
    converged = m == 0
    it = 0
    for it in range(1, params.max_iters + 1):
        if m == 0:
            break
        total = problem.h + np.bincount(dst, weights=u, minlength=n)
        cavity = total[src] - u[reverse]
        new = 0.5 * T * (_logcosh((Jd + cavity) / T) - _logcosh((Jd - cavity) / T))
        new = (1.0 - params.damping) * new + params.damping * u
        delta = float(np.max(np.abs(new - u)))
        u = new
        if delta < params.tolerance:
            converged = True
            break
    g = problem.h + (np.bincount(dst, weights=u, minlength=n) if m else 0.0)
    b = np.stack([expit(2.0 * g / T), expit(-2.0 * g / T)], axis=1)
    return Marginals(b, converged, it if m else 0, g)


def marginal_to_belief(m: Marginals, R: ClusterSet | None = None) -> Belief:
    """``S = sgn(b+ - b-)`` (ties to +1), ``P = 0.5 (1 - |b+ - b-| / (b+ + b-))``."""
    R = R if R is not None else ClusterSet.singletons(m.n)
    if not R.all_singleton:
        raise UnsupportedClusterError("marginal conversion is defined for single-bit clusters only")
    bp, bm = m.b[:, 0], m.b[:, 1]
    S = np.where(bp - bm >= 0, 1, -1).astype(np.int8)
    bits = np.array([c[0] for c in R], dtype=np.int64)
    P = 0.5 * (1.0 - np.abs(bp[bits] - bm[bits]) / (bp[bits] + bm[bits]))
    return Belief(R, S, np.clip(P, 0.0, 0.5))


def dynamic_update(m: Marginals, belief: Belief) -> Belief:
    """Replace ``{S, P}`` of a singleton belief by the marginal values."""
    return marginal_to_belief(m, belief.R)


def prior_fields(belief: Belief, T: float) -> np.ndarray:
    """Nishimori-consistent prior ``(T/2) ln((1-P)/P) S`` per bit; zero at ``P = 0.5``."""
    if not belief.R.all_singleton:
        raise UnsupportedClusterError("BP priors need singleton clusters")
    out = np.zeros(belief.n)
    for (i,), p in zip(belief.R, belief.P):
        if p == 0.0:
            out[i] = np.inf * belief.S[i]
        else:
            out[i] = 0.5 * T * np.log((1.0 - p) / p) * belief.S[i]
    return out


def bp_as_primitive(problem: IsingProblem, belief_in: Belief, params: BPParams = BPParams(),
                    reads: int = 1, seed=None) -> CandidateSet:
    """Sample ``reads`` configurations from the product of BP marginals.

    The belief enters as prior fields; bits with ``P = 0`` are pinned to ``S``
    by removing them from the problem before message passing.
    """
    if reads < 1:
        raise DomainError("reads must be >= 1")
    red = apply_fixed_spins(problem, belief_in)
    rng = np.random.default_rng(seed)
    if red.free.size == 0:
        G = red.lift(np.zeros((reads, 0), dtype=np.int8))
        return CandidateSet(G, energies(problem, G))
    fields = prior_fields(red.belief, params.T)
    sub = IsingProblem(red.reduced.n, red.reduced.h + fields, red.reduced.edges, red.reduced.J,
                       red.reduced.offset)
    marg = bp_run(sub, params)
    p_plus = marg.b[:, 0] / marg.b.sum(axis=1)
    draws = rng.random((reads, sub.n))
    G_red = np.where(draws < p_plus, 1, -1).astype(np.int8)
    G = red.lift(G_red)
    return CandidateSet(G, energies(problem, G))
