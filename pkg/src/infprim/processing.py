"""Processing functions: candidate collections in, beliefs ``{S, P}`` out.

A collection is a sequence of :class:`CandidateSet` objects, one per
upstream primitive call. Single-stream heuristics accept either one set or a
collection, which is flattened first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Callable, Sequence, Union

import numpy as np

from .beliefs import Belief, CandidateSet
from .errors import (ArityError, ConsistencyError, DegenerateWeightError, DimensionError,
                     DomainError, EmptyEliteSet, EmptyInputError)
from .ising import ClusterSet, IsingProblem

Collection = Sequence[CandidateSet]
Candidates = Union[CandidateSet, Collection]
EXHAUSTIVE_ALIGN_MAX = 12


def flatten(collection: Collection) -> CandidateSet:
    """Concatenate candidate lists; entry ``(k, j)`` lands at ``k * N_out + j``."""
    collection = list(collection)
    if not collection:
        return CandidateSet(np.zeros((0, 0), dtype=np.int8), np.zeros(0))
    n_out, n = len(collection[0]), collection[0].n
    for c in collection:
        if len(c) != n_out or c.n != n:
            raise DimensionError("ragged collection: every set needs the same reads and bits")
    return CandidateSet(np.concatenate([c.G for c in collection]),
                        np.concatenate([c.E for c in collection]))


def _as_set(cands: Candidates) -> CandidateSet:
    return cands if isinstance(cands, CandidateSet) else flatten(cands)


def unique(cands: CandidateSet) -> CandidateSet:
    """Keep the first occurrence of every distinct candidate."""
    if len(cands) == 0:
        return cands
    _, first, inverse = np.unique(cands.G, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    if not np.array_equal(cands.E, cands.E[first][inverse]):
        raise ConsistencyError("identical candidates carry different energies")
    keep = np.sort(first)
    return CandidateSet(cands.G[keep], cands.E[keep])


def _sign(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0, 1, -1).astype(np.int8)


# -- weighting ------------------------------------------------------------

def binomial_weight(cluster_size: int, distance: int) -> float:
    """``1 / C(cluster_size, distance)``."""
    if not 0 <= distance <= cluster_size:
        raise DomainError(f"distance {distance} outside [0, {cluster_size}]")
    return 1.0 / math.comb(cluster_size, distance)


@dataclass(frozen=True)
class WeightingFactor:
    """Energy part of the candidate weight: ``uniform``, ``thermal`` or ``elite``.

    The bit part is always the inverse binomial of the Hamming distance to ``S``.
    """

    energy_part: str = "uniform"
    T: float | None = None
    E_elite: float | None = None

    def __post_init__(self):
        if self.energy_part not in ("uniform", "thermal", "elite"):
            raise DomainError(f"unknown energy weighting {self.energy_part!r}")
        if self.energy_part == "thermal" and not (self.T and self.T > 0):
            raise DomainError("thermal weighting needs T > 0")
        if self.energy_part == "elite" and self.E_elite is None:
            raise DomainError("elite weighting needs E_elite")

    def energy_weights(self, E: np.ndarray) -> np.ndarray:
        if self.energy_part == "uniform":
            return np.ones_like(E)
        if self.energy_part == "elite":
            return (self.E_elite - E > 0).astype(float)
        # the shift by min(E) cancels between numerator and denominator
        return np.exp(-(E - E.min()) / self.T) if E.size else E


def cluster_uncertainty(G, E, S, cluster: Sequence[int], W: WeightingFactor = WeightingFactor()) -> float:
    """Weighted fraction of candidates closer to ``-S`` than ``S`` on ``cluster``, capped at 0.5.

    Candidates with zero overlap count only in the denominator.
    """
    G = np.asarray(G)
    E = np.asarray(E, dtype=float)
    cluster = np.asarray(cluster, dtype=np.int64)
    if cluster.size == 0:
        raise DomainError("cluster must be non-empty")
    if G.shape[0] == 0:
        raise EmptyInputError("no candidates")
    S_R = np.asarray(S)[cluster]
    sub = G[:, cluster]
    overlap = (sub * S_R).sum(axis=1) / cluster.size
    dist = np.count_nonzero(sub != S_R, axis=1)
    w_bits = np.array([1.0 / math.comb(cluster.size, int(d)) for d in dist])
    w = W.energy_weights(E) * w_bits
    total = w.sum()
    if total <= 0:
        raise DegenerateWeightError(f"all candidate weights vanish on cluster {tuple(cluster.tolist())}")
    return float(min(w[overlap < 0].sum() / total, 0.5))


# -- single-stream heuristics ---------------------------------------------------

def f_init(R: ClusterSet, n: int | None = None) -> Belief:
    """No information: ``P = 0.5`` everywhere and ``S = +1``."""
    n = R.max_bit() + 1 if n is None else n
    return Belief(R, np.ones(n, dtype=np.int8), np.full(len(R), 0.5))


def _weighted_belief(G: np.ndarray, R: ClusterSet, W: WeightingFactor, E: np.ndarray) -> Belief:
    w = W.energy_weights(E)
    S = _sign(w @ G.astype(float))
    P = []
    for c in R:
        if len(c) == 1:
            i = c[0]
            total = w.sum()
            if total <= 0:
                raise DegenerateWeightError("all candidate weights vanish")
            P.append(min(float(w[G[:, i] == -S[i]].sum() / total), 0.5))
        else:
            P.append(cluster_uncertainty(G, E, S, c, W))
    return Belief(R, S, P)


def belief_raw(cands: Candidates, R: ClusterSet) -> Belief:
    """Majority bit values and disagreement fractions over all candidates."""
    cands = _as_set(cands)
    if len(cands) == 0:
        raise EmptyInputError("belief_raw needs at least one candidate")
    return _weighted_belief(cands.G, R, WeightingFactor(), cands.E)


def elite_subset(cands: CandidateSet, E_elite: float) -> CandidateSet:
    mask = E_elite - cands.E > 0
    if not mask.any():
        raise EmptyEliteSet(f"no candidate below the elite threshold {E_elite}")
    return CandidateSet(cands.G[mask], cands.E[mask])


def belief_elite(cands: Candidates, R: ClusterSet, E_elite: float,
                 convention: str = "disagreement") -> Belief:
    """:func:`belief_raw` restricted to candidates with ``E < E_elite``.

    ``convention="literal"`` instead uses the agreement fraction, capped at 0.5.
    """
    cands = _as_set(cands)
    if len(cands) == 0:
        raise EmptyInputError("belief_elite needs at least one candidate")
    elite = elite_subset(cands, E_elite)
    if convention == "disagreement":
        return belief_raw(elite, R)
    if convention != "literal":
        raise DomainError(f"unknown elite convention {convention!r}")
    base = belief_raw(elite, R)
    G = elite.G
    P = [min(float(np.mean(G[:, list(c)] == base.S[list(c)])), 0.5) for c in R]
    return Belief(R, base.S, P)


def belief_thermal(cands: Candidates, R: ClusterSet, T: float) -> Belief:
    """Boltzmann-weighted statistics over the unique candidates."""
    if not T > 0:
        raise DomainError(f"T must be > 0, got {T}")
    cands = _as_set(cands)
    if len(cands) == 0:
        raise EmptyInputError("belief_thermal needs at least one candidate")
    u = unique(cands)
    return _weighted_belief(u.G, R, WeightingFactor("thermal", T=T), u.E)


def f_fix(cands: Candidates, R: ClusterSet, E_elite: float) -> Belief:
    """Pin bits unanimous across the elite subset (``P = 0``); leave the rest at 0.5."""
    cands = _as_set(cands)
    if len(cands) == 0:
        raise EmptyInputError("f_fix needs at least one candidate")
    G = elite_subset(cands, E_elite).G
    S = _sign(G.sum(axis=0))
    unanimous = np.all(G == G[0], axis=0)
    P = [0.0 if len(c) == 1 and unanimous[c[0]] else 0.5 for c in R]
    return Belief(R, S, P)


def f_local_search(cands: Candidates, R: ClusterSet, p_next: float) -> Belief:
    """Centre the next search on the best candidate with uniform uncertainty ``p_next``."""
    if not 0.0 <= p_next <= 0.5:
        raise DomainError(f"p_next must lie in [0, 0.5], got {p_next}")
    cands = _as_set(cands)
    if len(cands) == 0:
        raise EmptyInputError("f_local_search needs at least one candidate")
    best, _ = cands.best
    return Belief.uniform(R, best, p_next)


def f_best(cands: Candidates, R: ClusterSet) -> Belief:
    """Post-processing: report the best candidate as a certain belief."""
    return f_local_search(cands, R, 0.0)


# -- multi-stream heuristics -----------------------------------------------------

def genetic_combine(collection: Collection, R: ClusterSet, p_agree: float = 0.1,
                    heuristic: str = "agreement",
                    inner: Callable[[CandidateSet, ClusterSet], Belief] | None = None) -> Belief:
    """Breed a belief from several parent candidate lists.

    ``agreement``: compare the best candidate of each parent; bits shared by all
    get ``P = p_agree``, the rest 0.5 with ``S`` from the lowest-energy parent.
    A multi-bit cluster counts as agreeing only if all its bits do.
    ``flatten``: apply ``inner`` (default :func:`belief_raw`) to the flattened lists.
    """
    collection = list(collection)
    if heuristic == "flatten":
        return (inner or belief_raw)(flatten(collection), R)
    if heuristic != "agreement":
        raise DomainError(f"unknown genetic heuristic {heuristic!r}")
    if len(collection) < 2:
        raise ArityError(f"agreement needs at least two parents, got {len(collection)}")
    if not 0.0 < p_agree < 0.5:
        raise DomainError(f"p_agree must lie in (0, 0.5), got {p_agree}")
    bests = [c.best for c in collection]
    configs = np.array([g for g, _ in bests])
    lead = configs[int(np.argmin([e for _, e in bests]))]
    agree = np.all(configs == configs[0], axis=0)
    P = [p_agree if agree[list(c)].all() else 0.5 for c in R]
    return Belief(R, lead, P)


def _alignment_score(bests: np.ndarray, flips: np.ndarray) -> float:
    X = bests * flips[:, None]
    C = X @ X.T / X.shape[1]
    k = X.shape[0]
    return float((C.sum() - np.trace(C)) / (k * (k - 1))) if k > 1 else 1.0


def best_alignment(bests: np.ndarray, seed=None) -> np.ndarray:
    """Inversion pattern (first entry +1) maximising mean pairwise correlation."""
    k = bests.shape[0]
    if k <= 1:
        return np.ones(k, dtype=np.int8)
    if k <= EXHAUSTIVE_ALIGN_MAX:
        best, best_score = None, -np.inf
        for tail in product((1, -1), repeat=k - 1):
            f = np.array((1,) + tail, dtype=np.int8)
            score = _alignment_score(bests, f)
            if score > best_score + 1e-12:
                best, best_score = f, score
        return best
    # simulated annealing over flip patterns
    rng = np.random.default_rng(seed)
    C = bests.astype(float) @ bests.T.astype(float)
    np.fill_diagonal(C, 0.0)
    f = np.ones(k)
    score = f @ C @ f
    best, best_score = f.copy(), score
    for T in np.geomspace(2.0 * bests.shape[1], 1e-3, 200 * k):
        i = rng.integers(k)
        delta = -4.0 * f[i] * (C[i] @ f)
        if delta >= 0 or rng.random() < math.exp(delta / T):
            f[i] = -f[i]
            score += delta
            if score > best_score:
                best, best_score = f.copy(), score
    if best[0] < 0:
        best = -best
    return best.astype(np.int8)


def align_inversions(collection: Collection, problem: IsingProblem, mode: str = "majority",
                     seed=None) -> list[CandidateSet]:
    """Break global flip symmetry across candidate lists of a field-free problem.

    ``majority`` flips every list holding more -1 than +1 entries overall;
    ``search`` picks the inversion pattern whose best candidates correlate most.
    Problems with any non-zero field are returned unchanged.
    """
    collection = list(collection)
    if not problem.field_free or not collection:
        return collection
    if mode == "majority":
        return [c.flipped() if np.sum(c.G, dtype=np.int64) < 0 else c for c in collection]
    if mode != "search":
        raise DomainError(f"unknown alignment mode {mode!r}")
    bests = np.array([c.best[0] for c in collection], dtype=np.int8)
    flips = best_alignment(bests, seed)
    return [c if f > 0 else c.flipped() for c, f in zip(collection, flips)]


# -- registry used by protocol files ------------------------------------------

SINGLE_STREAM = {"raw", "elite", "thermal", "fix", "local_search", "best"}
MULTI_STREAM = {"genetic_agreement"}
ALL_FUNCTIONS = SINGLE_STREAM | MULTI_STREAM | {"init"}
FUNCTION_PARAMS = {
    "init": set(),
    "raw": set(),
    "best": set(),
    "elite": {"E_elite", "convention"},
    "thermal": {"T"},
    "fix": {"E_elite"},
    "local_search": {"p", "p_ladder"},
    "genetic_agreement": {"p_agree"},
}
REQUIRED_PARAMS = {"elite": {"E_elite"}, "thermal": {"T"}, "fix": {"E_elite"},
                   "local_search": set(), "genetic_agreement": {"p_agree"}}


def apply_function(fn: str, params: dict, collection: Collection, R: ClusterSet, n: int,
                   round_index: int = 0) -> Belief:
    """Evaluate a named processing function on a collection (flattened when single-stream)."""
    if fn == "init":
        return f_init(R, n)
    if fn == "genetic_agreement":
        return genetic_combine(collection, R, params["p_agree"])
    cands = flatten(collection)
    if fn == "raw":
        return belief_raw(cands, R)
    if fn == "best":
        return f_best(cands, R)
    if fn == "elite":
        return belief_elite(cands, R, params["E_elite"], params.get("convention", "disagreement"))
    if fn == "thermal":
        return belief_thermal(cands, R, params["T"])
    if fn == "fix":
        return f_fix(cands, R, params["E_elite"])
    if fn == "local_search":
        if "p_ladder" in params:
            ladder = params["p_ladder"]
            p = ladder[min(round_index, len(ladder) - 1)]
        else:
            p = params.get("p", 0.2)
        return f_local_search(cands, R, p)
    raise DomainError(f"unknown processing function {fn!r}")
