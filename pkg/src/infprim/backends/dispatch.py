"""The inference primitive: belief in, candidate list out."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..beliefs import Belief, CandidateSet
from ..errors import DimensionError, DomainError
from ..ising import IsingProblem, energies
from ..schedule import ScheduleFunctions
from .common import AnnealParams, apply_fixed_spins, build_schedule
from .piqa import piqa_sample
from .sa import sa_sample

BACKENDS = ("piqa", "sa", "bp")


def infer(backend: str, belief: Belief, problem: IsingProblem, params: AnnealParams, *,
          functions: ScheduleFunctions | None = None,
          heuristic: Callable[[float], float] | None = None,
          offsets: Sequence[float] | None = None, bp_params=None,
          workers: int = 1) -> CandidateSet:
    """Run one primitive call and return candidates in the full spin space.

    Certain bits (singleton clusters with ``P = 0``) are folded into fields
    first; the remaining problem is sampled by ``backend`` starting from the
    belief's ``S`` and the results are lifted back with energies recomputed
    on ``problem``.

    Args:
        backend: ``"piqa"``, ``"sa"`` or ``"bp"``.
        offsets: optional freeze-synchronisation offsets (sweeps), one per cluster of ``belief.R``.
        bp_params: :class:`~infprim.bp.BPParams` for the ``"bp"`` backend; its
            temperature defaults to ``params.temperature``.
    """
    if backend not in BACKENDS:
        raise DomainError(f"unknown backend {backend!r}; choose from {BACKENDS}")
    if belief.n != problem.n:
        raise DimensionError(f"belief covers {belief.n} bits, problem has {problem.n}")
    if backend == "bp":
        from ..bp import BPParams, bp_as_primitive
        bp_params = bp_params or BPParams(T=params.temperature)
        return bp_as_primitive(problem, belief, bp_params, params.reads, params.seed)

    red = apply_fixed_spins(problem, belief)
    if red.free.size == 0:
        G = red.lift(np.zeros((params.reads, 0), dtype=np.int8))
        return CandidateSet(G, energies(problem, G))
    rb = red.belief
    if backend == "piqa":
        red_offsets = None if offsets is None else np.asarray(offsets, dtype=float)[red.cluster_map]
        sched = build_schedule(rb, heuristic, red_offsets, params.tau, functions)
        sub = piqa_sample(red.reduced, rb.S, sched, params, workers=workers)
    else:
        sub = sa_sample(red.reduced, rb.S, rb, params, workers=workers)
    G = red.lift(sub.G)
    return CandidateSet(G, energies(problem, G))
