"""Classical simulated annealing whose move temperatures follow the belief.

The base ladder falls geometrically from ``t_hot`` to ``temperature`` over
``tau`` sweeps. A bit in singleton cluster ``i`` proposes flips at
``2 P_i`` times the ladder, so ``P = 0.5`` anneals normally and ``P = 0``
never moves. Multi-spin clusters get one collective-flip proposal per sweep
at their own scaled temperature.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numba import njit

from ..beliefs import Belief, CandidateSet
from ..errors import DimensionError
from ..ising import IsingProblem, as_config, energies
from .common import AnnealParams, read_seeds


@njit(cache=True, nogil=True)
def _sa_kernel(Jd, h, spins, t_spin, c_ptr, c_idx, t_cluster, u_spin, u_cluster):
    n = spins.shape[0]
    lf = np.empty(n)
    for i in range(n):
        acc = h[i]
        for j in range(n):
            acc += Jd[i, j] * spins[j]
        lf[i] = acc
    n_clusters = c_ptr.shape[0] - 1
    for k in range(t_spin.shape[0]):
        for i in range(n):
            T = t_spin[k, i]
            if T <= 0.0:
                continue
            s = spins[i]
            dE = 2.0 * s * lf[i]
            if dE <= 0.0 or u_spin[k, i] < np.exp(-dE / T):
                spins[i] = -s
                for j in range(n):
                    lf[j] -= 2.0 * s * Jd[j, i]
        for c in range(n_clusters):
            T = t_cluster[k, c]
            if T <= 0.0:
                continue
            a, b = c_ptr[c], c_ptr[c + 1]
            dE = 0.0
            for x in range(a, b):
                i = c_idx[x]
                dE += 2.0 * spins[i] * lf[i]
                for y in range(x + 1, b):
                    j = c_idx[y]
                    dE -= 4.0 * Jd[i, j] * spins[i] * spins[j]
            if dE <= 0.0 or u_cluster[k, c] < np.exp(-dE / T):
                for x in range(a, b):
                    i = c_idx[x]
                    s = spins[i]
                    spins[i] = -s
                    for j in range(n):
                        lf[j] -= 2.0 * s * Jd[j, i]


def temperature_ladder(params: AnnealParams) -> np.ndarray:
    if params.tau == 1:
        return np.array([params.temperature])
    frac = np.arange(params.tau) / (params.tau - 1)
    return params.t_hot * (params.temperature / params.t_hot) ** frac


def sa_sample(problem: IsingProblem, initial, belief: Belief, params: AnnealParams,
              workers: int = 1) -> CandidateSet:
    """Belief-guided simulated annealing; bits with ``P = 0.5`` start at random.

    Returns the final configuration of each read.
    """
    n = problem.n
    initial = as_config(initial, n)
    if belief.n != n:
        raise DimensionError(f"belief covers {belief.n} bits, problem has {n}")
    ladder = temperature_ladder(params)
    single = belief.R.singleton_index(n)
    p_spin = np.where(single >= 0, belief.P[np.maximum(single, 0)], 0.0)
    t_spin = np.outer(ladder, 2.0 * p_spin)
    multi = [(c, p) for c, p in zip(belief.R, belief.P) if len(c) > 1]
    c_ptr = np.cumsum([0] + [len(c) for c, _ in multi]).astype(np.int64)
    c_idx = np.array([i for c, _ in multi for i in c], dtype=np.int64)
    t_cluster = np.outer(ladder, [2.0 * p for _, p in multi]).reshape(params.tau, len(multi))
    randomize = p_spin >= 0.5
    Jd = np.ascontiguousarray(problem.dense_J)
    h = np.ascontiguousarray(problem.h)

    def one_read(ss: np.random.SeedSequence) -> np.ndarray:
        rng = np.random.default_rng(ss)
        flips = rng.integers(0, 2, size=n) * 2 - 1
        spins = np.where(randomize, flips, initial).astype(np.float64)
        u_spin = rng.random((params.tau, n))
        u_cluster = rng.random((params.tau, len(multi)))
        _sa_kernel(Jd, h, spins, t_spin, c_ptr, c_idx, t_cluster, u_spin, u_cluster)
        return spins.astype(np.int8)

    seeds = read_seeds(params.seed, params.reads)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            G = list(pool.map(one_read, seeds))
    else:
        G = [one_read(ss) for ss in seeds]
    G = np.array(G, dtype=np.int8).reshape(params.reads, n)
    return CandidateSet(G, energies(problem, G))
