"""Path-integral quantum annealing with per-spin reverse-anneal schedules.

Each read is a ring of ``P`` Trotter slices simulated by single-spin
Metropolis moves at temperature ``P * T``. Slice ``p`` carries the classical
energy scaled per spin by ``B(s_i)``, and neighbouring slices of spin ``i``
are coupled ferromagnetically with

    J_perp = -(P T / 2) * ln tanh(Gamma_i / (P T)),    Gamma_i = A(s_i).

After each local sweep every spin also gets one global move that flips it
in all slices at once; such moves leave the inter-slice term unchanged and
are accepted on the summed classical energy change alone. A spin with
``Gamma_i = 0`` or ``s'_i = 1`` is frozen for that sweep.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numba import njit

from ..beliefs import CandidateSet
from ..ising import IsingProblem, as_config, energies
from .common import AnnealParams, ScheduleSpec, read_seeds


@njit(cache=True, nogil=True)
def _piqa_kernel(Jd, h, spins, gamma, bscale, frozen, PT, uniforms, uniforms_global):
    n_sweeps = gamma.shape[0]
    P, n = spins.shape
    lf = np.empty((P, n))
    for p in range(P):
        for i in range(n):
            acc = h[i]
            for j in range(n):
                acc += Jd[i, j] * spins[p, j]
            lf[p, i] = acc
    jperp = np.empty(n)
    for k in range(n_sweeps):
        for i in range(n):
            g = gamma[k, i]
            if g > 0.0:
                jperp[i] = -0.5 * PT * np.log(np.tanh(g / PT))
            else:
                jperp[i] = np.inf
        for p in range(P):
            up = (p + 1) % P
            down = (p - 1 + P) % P
            for i in range(n):
                if frozen[i] or jperp[i] == np.inf:
                    continue
                s = spins[p, i]
                local = bscale[k, i] * lf[p, i]
                if P > 1:
                    local += jperp[i] * (spins[up, i] + spins[down, i])
                dE = 2.0 * s * local
                if dE <= 0.0 or uniforms[k, p, i] < np.exp(-dE / PT):
                    spins[p, i] = -s
                    for j in range(n):
                        lf[p, j] -= 2.0 * s * Jd[j, i]
        for i in range(n):
            if frozen[i] or jperp[i] == np.inf:
                continue
            dE = 0.0
            for p in range(P):
                dE += 2.0 * spins[p, i] * bscale[k, i] * lf[p, i]
            if dE <= 0.0 or uniforms_global[k, i] < np.exp(-dE / PT):
                for p in range(P):
                    s = spins[p, i]
                    spins[p, i] = -s
                    for j in range(n):
                        lf[p, j] -= 2.0 * s * Jd[j, i]
    best = 0
    best_e = np.inf
    for p in range(P):
        e = 0.0
        for i in range(n):
            e -= spins[p, i] * (h[i] + 0.5 * (lf[p, i] - h[i]))
        if e < best_e:
            best_e = e
            best = p
    return best


def piqa_sample(problem: IsingProblem, initial, sched: ScheduleSpec, params: AnnealParams,
                workers: int = 1) -> CandidateSet:
    """Run ``params.reads`` independent PIQA reads from ``initial``.

    Every slice starts at ``initial`` except spins with ``s' = 0``, which start
    from a random classical value (the same in all slices). The reported
    candidate is the lowest-energy slice of the final ring.

    Args:
        problem: Ising problem with singleton clusters covering every spin in ``sched``.
        initial: starting configuration.
        sched: per-spin schedule; its ``tau`` sets the sweeps per leg.
        params: temperature, Trotter slices, reads and seed.
        workers: thread count; output is identical for any value.
    """
    n = problem.n
    initial = as_config(initial, n)
    s_prime = sched.spin_s_prime(n)
    table = sched.sweep_table(n)
    fn = sched.functions
    gamma = np.array([[fn.A(s) for s in row] for row in table])
    bscale = np.array([[fn.B(s) for s in row] for row in table])
    frozen = s_prime >= 1.0
    randomize = s_prime <= 0.0
    P = params.trotter_slices
    PT = P * params.temperature
    Jd = np.ascontiguousarray(problem.dense_J)
    h = np.ascontiguousarray(problem.h)
    shape = (table.shape[0], P, n)

    def one_read(ss: np.random.SeedSequence) -> np.ndarray:
        rng = np.random.default_rng(ss)
        start = initial.astype(np.float64)
        flips = rng.integers(0, 2, size=n) * 2 - 1
        start = np.where(randomize, flips, start)
        spins = np.tile(start, (P, 1))
        uniforms = rng.random(shape)
        uniforms_global = rng.random((shape[0], n))
        best = _piqa_kernel(Jd, h, spins, gamma, bscale, frozen, PT, uniforms, uniforms_global)
        return spins[best].astype(np.int8)

    seeds = read_seeds(params.seed, params.reads)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            G = list(pool.map(one_read, seeds))
    else:
        G = [one_read(ss) for ss in seeds]
    G = np.array(G, dtype=np.int8).reshape(params.reads, n)
    return CandidateSet(G, energies(problem, G))
