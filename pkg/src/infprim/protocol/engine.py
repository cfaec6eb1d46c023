"""Protocol execution: generic graph passes, population annealing and parallel tempering.

Every primitive call draws its randomness from
``SeedSequence(seed, spawn_key=(round, slot, call))``, and the serial steps
between rounds (resampling, replacement, swaps) from a per-round generator,
so a record depends only on the run seed and never on the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..backends import infer
from ..beliefs import Belief, CandidateSet
from ..errors import ArityError, DomainError, ProtocolError
from ..ising import ClusterSet, IsingProblem
from ..processing import align_inversions, apply_function, f_init, f_local_search, genetic_combine
from ..schedule import (ScheduleFunctions, linear_schedule, load_table, tabulated_schedule,
                        uncertainty_at_temperature, uncertainty_heuristic)
from .graph import ProtocolGraph, _topological_order, validate
from .record import RunRecord

BARRIER_SLOT = 1 << 30


@dataclass
class Member:
    belief: Belief
    cands: CandidateSet | None = None
    T_eff: float | None = None
    origin: str = "init"

    @property
    def min_energy(self) -> float:
        return self.cands.min_energy


@dataclass
class PoolState:
    members: list[Member]
    best_config: np.ndarray | None = None
    best_energy: float = np.inf
    round: int = 0
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    def __len__(self):
        return len(self.members)

    def energies(self) -> np.ndarray:
        return np.array([m.min_energy for m in self.members])


def schedule_from_config(cfg: dict) -> tuple[ScheduleFunctions, object]:
    """Schedule functions and the ``P -> s'`` heuristic named by a protocol's ``schedule`` block."""
    kind = cfg.get("schedule", "linear")
    T_phys = float(cfg.get("T_phys", 0.0))
    if kind == "linear":
        sf = linear_schedule(float(cfg.get("gamma0", 1.0)), T_phys)
    elif kind == "tabulated":
        files = cfg.get("file")
        if not isinstance(files, dict) or set(files) != {"A", "B"}:
            raise ProtocolError("schedule.file must map 'A' and 'B' to table paths")
        sf = tabulated_schedule(load_table(files["A"]), load_table(files["B"]), T_phys)
    else:
        raise ProtocolError(f"schedule.schedule: unknown schedule {kind!r}")
    return sf, uncertainty_heuristic(sf, bool(cfg.get("thermal", False)))


# -- pool operations -------------------------------------------------------------

def _energies_of(pool) -> np.ndarray:
    if isinstance(pool, PoolState):
        return pool.energies()
    return np.asarray(pool, dtype=float)


def pa_select_parents(pool, T_eff: float, k: int, rng: np.random.Generator) -> list[int]:
    """Draw ``k`` distinct members with weights ``exp(-min E_j / T_eff)``, renormalising after each draw.

    ``pool`` is a :class:`PoolState` or a sequence of member minimum energies.
    """
    E = _energies_of(pool)
    if k > E.size:
        raise ArityError(f"cannot draw {k} parents from a pool of {E.size}")
    if not T_eff > 0:
        raise DomainError(f"T_eff must be > 0, got {T_eff}")
    w = np.exp(-(E - E.min()) / T_eff)
    available = list(range(E.size))
    chosen = []
    for _ in range(k):
        c = np.cumsum(w[available])
        j = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
        chosen.append(available.pop(min(j, len(available) - 1)))
    return chosen


def replacement_probability(E_hyb: float, E_member: float, T_eff: float, convention: str = "literal") -> float:
    """``min(exp((E_hyb - E)/T), 1)`` taken literally, or the Metropolis form with the sign reversed."""
    x = (E_hyb - E_member) / T_eff
    if convention == "metropolis":
        x = -x
    elif convention != "literal":
        raise DomainError(f"unknown pex convention {convention!r}")
    return 1.0 if x >= 0 else math.exp(x)


def hybrid_replace(pool: PoolState, genetic_outputs: Sequence[CandidateSet], rng: np.random.Generator,
                   convention: str = "literal", record: RunRecord | None = None) -> PoolState:
    """Offer each genetic output to the pool, coldest members first.

    Members are tried in order of increasing ``T_eff`` (ascending index within a
    temperature). The first accepted attempt replaces that member's candidates;
    an output rejected by every member is discarded.
    """
    members = [replace(m) for m in pool.members]
    order = sorted(range(len(members)), key=lambda i: (members[i].T_eff, i))
    for h, out in enumerate(genetic_outputs):
        placed = False
        for i in order:
            m = members[i]
            p_ex = replacement_probability(out.min_energy, m.min_energy, m.T_eff, convention)
            u = float(rng.random())
            accepted = u < p_ex
            if record is not None:
                record.log("replace_attempt", pool.round, hybrid=h, member=i, T_eff=m.T_eff,
                           hybrid_energy=out.min_energy, member_energy=m.min_energy, p_ex=p_ex,
                           accepted=accepted)
            if accepted:
                members[i] = Member(m.belief, out, m.T_eff, f"hybrid:{h}")
                placed = True
                break
        if not placed and record is not None:
            record.log("hybrid_discard", pool.round, hybrid=h)
    return PoolState(members, pool.best_config, pool.best_energy, pool.round, pool.rng)


def swap_probability(E_a: float, E_b: float, T_a: float, T_b: float) -> float:
    """Replica-exchange acceptance ``min(1, exp((1/T_a - 1/T_b)(E_a - E_b)))``."""
    x = (1.0 / T_a - 1.0 / T_b) * (E_a - E_b)
    return 1.0 if x >= 0 else math.exp(x)


def pt_swap(pool: PoolState, rng: np.random.Generator, record: RunRecord | None = None) -> PoolState:
    """One sweep of neighbour exchanges up the temperature ladder.

    Members sharing a temperature form replicas ``0, 1, ...`` in index order;
    replica ``a`` at one level is paired with replica ``a`` at the next.
    Exchanges move candidate lists; temperatures stay with their slots.
    """
    members = [replace(m) for m in pool.members]
    temps = sorted({m.T_eff for m in members})
    if len(temps) < 2:
        raise ProtocolError("pt_swap needs at least two ladder temperatures")
    levels = [[i for i, m in enumerate(members) if m.T_eff == t] for t in temps]
    reps = min(len(lv) for lv in levels)
    for a in range(reps):
        for k in range(len(temps) - 1):
            i, j = levels[k][a], levels[k + 1][a]
            mi, mj = members[i], members[j]
            p = swap_probability(mi.min_energy, mj.min_energy, mi.T_eff, mj.T_eff)
            u = float(rng.random())
            accepted = u < p
            if record is not None:
                record.log("swap", pool.round, pair=[i, j], T_pair=[mi.T_eff, mj.T_eff],
                           energies=[mi.min_energy, mj.min_energy], acceptance=p, accepted=accepted)
            if accepted:
                members[i] = Member(mi.belief, mj.cands, mi.T_eff, mj.origin)
                members[j] = Member(mj.belief, mi.cands, mj.T_eff, mi.origin)
    return PoolState(members, pool.best_config, pool.best_energy, pool.round, pool.rng)


# -- execution ----------------------------------------------------------------

class _Runner:
    def __init__(self, graph: ProtocolGraph, problem: IsingProblem, seed, workers: int):
        self.graph = graph
        self.problem = problem
        self.workers = max(1, int(workers))
        if seed is None:
            seed = graph.seed
        if seed is None:
            seed = int(np.random.SeedSequence().entropy)
        self.entropy = int(seed)
        self.record = RunRecord(seed=self.entropy)
        self.functions, self.heuristic = schedule_from_config(graph.schedule)
        self.R = ClusterSet.singletons(problem.n)

    def seed_for(self, round_: int, slot: int, call: int = 0) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.entropy, spawn_key=(round_, slot, call))

    def barrier_rng(self, round_: int) -> np.random.Generator:
        return np.random.default_rng(self.seed_for(round_, BARRIER_SLOT))

    def call(self, belief: Belief, ss: np.random.SeedSequence, backend: str | None = None,
             workers: int = 1) -> CandidateSet:
        params = self.graph.anneal_params.replace(seed=ss)
        return infer(backend or self.graph.backend, belief, self.problem, params,
                     functions=self.functions, heuristic=self.heuristic, workers=workers)

    def call_many(self, jobs: list[tuple[Belief, np.random.SeedSequence]]) -> list[CandidateSet]:
        if self.workers > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as ex:
                return list(ex.map(lambda job: self.call(*job), jobs))
        return [self.call(b, ss, workers=self.workers) for b, ss in jobs]

    def observe(self, cands: CandidateSet) -> bool:
        """Fold a call's candidates into best-so-far; True on strict improvement."""
        self.record.calls += 1
        config, e = cands.best
        if e < self.record.best_energy:
            self.record.best_energy = float(e)
            self.record.best_config = config.copy()
            return True
        return False

    def align(self, collection: list[CandidateSet], round_: int) -> list[CandidateSet]:
        if self.graph.align is None:
            return collection
        return align_inversions(collection, self.problem, self.graph.align,
                                seed=self.seed_for(round_, BARRIER_SLOT, 1))

    def p_for(self, T_eff: float) -> float:
        return uncertainty_at_temperature(T_eff)


def _patience(graph: ProtocolGraph) -> int:
    return graph.patience if graph.patience is not None else graph.rounds


def _run_graph(run: _Runner) -> None:
    graph, rec = run.graph, run.record
    order = _topological_order(graph)
    index = {nd.id: k for k, nd in enumerate(graph.nodes)}
    plain_in = {nd.id: [e.src for e in graph.edges if e.dst == nd.id and not e.loop] for nd in graph.nodes}
    loop_in = {nd.id: [e.src for e in graph.edges if e.dst == nd.id and e.loop] for nd in graph.nodes}
    loop_only = {nd.id for nd in graph.nodes
                 if (outs := [e for e in graph.edges if e.src == nd.id]) and all(e.loop for e in outs)}
    prev: dict[str, Belief] = {}
    stall = 0
    for r in range(graph.rounds):
        values: dict[str, object] = {}
        improved = False
        for nid in order:
            nd = graph.nodes[index[nid]]
            if nd.kind == "processing":
                if r == graph.rounds - 1 and nid in loop_only:
                    continue
                collection = [values[s] for s in plain_in[nid]]
                if nd.params.get("align"):
                    collection = align_inversions(collection, run.problem, nd.params["align"],
                                                  seed=run.seed_for(r, index[nid], 1))
                params = {k: v for k, v in nd.params.items() if k != "align"}
                belief = apply_function(nd.fn, params, collection, run.R, run.problem.n, r)
                values[nid] = belief
                rec.log("belief", r, node=nid, S=belief.S, P=belief.P)
                continue
            if r > 0 and loop_in[nid] and loop_in[nid][0] in prev:
                belief = prev[loop_in[nid][0]]
            elif plain_in[nid]:
                belief = values[plain_in[nid][0]]
            else:
                belief = f_init(run.R, run.problem.n)
            cands = run.call(belief, run.seed_for(r, index[nid]), nd.backend, workers=run.workers)
            values[nid] = cands
            improved |= run.observe(cands)
            rec.log("call", r, node=nid, T_eff=None, min_energy=cands.min_energy, reads=len(cands))
        prev = {k: v for k, v in values.items() if isinstance(v, Belief)}
        rec.best_history.append(rec.best_energy)
        stall = 0 if improved else stall + 1
        if stall >= _patience(graph):
            rec.log("stop", r, reason="patience")
            break


def _run_population_annealing(run: _Runner) -> None:
    graph, rec = run.graph, run.record
    pools = graph.pools
    T_desc = sorted(pools.T_ladder, reverse=True)
    pop, gc = pools.pop, pools.genetic_count
    members = [Member(f_init(run.R, run.problem.n), None, T_desc[0]) for _ in range(pop)]
    stall = 0
    for r in range(graph.rounds):
        T = T_desc[min(r, len(T_desc) - 1)]
        outs = run.call_many([(m.belief, run.seed_for(r, j)) for j, m in enumerate(members)])
        improved = False
        for j, (m, out) in enumerate(zip(members, outs)):
            m.cands, m.T_eff = out, T
            improved |= run.observe(out)
            rec.log("call", r, member=j, T_eff=T, min_energy=out.min_energy, origin=m.origin)
        rec.log("population", r, size=len(members))
        rec.best_history.append(rec.best_energy)
        stall = 0 if improved else stall + 1
        if r == graph.rounds - 1:
            break
        if stall >= _patience(graph):
            rec.log("stop", r, reason="patience")
            break
        pool = PoolState(members, rec.best_config, rec.best_energy, r)
        rng = run.barrier_rng(r)
        T_next = T_desc[min(r + 1, len(T_desc) - 1)]
        offspring = []
        for g in range(gc):
            a, b = pa_select_parents(pool, T, 2, rng)
            parents = run.align([members[a].cands, members[b].cands], r)
            offspring.append((genetic_combine(parents, run.R, graph.p_agree), f"genetic:{a},{b}"))
            rec.log("genetic", r, child=g, parents=[a, b])
        E = pool.energies()
        w = np.exp(-(E - E.min()) / T)
        picks = np.sort(rng.choice(pop, size=pop - gc, p=w / w.sum()))
        rec.log("resample", r, picks=picks, T_eff=T)
        p_next = run.p_for(T_next)
        members = ([Member(f_local_search(members[i].cands, run.R, p_next), None, T_next, f"resample:{i}")
                    for i in picks]
                   + [Member(b, None, T_next, origin) for b, origin in offspring])


def _run_parallel_tempering(run: _Runner) -> None:
    graph, rec = run.graph, run.record
    pools = graph.pools
    ladder = sorted(pools.T_ladder)
    reps = 2 if pools.genetic else 1
    members = [Member(f_init(run.R, run.problem.n), None, t) for t in ladder for _ in range(reps)]
    stall = 0
    for r in range(graph.rounds):
        outs = run.call_many([(m.belief, run.seed_for(r, j)) for j, m in enumerate(members)])
        improved = False
        for j, (m, out) in enumerate(zip(members, outs)):
            m.cands = out
            improved |= run.observe(out)
            rec.log("call", r, member=j, T_eff=m.T_eff, min_energy=out.min_energy, origin=m.origin)
        pool = PoolState(members, rec.best_config, rec.best_energy, r)
        rng = run.barrier_rng(r)
        if pools.genetic:
            jobs = []
            for k in range(len(ladder)):
                parents = run.align([members[k * reps].cands, members[k * reps + 1].cands], r)
                jobs.append((genetic_combine(parents, run.R, graph.p_agree), run.seed_for(r, k, 1)))
            hybrids = run.call_many(jobs)
            for k, out in enumerate(hybrids):
                improved |= run.observe(out)
                rec.log("hybrid_call", r, member=f"hyb{k}", T_eff=ladder[k], min_energy=out.min_energy)
            pool = hybrid_replace(pool, hybrids, rng, graph.pex_convention, rec)
        pool = pt_swap(pool, rng, rec)
        members = pool.members
        rec.best_history.append(rec.best_energy)
        stall = 0 if improved else stall + 1
        if stall >= _patience(graph) and r < graph.rounds - 1:
            rec.log("stop", r, reason="patience")
            break
        for m in members:
            m.belief = f_local_search(m.cands, run.R, run.p_for(m.T_eff))
            m.cands = None


def run_protocol(graph: ProtocolGraph, problem: IsingProblem, seed=None, workers: int = 1) -> RunRecord:
    """Execute ``graph`` on ``problem`` and return the full record.

    Args:
        graph: a validated protocol graph.
        problem: the Ising problem.
        seed: run seed; defaults to ``graph.seed`` and then to fresh entropy
            (recorded in ``RunRecord.seed`` so the run can be replayed).
        workers: threads for independent primitive calls (or reads); the
            record does not depend on it.
    """
    validate(graph)
    run = _Runner(graph, problem, seed, workers)
    run.record.log("start", 0, seed=run.entropy, template=graph.template, n=problem.n,
                   backend=graph.backend)
    if graph.template == "population_annealing":
        _run_population_annealing(run)
    elif graph.template == "parallel_tempering":
        _run_parallel_tempering(run)
    else:
        _run_graph(run)
    rec = run.record
    rec.log("finish", len(rec.best_history) - 1, best_energy=rec.best_energy, calls=rec.calls)
    return rec
