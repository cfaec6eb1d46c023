import itertools
import json
import math

import numpy as np
import pytest

from infprim.backends import AnnealParams
from infprim.beliefs import CandidateSet
from infprim.errors import ArityError, ProtocolError
from infprim.ising import ClusterSet, exhaustive_solve, sk_fix
from infprim.processing import f_init
from infprim.protocol import (Edge, Member, Node, PoolState, ProtocolGraph, dumps, hybrid_replace,
                              pa_select_parents, parse_protocol, pt_swap, replacement_probability,
                              run_protocol, serialize, swap_probability, template_local_search,
                              template_parallel_tempering, template_population_annealing,
                              template_traditional, validate)
from infprim.schedule import linear_schedule, s_from_uncertainty

FAST = AnnealParams(reads=4, tau=10, trotter_slices=8)


def member(E, T, n=3):
    G = np.ones((1, n), dtype=np.int8)
    return Member(f_init(ClusterSet.singletons(n), n), CandidateSet(G, np.array([float(E)])), T)


def pool_of(energies, temps):
    return PoolState([member(e, t) for e, t in zip(energies, temps)])


def three_sigma(count, trials, p):
    return abs(count / trials - p) <= 3 * math.sqrt(p * (1 - p) / trials) + 1e-12


class TestValidation:
    def test_templates_validate(self):
        for g in (template_traditional(), template_local_search(2, [0.3, 0.1]),
                  template_population_annealing(4, [0.5, 1.0], 2),
                  template_parallel_tempering([0.5, 1.0, 2.0], 3, genetic=True)):
            validate(g)

    def test_alternation(self):
        nodes = (Node("init", "processing", "init", n_inputs=0), Node("a", "primitive"), Node("b", "primitive"))
        g = ProtocolGraph(nodes, (Edge("init", "a"), Edge("a", "b")))
        with pytest.raises(ProtocolError, match="a->b"):
            validate(g)

    def test_in_degree(self):
        nodes = (Node("init", "processing", "init", n_inputs=0), Node("phi", "primitive"),
                 Node("post", "processing", "raw", n_inputs=2))
        g = ProtocolGraph(nodes, (Edge("init", "phi"), Edge("phi", "post")))
        with pytest.raises(ProtocolError, match="post"):
            validate(g)

    def test_unmarked_cycle(self):
        nodes = (Node("init", "processing", "init", n_inputs=0), Node("phi", "primitive"),
                 Node("ls", "processing", "local_search", params={"p": 0.2}))
        g = ProtocolGraph(nodes, (Edge("ls", "phi"), Edge("phi", "ls")))
        with pytest.raises(ProtocolError, match="cycle"):
            validate(g)

    def test_template_errors(self):
        with pytest.raises(ProtocolError):
            template_local_search(0, [])
        with pytest.raises(ProtocolError):
            validate(template_population_annealing(4, [0.5, 1.0], genetic_count=3))
        with pytest.raises(ProtocolError):
            validate(template_parallel_tempering([1.0], 3))
        with pytest.raises(ProtocolError):
            validate(template_parallel_tempering([2.0, 1.0], 3))
        with pytest.raises(ProtocolError):
            validate(template_population_annealing(1, [1.0]))


class TestParsing:
    def test_minimal_traditional(self):
        assert parse_protocol('{"template": "traditional"}') == template_traditional()

    def test_unknown_keys(self):
        with pytest.raises(ProtocolError, match="colour"):
            parse_protocol({"template": "traditional", "colour": "red"})
        with pytest.raises(ProtocolError, match="anneal_params"):
            parse_protocol({"template": "traditional", "anneal_params": {"temp": 1}})

    def test_syntax_error_has_line(self):
        with pytest.raises(ProtocolError, match="line 2"):
            parse_protocol('{"template": "traditional",\n "rounds": }')

    def test_arity_diagnostic(self):
        doc = {"nodes": [{"id": "init", "kind": "processing", "fn": "init"},
                         {"id": "phi", "kind": "primitive"},
                         {"id": "gen", "kind": "processing", "fn": "genetic_agreement", "p_agree": 0.1,
                          "n_inputs": 2}],
               "edges": [["init", "phi"], ["phi", "gen"]]}
        with pytest.raises(ProtocolError, match="gen: in-degree 1"):
            parse_protocol(doc)

    def test_unknown_function(self):
        doc = {"nodes": [{"id": "f", "kind": "processing", "fn": "magic"}], "edges": []}
        with pytest.raises(ProtocolError, match="magic"):
            parse_protocol(doc)

    @pytest.mark.parametrize("graph", [
        template_traditional(seed=3),
        template_local_search(3, [0.3, 0.2, 0.1], backend="sa", patience=2),
        template_population_annealing(6, [0.5, 1.0, 2.0], 2, rounds=10, pex_convention="metropolis"),
        template_parallel_tempering([0.5, 1.0], 4, genetic=True, align="majority",
                                    anneal_params=AnnealParams(reads=7, tau=11)),
    ])
    def test_round_trip(self, graph):
        again = parse_protocol(dumps(graph))
        assert again == graph
        assert serialize(again) == serialize(graph)

    def test_explicit_graph_round_trip(self, tmp_path):
        doc = {"rounds": 3,
               "nodes": [{"id": "init", "kind": "processing", "fn": "init"},
                         {"id": "phi", "kind": "primitive", "backend": "sa"},
                         {"id": "el", "kind": "processing", "fn": "elite", "E_elite": 0.0},
                         {"id": "ls", "kind": "processing", "fn": "local_search", "p": 0.2}],
               "edges": [["init", "phi"], ["phi", "ls"], {"from": "ls", "to": "phi", "loop": True},
                         ["phi", "el"]]}
        path = tmp_path / "p.json"
        path.write_text(json.dumps(doc))
        g = parse_protocol(path)
        assert parse_protocol(dumps(g)) == g


class TestParentSelection:
    def test_all_members(self):
        rng = np.random.default_rng(0)
        assert sorted(pa_select_parents([0.0, 1.0, 2.0], 1.0, 3, rng)) == [0, 1, 2]

    def test_arity(self):
        with pytest.raises(ArityError):
            pa_select_parents([0.0], 1.0, 2, np.random.default_rng(0))

    def test_better_member_first(self):
        T = 0.7
        rng = np.random.default_rng(1)
        trials = 10_000
        first = sum(pa_select_parents([0.0, T * math.log(3)], T, 1, rng)[0] == 0 for _ in range(trials))
        assert three_sigma(first, trials, 0.75)

    def test_pair_frequencies(self):
        E = np.array([0.0, 0.3, 0.9, 1.4])
        T = 0.8
        w = np.exp(-E / T)
        probs = {}
        for a, b in itertools.permutations(range(4), 2):
            probs[(a, b)] = w[a] / w.sum() * w[b] / (w.sum() - w[a])
        rng = np.random.default_rng(2)
        trials = 10_000
        counts = dict.fromkeys(probs, 0)
        for _ in range(trials):
            counts[tuple(pa_select_parents(E, T, 2, rng))] += 1
        for pair, p in probs.items():
            assert three_sigma(counts[pair], trials, p), pair

    def test_uniform(self):
        rng = np.random.default_rng(3)
        trials = 10_000
        first = np.bincount([pa_select_parents([1.0] * 4, 1.0, 1, rng)[0] for _ in range(trials)], minlength=4)
        assert all(three_sigma(c, trials, 0.25) for c in first)


class TestSwap:
    def test_probability(self):
        assert swap_probability(1.0, 1.0, 0.5, 1.0) == 1.0
        assert swap_probability(-2.0, -1.0, 0.5, 1.0) < 1.0
        assert swap_probability(-1.0, -2.0, 0.5, 1.0) == 1.0

    def test_frequency(self):
        Ea, Eb, Ta, Tb = -1.0, -0.4, 0.5, 1.5
        p = math.exp((1 / Ta - 1 / Tb) * (Ea - Eb))
        rng = np.random.default_rng(4)
        trials = 10_000
        swapped = 0
        for _ in range(trials):
            out = pt_swap(pool_of([Ea, Eb], [Ta, Tb]), rng)
            swapped += out.members[0].min_energy == Eb
        assert three_sigma(swapped, trials, p)

    def test_temperatures_stay(self):
        out = pt_swap(pool_of([0.0, -1.0, -2.0], [0.5, 1.0, 2.0]), np.random.default_rng(0))
        assert [m.T_eff for m in out.members] == [0.5, 1.0, 2.0]


class TestHybridReplace:
    def test_literal_formula(self):
        T = 0.9
        assert replacement_probability(-1.0 - T * math.log(2), -1.0, T) == pytest.approx(0.5)
        assert replacement_probability(0.0, -1.0, T) == 1.0
        assert replacement_probability(0.0, -1.0, T, "metropolis") == pytest.approx(math.exp(-1 / T))

    def test_clamp_replaces_first_coldest(self):
        pool = pool_of([-3.0, -2.0, -5.0], [1.0, 2.0, 0.5])
        hyb = CandidateSet(-np.ones((1, 3), dtype=np.int8), np.array([0.0]))
        out = hybrid_replace(pool, [hyb], np.random.default_rng(0))
        assert out.members[2].min_energy == 0.0
        assert [m.min_energy for m in out.members[:2]] == [-3.0, -2.0]

    def test_empty_list(self):
        pool = pool_of([-1.0, 0.0], [1.0, 2.0])
        out = hybrid_replace(pool, [], np.random.default_rng(0))
        assert [m.min_energy for m in out.members] == [-1.0, 0.0]

    def test_half_probability_frequency(self):
        T = 1.0
        rng = np.random.default_rng(5)
        trials = 10_000
        hyb = CandidateSet(np.ones((1, 3), dtype=np.int8), np.array([-math.log(2)]))
        hits = sum(hybrid_replace(pool_of([0.0], [T]), [hyb], rng).members[0].min_energy < 0
                   for _ in range(trials))
        assert three_sigma(hits, trials, 0.5)

    def test_attempt_order_in_log(self):
        from infprim.protocol import RunRecord
        rec = RunRecord(seed=0)
        pool = pool_of([-1.0, -1.0, -1.0, -1.0], [2.0, 0.5, 1.0, 0.5])
        hyb = CandidateSet(np.ones((1, 3), dtype=np.int8), np.array([-100.0]))
        hybrid_replace(pool, [hyb], np.random.default_rng(0), record=rec)
        tried = [e["member"] for e in rec.events_of("replace_attempt")]
        assert tried == [1, 3, 2, 0]
        assert rec.events_of("hybrid_discard")


@pytest.fixture(scope="module")
def problem12():
    return sk_fix(12, 3)


class TestRun:
    def test_traditional_single_call(self):
        p = sk_fix(5, 0)
        rec = run_protocol(template_traditional(anneal_params=FAST), p, seed=1)
        calls = rec.events_of("call")
        assert rec.calls == 1 and len(calls) == 1
        assert rec.best_energy == calls[0]["min_energy"]

    def test_replay(self, problem12):
        g = template_local_search(2, [0.3, 0.1], anneal_params=FAST)
        assert run_protocol(g, problem12, seed=5) == run_protocol(g, problem12, seed=5)
        assert run_protocol(g, problem12, seed=5) != run_protocol(g, problem12, seed=6)

    def test_seed_recorded_when_absent(self, problem12):
        rec = run_protocol(template_traditional(anneal_params=FAST), problem12)
        again = run_protocol(template_traditional(anneal_params=FAST), problem12, seed=rec.seed)
        assert again == rec

    @pytest.mark.parametrize("graph", [
        template_population_annealing(6, [0.5, 1.0, 2.0], 2, rounds=4, anneal_params=FAST),
        template_parallel_tempering([0.5, 1.0, 2.0], 3, genetic=True, anneal_params=FAST),
    ])
    def test_workers_do_not_change_record(self, graph, problem12):
        assert run_protocol(graph, problem12, seed=2, workers=1) == run_protocol(graph, problem12, seed=2, workers=8)

    def test_local_search_ladder_narrows(self, problem12):
        ladder = [0.3, 0.2, 0.1]
        rec = run_protocol(template_local_search(3, ladder, anneal_params=FAST), problem12, seed=0)
        ps = [e["P"][0] for e in rec.events_of("belief") if e["node"] == "ls"]
        assert ps == ladder
        s = [s_from_uncertainty(p, linear_schedule()) for p in ps]
        assert np.all(np.diff(s) > 0)
        assert len(rec.events_of("call")) == 4

    def test_population_conserved(self, problem12):
        g = template_population_annealing(6, [0.5, 1.0, 2.0], 3, rounds=6, anneal_params=FAST)
        rec = run_protocol(g, problem12, seed=3)
        assert [e["size"] for e in rec.events_of("population")] == [6] * 6
        assert len(rec.events_of("genetic")) == 3 * 5

    def test_parallel_tempering_order(self, problem12):
        g = template_parallel_tempering([0.5, 1.0, 2.0], 2, genetic=True, anneal_params=FAST)
        rec = run_protocol(g, problem12, seed=4)
        for r in range(2):
            kinds = [e["event"] for e in rec.events if e["round"] == r
                     and e["event"] in ("hybrid_call", "replace_attempt", "swap")]
            first = {k: kinds.index(k) for k in set(kinds)}
            last = {k: len(kinds) - 1 - kinds[::-1].index(k) for k in set(kinds)}
            assert last["hybrid_call"] < first["replace_attempt"]
            assert last["replace_attempt"] < first["swap"]
            assert all("acceptance" in e for e in rec.events_of("swap"))

    def test_patience_stops_early(self, problem12):
        g = template_local_search(5, [0.1] * 5, anneal_params=AnnealParams(reads=30), patience=1)
        rec = run_protocol(g, problem12, seed=0)
        assert rec.events_of("stop") and len(rec.best_history) < 6

    def test_best_monotone_and_bounds_members(self, problem12):
        g = template_parallel_tempering([0.5, 1.0], 4, anneal_params=FAST)
        rec = run_protocol(g, problem12, seed=9)
        assert np.all(np.diff(rec.best_history) <= 0)
        seen = min(e["min_energy"] for e in rec.events if "min_energy" in e)
        assert rec.best_energy <= seen

    def test_local_search_reaches_ground_state(self, problem12):
        _, e0 = exhaustive_solve(problem12)
        g = template_local_search(2, [0.3, 0.1], anneal_params=AnnealParams(reads=4))
        hits = sum(run_protocol(g, problem12, seed=s).best_energy <= e0 + 1e-9 for s in range(20))
        assert hits > 10

    def test_exports(self, tmp_path, problem12):
        rec = run_protocol(template_traditional(anneal_params=FAST), problem12, seed=1)
        paths = rec.write(tmp_path, comment="config: test")
        lines = paths["summary"].read_text().splitlines()
        assert lines[0] == "# config: test"
        assert lines[1] == "round,member,T_eff,min_energy,event"
        events = [json.loads(line) for line in paths["events"].read_text().splitlines()]
        assert events[0]["event"] == "start" and events[-1]["event"] == "finish"
