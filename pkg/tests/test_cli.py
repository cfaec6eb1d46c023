import json

import numpy as np
import pytest

from infprim.cli import main
from infprim.errors import DomainError
from infprim.experiments import (ExperimentConfig, calibration_histogram, compare_protocols,
                                 histogram_from_bits, monotone_trend, unique_ground_state)
from infprim.ising import IsingProblem, energy, read_instance, write_instance


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.setenv("INFPRIM_OUT", str(tmp_path))
    return tmp_path


def gen(out, n=6, count=2, seed=0, name="inst"):
    assert main(["gen", "--n", str(n), "--count", str(count), "--seed", str(seed), "--out", str(out / name)]) == 0
    return sorted((out / name).iterdir())


class TestGen:
    def test_instances(self, out):
        files = gen(out, n=7, count=3)
        assert len(files) == 3
        p = read_instance(files[0])
        assert p.n == 6 and np.count_nonzero(p.h) == 6

    def test_reproducible(self, out):
        a = [f.read_bytes() for f in gen(out, name="a")]
        b = [f.read_bytes() for f in gen(out, name="b")]
        assert a == b

    def test_rejects_small_n(self, out, capsys):
        assert main(["gen", "--n", "2"]) == 2
        assert "n must be" in capsys.readouterr().err


class TestOracle:
    def test_ferromagnet(self, out):
        write_instance(IsingProblem.from_couplers(2, None, [(0, 1, 1.0)]), out / "fm.ising")
        assert main(["oracle", str(out / "fm.ising")]) == 0
        text = (out / "fm.ground.csv").read_text()
        lines = text.splitlines()
        assert lines[0].startswith("# config:")
        assert lines[1] == "index,energy,s0,s1"
        rows = [line.split(",") for line in lines[2:]]
        assert len(rows) == 2
        p = read_instance(out / "fm.ising")
        for r in rows:
            assert energy(p, [int(v) for v in r[2:]]) == float(r[1])
        assert main(["oracle", str(out / "fm.ising")]) == 0
        assert (out / "fm.ground.csv").read_text() == text


class TestBP:
    def test_output(self, out):
        write_instance(IsingProblem.from_couplers(3, None, [(0, 1, 1.0), (1, 2, -0.5)]), out / "t.ising")
        assert main(["bp", str(out / "t.ising"), "--T", "0.5"]) == 0
        lines = (out / "t.marginals.csv").read_text().splitlines()
        assert lines[0].startswith("# converged=True")
        assert lines[1].startswith("# config:")
        assert lines[2] == "bit,b_plus,b_minus,S,P"
        assert all(float(line.split(",")[4]) == 0.5 for line in lines[3:])


class TestSolve:
    def test_traditional(self, out):
        inst = gen(out)[0]
        (out / "p.json").write_text(json.dumps({"template": "traditional", "anneal_params": {"reads": 5}}))
        assert main(["solve", str(inst), str(out / "p.json"), "--seed", "1"]) == 0
        events = (out / "run" / "events.jsonl").read_text()
        assert sum(json.loads(e)["event"] == "call" for e in events.splitlines()) == 1
        assert (out / "run" / "summary.csv").read_text().startswith("# config:")
        first = [(out / "run" / f).read_bytes() for f in ("events.jsonl", "summary.csv", "best.txt")]
        assert main(["solve", str(inst), str(out / "p.json"), "--seed", "1"]) == 0
        assert first == [(out / "run" / f).read_bytes() for f in ("events.jsonl", "summary.csv", "best.txt")]

    def test_validation_failure_exit_code(self, out, capsys):
        inst = gen(out)[0]
        (out / "bad.json").write_text(json.dumps({"template": "local_search", "p_ladder": []}))
        assert main(["solve", str(inst), str(out / "bad.json")]) != 0
        assert "p_ladder" in capsys.readouterr().err


class TestFig2:
    def test_small_run(self, out):
        args = ["fig2", "--instances", "4", "--n", "7", "--reads", "21", "--bins", "4", "--seed", "3"]
        assert main(args) == 0
        text = (out / "fig2.csv").read_text()
        lines = text.splitlines()
        assert lines[0].startswith("# config:")
        assert lines[2] == "bin_lo,bin_hi,total,agree,disagree,error_fraction"
        rows = [line.split(",") for line in lines[3:]]
        assert len(rows) == 4
        assert sum(int(r[2]) for r in rows) == 4 * 6
        assert all(int(r[3]) + int(r[4]) == int(r[2]) for r in rows)
        assert main(args) == 0
        assert (out / "fig2.csv").read_text() == text

    def test_bins_partition(self):
        P = np.array([0.0, 0.1, 0.25, 0.5, 0.5, 0.49])
        h = histogram_from_bits(P, np.array([True, False, True, True, False, True]), 5)
        assert h.total.sum() == P.size and h.edges[0] == 0.0 and h.edges[-1] == 0.5
        assert np.array_equal(h.agree + h.disagree, h.total)

    def test_degenerate_instance_rejected(self):
        with pytest.raises(DomainError):
            unique_ground_state(IsingProblem.from_couplers(4, None, []))

    def test_config_validation(self):
        with pytest.raises(DomainError):
            ExperimentConfig(bins=1)
        with pytest.raises(DomainError):
            ExperimentConfig(n=40)
        full = ExperimentConfig.full_scale()
        assert (full.instances, full.n, full.reads) == (1500, 17, 1001)

    def test_trend_checker(self):
        assert monotone_trend([0.0, 0.01, 0.1, 0.3])[0]
        assert monotone_trend([0.05, 0.1, 0.08, 0.3])[0]
        assert not monotone_trend([0.1, 0.05, 0.2, 0.1, 0.3])[0]
        assert not monotone_trend([0.1, 0.15, 0.2])[0]

    def test_workers_match(self):
        cfg = ExperimentConfig(instances=3, n=6, reads=11, bins=3)
        a = calibration_histogram(cfg)
        b = calibration_histogram(ExperimentConfig(instances=3, n=6, reads=11, bins=3, workers=3))
        assert np.array_equal(a.total, b.total) and np.array_equal(a.disagree, b.disagree)


def test_compare_protocols_shapes():
    c = compare_protocols(instances=2, n=6, budget=6, rounds=2, runs=2)
    assert c.hits_traditional.shape == (2, 2)
    assert 0.0 <= c.fraction_local_worse <= 1.0
