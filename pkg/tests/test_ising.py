import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import all_configs, brute_energy
from infprim.errors import (CapExceeded, DimensionError, DomainError, InstanceFormatError)
from infprim.ising import (ClusterSet, IsingProblem, energies, energy, exhaustive_solve, fix_spin,
                           format_instance, generate_sk, global_flip, hamming_distance,
                           parse_instance, read_instance, sk_fix, write_instance)


def random_problem(rng, n, density=0.7, fields=True):
    couplers = [(i, j, float(rng.uniform(-1, 1))) for i in range(n) for j in range(i + 1, n)
                if rng.random() < density]
    h = rng.uniform(-1, 1, n) if fields else np.zeros(n)
    return IsingProblem.from_couplers(n, h, couplers, offset=float(rng.uniform(-2, 2)))


@st.composite
def problems(draw, max_n=6):
    n = draw(st.integers(1, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_problem(np.random.default_rng(seed), n)


class TestEnergy:
    def test_aligned_pair(self):
        p = IsingProblem.from_couplers(2, None, [(0, 1, 1.0)])
        assert energy(p, [1, 1]) == -1.0

    def test_single_field(self):
        p = IsingProblem.from_couplers(1, [1.0], [])
        assert energy(p, [1]) == -1.0

    def test_matches_term_sum(self, rng):
        for _ in range(20):
            p = random_problem(rng, 4)
            for c in all_configs(4):
                assert energy(p, c) == pytest.approx(
                    brute_energy(4, p.h, p.couplers, c, p.offset), abs=1e-12)

    def test_batch_is_bit_identical(self, rng):
        p = random_problem(rng, 7)
        G = rng.choice([-1, 1], size=(30, 7))
        assert np.array_equal(energies(p, G), [energy(p, g) for g in G])

    def test_rejects_bad_configs(self):
        p = IsingProblem.from_couplers(2, None, [(0, 1, 1.0)])
        with pytest.raises(DimensionError):
            energy(p, [1, 1, 1])
        with pytest.raises(DomainError):
            energy(p, [1, 0])


class TestProblem:
    def test_normalises_edge_order(self):
        p = IsingProblem.from_couplers(3, None, [(2, 0, 0.5)])
        assert p.couplers == [(0, 2, 0.5)]

    @pytest.mark.parametrize("couplers", [[(0, 0, 1.0)], [(0, 1, 1.0), (1, 0, 2.0)], [(0, 3, 1.0)]])
    def test_invalid_couplers(self, couplers):
        with pytest.raises(ValueError):
            IsingProblem.from_couplers(3, None, couplers)

    def test_arrays_read_only(self):
        p = generate_sk(4, 0)
        with pytest.raises(ValueError):
            p.h[0] = 1.0


class TestSK:
    def test_counts(self):
        p = generate_sk(17, 1)
        assert p.J.size == 136
        assert np.count_nonzero(p.h) == 0
        assert np.all(np.abs(p.J) <= 1)

    def test_deterministic(self):
        assert generate_sk(9, 42) == generate_sk(9, 42)
        assert generate_sk(9, 42) != generate_sk(9, 43)

    def test_sk_fix_fields_are_couplings_to_last_spin(self):
        full = generate_sk(3, 5)
        red = sk_fix(3, 5)
        J = full.dense_J
        assert red.n == 2
        # with s_3 = -1 the term -J_i3 s_i s_3 becomes +J_i3 s_i, i.e. a field of -J_i3
        assert np.allclose(red.h, [-J[0, 2], -J[1, 2]])
        assert red.couplers == [(0, 1, J[0, 1])]

    def test_fix_without_couplers_keeps_fields(self):
        p = IsingProblem.from_couplers(3, [0.1, 0.2, 0.3], [(0, 1, 1.0)])
        red = fix_spin(p, 2, 1)
        assert np.allclose(red.h, [0.1, 0.2])
        assert red.offset == pytest.approx(-0.3)

    @pytest.mark.parametrize("seed", range(5))
    def test_fixed_problem_energies(self, seed):
        full = generate_sk(8, seed)
        red = fix_spin(full, 3, -1)
        for c in all_configs(7)[::5]:
            lifted = np.insert(c, 3, -1)
            assert energy(red, c) == pytest.approx(energy(full, lifted), abs=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_fixed_ground_energy_matches_constrained_search(self, seed):
        full = generate_sk(11, seed)
        _, e_red = exhaustive_solve(fix_spin(full, 10, -1))
        constrained = min(energy(full, np.append(c, -1)) for c in all_configs(10))
        assert e_red == pytest.approx(constrained, abs=1e-12)

    def test_fix_index_out_of_range(self):
        with pytest.raises(IndexError):
            fix_spin(generate_sk(3, 0), 3, 1)


class TestExhaustive:
    def test_single_spin(self):
        configs, e = exhaustive_solve(IsingProblem.from_couplers(1, [1.0], []))
        assert e == -1.0 and [c.tolist() for c in configs] == [[1]]

    def test_ferromagnet_pair_is_degenerate(self):
        configs, e = exhaustive_solve(IsingProblem.from_couplers(2, None, [(0, 1, 1.0)]))
        assert e == -1.0
        assert sorted(c.tolist() for c in configs) == [[-1, -1], [1, 1]]

    def test_generic_sk_fix_unique(self):
        configs, _ = exhaustive_solve(sk_fix(11, 3))
        assert len(configs) == 1

    def test_small_chunks_agree(self, rng):
        p = random_problem(rng, 9)
        a, ea = exhaustive_solve(p)
        b, eb = exhaustive_solve(p, chunk=7)
        assert ea == eb and all(np.array_equal(x, y) for x, y in zip(a, b))

    @given(problems())
    def test_against_brute_force(self, p):
        es = [brute_energy(p.n, p.h, p.couplers, c, p.offset) for c in all_configs(p.n)]
        configs, e = exhaustive_solve(p)
        assert e == pytest.approx(min(es), abs=1e-12)
        for c in configs:
            assert energy(p, c) == pytest.approx(e, abs=1e-9)

    def test_cap(self):
        with pytest.raises(CapExceeded):
            exhaustive_solve(generate_sk(30, 0))


class TestFlipAndDistance:
    def test_flip(self):
        assert global_flip([1, -1]).tolist() == [-1, 1]

    @given(st.lists(st.sampled_from([1, -1]), min_size=1, max_size=20))
    def test_flip_involution_and_distance(self, x):
        assert np.array_equal(global_flip(global_flip(x)), x)
        assert hamming_distance(x, x) == 0
        assert hamming_distance(x, global_flip(x)) == len(x)

    def test_distance(self):
        assert hamming_distance([1, 1, 1], [1, -1, 1]) == 1
        with pytest.raises(DimensionError):
            hamming_distance([1], [1, 1])

    def test_field_free_flip_symmetry(self):
        p = generate_sk(6, 2)
        for c in all_configs(6)[:10]:
            assert energy(p, global_flip(c)) == pytest.approx(energy(p, c), abs=1e-12)


class TestInstanceFiles:
    @given(problems(max_n=8))
    def test_round_trip(self, p):
        assert parse_instance(format_instance(p)) == p

    def test_file_round_trip(self, tmp_path):
        p = sk_fix(12, 7)
        write_instance(p, tmp_path / "a.ising")
        assert read_instance(tmp_path / "a.ising") == p

    @pytest.mark.parametrize("text", [
        "",
        "ising v2 n=2 sign=minus offset=0.0\n",
        "ising v1 n=2 sign=plus offset=0.0\n",
        "ising v1 n=2 sign=minus offset=0.0\nJ 0 1 1.0\nJ 1 0 2.0\n",
        "ising v1 n=2 sign=minus offset=0.0\nX 0 1\n",
        "ising v1 n=2 sign=minus offset=0.0\nh 5 1.0\n",
    ])
    def test_malformed(self, text):
        with pytest.raises(InstanceFormatError):
            parse_instance(text)


class TestClusters:
    def test_singletons(self):
        R = ClusterSet.singletons(3)
        assert R.all_singleton and len(R) == 3 and R.max_bit() == 2

    def test_rejects_duplicates_and_empty(self):
        with pytest.raises(ValueError):
            ClusterSet([(0, 1), (1, 0)])
        with pytest.raises(ValueError):
            ClusterSet([()])

    def test_singleton_index(self):
        R = ClusterSet([(0,), (1, 2), (2,)])
        assert R.singleton_index(3).tolist() == [0, -1, 2]
