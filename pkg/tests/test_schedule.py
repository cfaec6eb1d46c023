import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from infprim.errors import DegenerateScheduleError, DomainError, InversionUnsupported
from infprim.schedule import (ScheduleFunctions, check_invertible, effective_temperature,
                              linear_schedule, nishimori_temperature, s_from_uncertainty,
                              tabulated_schedule, uncertainty_at_temperature, uncertainty_from_s,
                              uncertainty_from_s_thermal, uncertainty_heuristic)

mp.mp.dps = 50
LIN = linear_schedule()


def ratio(a, b):
    a, b = mp.mpf(a), mp.mpf(b)
    return abs(mp.sqrt(a**2 + b**2) / a + b / a) ** 2


def oracle_T(a, b):
    return 2 / mp.log(ratio(a, b))


def oracle_P(a, b):
    return 1 / (1 + ratio(a, b))


def oracle_P_thermal(a, b, T_phys):
    return 1 / (1 + mp.exp(2 / mp.sqrt(oracle_T(a, b) ** 2 + (mp.mpf(T_phys) / b) ** 2)))


class TestEffectiveTemperature:
    def test_endpoints(self):
        assert effective_temperature(0.0, LIN) == math.inf
        assert effective_temperature(1.0, LIN) == 0.0

    def test_equal_scales(self):
        assert effective_temperature(0.5, LIN) == pytest.approx(2 / math.log((math.sqrt(2) + 1) ** 2), rel=1e-14)
        assert effective_temperature(0.5, LIN) == pytest.approx(1.13459, abs=1e-5)

    @pytest.mark.parametrize("s", np.linspace(0.01, 0.99, 25))
    def test_matches_direct_formula(self, s):
        assert effective_temperature(s, LIN) == pytest.approx(float(oracle_T(1 - s, s)), rel=1e-12)

    def test_out_of_range(self):
        with pytest.raises(DomainError):
            effective_temperature(1.5, LIN)


class TestNishimori:
    def test_values(self):
        assert nishimori_temperature(0.5) == math.inf
        assert nishimori_temperature(1 / (1 + math.e**2)) == pytest.approx(1.0, rel=1e-14)

    @given(st.floats(1e-6, 0.5), st.floats(1e-6, 0.5))
    def test_monotone(self, p1, p2):
        if p1 < p2:
            assert nishimori_temperature(p1) < nishimori_temperature(p2)

    @given(st.floats(1e-4, 0.4999))
    def test_inverse(self, p):
        assert uncertainty_at_temperature(nishimori_temperature(p)) == pytest.approx(p, rel=1e-10)

    def test_domain(self):
        for p in (0.0, 0.6, -0.1):
            with pytest.raises(DomainError):
                nishimori_temperature(p)


class TestUncertainty:
    def test_endpoints(self):
        assert uncertainty_from_s(0.0, LIN) == 0.5
        assert uncertainty_from_s(1.0, LIN) == 0.0

    def test_equal_scales(self):
        assert uncertainty_from_s(0.5, LIN) == pytest.approx(1 / (1 + (math.sqrt(2) + 1) ** 2), rel=1e-14)
        assert uncertainty_from_s(0.5, LIN) == pytest.approx(0.146447, abs=1e-6)

    @pytest.mark.parametrize("s", np.linspace(0.01, 0.99, 25))
    def test_matches_direct_formula(self, s):
        assert uncertainty_from_s(s, LIN) == pytest.approx(float(oracle_P(1 - s, s)), rel=1e-12)

    def test_thermal_matches_multiprecision(self):
        sf = linear_schedule(T_phys=0.8246)
        assert uncertainty_from_s_thermal(0.5, sf) == pytest.approx(
            float(oracle_P_thermal(0.5, 0.5, 0.8246)), rel=1e-13)

    @pytest.mark.parametrize("s", np.linspace(0.0, 1.0, 21))
    def test_thermal_zero_bath_is_exact(self, s):
        assert uncertainty_from_s_thermal(s, LIN) == uncertainty_from_s(s, LIN)

    def test_hot_bath_limit(self):
        assert uncertainty_from_s_thermal(0.7, linear_schedule(T_phys=1e9)) == pytest.approx(0.5, abs=1e-8)

    def test_monotone_on_linear_schedule(self):
        p = [uncertainty_from_s(s, LIN) for s in np.linspace(0, 1, 1001)]
        assert np.all(np.diff(p) < 0)

    def test_degenerate_schedule(self):
        sf = ScheduleFunctions(lambda s: 0.0, lambda s: 0.0)
        with pytest.raises(DegenerateScheduleError):
            uncertainty_from_s(0.3, sf)


class TestInversion:
    def test_endpoints(self):
        assert s_from_uncertainty(0.5, LIN) == 0.0
        assert s_from_uncertainty(0.0, LIN) == 1.0

    def test_round_trip_random(self):
        rng = np.random.default_rng(3)
        for P in rng.uniform(1e-4, 0.4999, 100):
            assert uncertainty_from_s(s_from_uncertainty(P, LIN), LIN) == pytest.approx(P, abs=1e-6)

    @given(st.floats(0.0, 1.0))
    def test_s_round_trip(self, s):
        P = uncertainty_from_s(s, LIN)
        assert s_from_uncertainty(P, LIN) == pytest.approx(s, abs=1e-6)

    def test_thermal_floor(self):
        sf = linear_schedule(T_phys=0.5)
        floor = uncertainty_from_s_thermal(1.0, sf)
        assert floor > 0
        assert s_from_uncertainty(floor / 2, sf, thermal=True) == 1.0

    def test_non_monotone_schedule_rejected(self):
        sf = ScheduleFunctions(lambda s: 1.0, lambda s: 0.5 + 0.4 * math.sin(6 * s))
        with pytest.raises(InversionUnsupported):
            check_invertible(sf)

    def test_heuristic_is_monotone(self):
        f = uncertainty_heuristic(LIN)
        s = [f(p) for p in np.linspace(0.0, 0.5, 51)]
        assert np.all(np.diff(s) <= 0)


class TestSchedules:
    def test_linear_shape(self):
        LIN.check_shape()
        assert LIN.at(0.25) == (0.75, 0.25)

    def test_tabulated_matches_linear(self, tmp_path):
        grid = np.linspace(0, 1, 11)
        (tmp_path / "a.txt").write_text("\n".join(f"{s} {1 - s}" for s in grid))
        (tmp_path / "b.txt").write_text("# s B\n" + "\n".join(f"{s} {s}" for s in grid))
        sf = tabulated_schedule(tmp_path / "a.txt", tmp_path / "b.txt")
        sf.check_shape()
        for s in (0.05, 0.33, 0.9):
            assert uncertainty_from_s(s, sf) == pytest.approx(uncertainty_from_s(s, LIN), rel=1e-12)

    def test_table_must_cover_interval(self, tmp_path):
        (tmp_path / "a.txt").write_text("0.1 1\n1 0\n")
        with pytest.raises(DomainError):
            tabulated_schedule(tmp_path / "a.txt", tmp_path / "a.txt")

    def test_shape_violation(self):
        with pytest.raises(DomainError):
            ScheduleFunctions(lambda s: s, lambda s: 1 - s).check_shape()
