import math

import numpy as np
import pytest
from scipy.special import airy

import critballs.tracywidom as tw
from critballs.errors import BlowUpError, ConvergenceError, DomainError, MonotonicityError
from critballs.specfun import OdeStepperConfig, QuadratureRule, airy_ai, integrate
from critballs.tracywidom import TWTable, solve_painleve_ii, tw_cdf, tw_cdf_table

# q(0) from a run with half the maximal step, frozen
Q0_REFINED = 0.367061551548


@pytest.fixture(scope="module")
def refined():
    return solve_painleve_ii(config=OdeStepperConfig(initial_step=5e-4, max_step=0.025))


def test_boundary_value(painleve):
    ai, _, _, _ = airy(8.0)
    assert painleve.q[0] == pytest.approx(ai, rel=1e-4)
    assert painleve.s_start == 8.0 and painleve.s_end == -10.0
    assert np.all(np.diff(painleve.grid) < 0)


def test_q_at_zero(painleve, refined):
    assert refined.state(0.0)[0] == pytest.approx(Q0_REFINED, abs=1e-11)
    assert painleve.state(0.0)[0] == pytest.approx(Q0_REFINED, rel=1e-5)
    assert painleve.state(0.0)[0] == pytest.approx(0.36706, abs=5e-6)


def test_q_positive_and_monotone(painleve):
    assert np.all(painleve.q > 0)
    assert painleve.state(-4.0)[0] > painleve.state(0.0)[0] > painleve.state(4.0)[0]
    # along the descending grid q grows once s is negative
    neg = painleve.grid < 0
    assert np.all(np.diff(painleve.q[neg]) > 0)


def test_left_asymptote(painleve):
    for s in (-6.0, -8.0):
        assert painleve.state(s)[0] == pytest.approx(math.sqrt(-s / 2), rel=1e-3)


def test_state_outside_range(painleve):
    with pytest.raises(DomainError):
        painleve.state(9.0)


@pytest.mark.parametrize("kw", [{"s_start": 5.0}, {"s_end": -1.0}])
def test_solver_range_validation(kw):
    with pytest.raises(DomainError):
        solve_painleve_ii(**kw)


@pytest.mark.parametrize("factor", [1.001, 0.999])
def test_off_branch_data_is_detected(monkeypatch, factor):
    monkeypatch.setattr(tw, "airy_ai", lambda x: tuple(factor * v for v in airy_ai(x)))
    with pytest.raises(BlowUpError) as info:
        solve_painleve_ii()
    assert "s=" in str(info.value)
    assert -10.0 <= info.value.s <= 8.0


def test_loose_tolerance_is_rejected():
    with pytest.raises(ConvergenceError):
        solve_painleve_ii(config=OdeStepperConfig(rtol=1e-6))


def test_tail_quadrature_is_converged():
    coarse = integrate(lambda s: airy_ai(s)[0], 8.0, 15.0, QuadratureRule(48))
    fine = integrate(lambda s: airy_ai(s)[0], 8.0, 15.0, QuadratureRule(96))
    assert coarse == pytest.approx(fine, rel=1e-12)


@pytest.mark.parametrize("beta,value", [(1, 0.831908), (2, 0.969373), (4, 0.998574)])
def test_anchor_values(painleve, beta, value):
    assert tw_cdf(beta, 0.0, painleve) == pytest.approx(value, abs=5e-4)


def test_f2_squared_anchor():
    assert tw_cdf(2, 0.0) ** 2 == pytest.approx(0.939684, abs=1e-3)


@pytest.mark.parametrize("beta", [1, 2, 4])
@pytest.mark.parametrize("x", [-4.0, -2.0, 0.0, 2.0])
def test_step_halving_stability(painleve, refined, beta, x):
    assert abs(tw_cdf(beta, x, painleve) - tw_cdf(beta, x, refined)) < 1e-5


# literature means: F_1, F_2 and the sqrt(2)-dilated F_4 of this convention
@pytest.mark.parametrize("beta,mean", [(1, -1.2065335746), (2, -1.7710868074),
                                       (4, math.sqrt(2) * -2.3068848932)])
def test_means(beta, mean):
    x = np.linspace(-10.0, 8.0, 36001)
    F = tw_cdf(beta, x)
    assert -10.0 + np.trapezoid(1.0 - F, x) == pytest.approx(mean, abs=1e-6)


def test_f2_variance():
    x = np.linspace(-10.0, 8.0, 36001)
    F = tw_cdf(2, x)
    mean = -10.0 + np.trapezoid(1.0 - F, x)
    second = 100.0 + np.trapezoid(2.0 * x * (1.0 - F), x)
    assert second - mean**2 == pytest.approx(0.8131947928, abs=1e-6)


def test_f4_dominates():
    # cosh >= max(1, e^{-a}) and F_2 <= F_2^{1/2}
    x = np.linspace(-6, 4, 101)
    assert np.all(tw_cdf(2, x) <= tw_cdf(4, x))
    assert np.all(tw_cdf(1, x) <= tw_cdf(4, x))


def test_domain_errors():
    with pytest.raises(DomainError):
        tw_cdf(3, 0.0)
    with pytest.raises(DomainError):
        tw_cdf(2, -11.0)
    with pytest.raises(DomainError):
        tw_cdf_table(2, 1.0, 0.0)


@pytest.mark.parametrize("beta", [1, 2, 4])
def test_table_tails_and_monotonicity(beta):
    table = tw_cdf_table(beta)
    assert table.grid[0] == -10.0 and table.grid[-1] == 8.0
    assert np.all(np.diff(table.F) >= 0)
    assert table.cdf(-10.0) < 1e-6
    assert table.cdf(8.0) > 1 - 1e-6
    assert table.cdf(6.0) > 0.99999
    assert table.cdf(-11.0) == 0.0 and table.cdf(9.0) == 1.0


@pytest.mark.parametrize("beta", [1, 2, 4])
def test_density_positive(beta):
    table = tw_cdf_table(beta, -6.0, 4.0, 0.01)
    assert np.all(np.diff(table.F) > 0)


def test_interpolation_between_nodes():
    table = tw_cdf_table(2, -6.0, 4.0, 0.05)
    mid = np.linspace(-5.975, 3.975, 50)
    assert np.max(np.abs(table.cdf(mid) - tw_cdf(2, mid))) < 1e-5


def test_table_refuses_to_clamp(monkeypatch):
    def wobbly(beta, x, solution=None):
        x = np.asarray(x)
        return 0.5 + 0.1 * np.sin(x)

    monkeypatch.setattr(tw, "tw_cdf", wobbly)
    with pytest.raises(MonotonicityError):
        tw.tw_cdf_table(2, -5.0, 5.0, 0.1)


def test_table_is_immutable_record():
    table = tw_cdf_table(2, -1.0, 1.0, 0.5)
    assert isinstance(table, TWTable)
    assert list(table.grid) == [-1.0, -0.5, 0.0, 0.5, 1.0]
    with pytest.raises(AttributeError):
        table.beta = 1
