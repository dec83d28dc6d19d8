import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tvselect.noise import NoiseSpec, degrade
from tvselect.phantoms import named_image
from tvselect.scalar import (
    SelectConfig,
    _cycle_period,
    admissible_p_bound,
    aps_select,
    cps_select,
    paps_select,
    select_scalar,
)
from tvselect.solvers import ConfigError, SolverConfig
from tvselect.trace import Termination

SOLVER = SolverConfig(tol=1e-8, max_iterations=20000, record_energy=False)


@pytest.fixture(scope="module")
def gaussian_case():
    x = named_image("phantom", 32)
    spec = NoiseSpec("gaussian", sigma=0.1, seed=3)
    return x, degrade(x, spec), spec


def _sorted_ratio(trace):
    a = trace.alphas
    r = np.sqrt(trace.H) / a
    return r[np.argsort(a)]


@pytest.mark.parametrize("alpha0", [10.0, 1e-4])
def test_paps_meets_discrepancy_monotonically(gaussian_case, alpha0):
    _, g, spec = gaussian_case
    alpha, u, tr = paps_select(g, spec, cfg=SelectConfig(alpha0=alpha0), solver_cfg=SOLVER)
    assert tr.termination is Termination.DISCREPANCY_MET
    assert abs(tr.H[-1] - tr.B[-1]) / tr.B[-1] <= 1e-5
    steps = np.diff(tr.alphas)
    if tr.branch == "low":
        assert alpha0 == 1e-4 and np.all(steps >= 0) and np.all(tr.H <= tr.B)
    else:
        assert alpha0 == 10.0 and np.all(steps <= 0) and np.all(tr.H >= tr.B)
    assert alpha == tr.alphas[-1]


def test_paps_start_independent(gaussian_case):
    _, g, spec = gaussian_case
    a = [paps_select(g, spec, cfg=SelectConfig(alpha0=a0), solver_cfg=SOLVER)[0] for a0 in (1.0, 1e-2)]
    assert abs(a[0] - a[1]) / a[0] < 1e-2


@pytest.mark.parametrize("method", ["cps", "paps"])
def test_sqrt_fidelity_over_alpha_nonincreasing(gaussian_case, method):
    _, g, spec = gaussian_case
    _, _, tr = select_scalar(method, g, spec, cfg=SelectConfig(alpha0=1.0), solver_cfg=SOLVER)
    r = _sorted_ratio(tr)
    assert len(r) > 2
    assert np.all(np.diff(r) <= 1e-6)


def test_cps_and_aps_agree_with_paps(gaussian_case):
    _, g, spec = gaussian_case
    ref = paps_select(g, spec, solver_cfg=SOLVER)[0]
    for fn in (cps_select, aps_select):
        a, _, tr = fn(g, spec, cfg=SelectConfig(), solver_cfg=SOLVER)
        assert tr.termination is Termination.DISCREPANCY_MET
        assert abs(a - ref) / ref < 1e-2


def test_cps_rejects_impulse_and_blur(gaussian_case):
    _, g, _ = gaussian_case
    with pytest.raises(ConfigError):
        cps_select(g, NoiseSpec("salt_pepper", r1=0.1, r2=0.1))
    with pytest.raises(ConfigError):
        cps_select(g, NoiseSpec("gaussian", sigma=0.1), T={"kind": "gaussian", "size": 3, "std": 1.0})


def test_zero_fidelity_is_boosted():
    # a constant observation is reproduced exactly by every weight until the loop rescales
    g = np.full((8, 8), 0.5)
    g[0, 0] = 0.6
    spec = NoiseSpec("gaussian", sigma=0.01)
    _, _, tr = paps_select(g, spec, cfg=SelectConfig(alpha0=1e-12, max_outer=5), solver_cfg=SOLVER)
    assert tr.H[0] > 0


def test_iteration_cap(gaussian_case):
    _, g, spec = gaussian_case
    _, _, tr = aps_select(g, spec, cfg=SelectConfig(alpha0=1e-4, max_outer=2), solver_cfg=SOLVER)
    assert tr.termination is Termination.ITERATION_CAP and tr.iterations == 2


def test_unknown_method(gaussian_case):
    _, g, spec = gaussian_case
    with pytest.raises(ConfigError):
        select_scalar("bisect", g, spec)


@pytest.mark.parametrize("kw", [{"alpha0": 0}, {"p0": -1}, {"p_decrease_factor": 1.0}, {"max_outer": -1}, {"cycle_contraction": 0}])
def test_bad_config(kw):
    with pytest.raises(ConfigError):
        SelectConfig(**kw)


def test_admissible_p_bound_example():
    assert admissible_p_bound(1.0, math.e, 1.0, math.e**2) == pytest.approx(0.5)
    assert admissible_p_bound(1.0, 2.0, 3.0, 3.0) == math.inf
    with pytest.raises(ValueError):
        admissible_p_bound(2.0, 1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        admissible_p_bound(1.0, 2.0, 2.0, 1.0)


@given(st.floats(1e-3, 10), st.floats(1.01, 100), st.floats(1e-3, 10), st.floats(1.01, 100))
def test_admissible_p_bound_is_tight(alpha, ka, h, kh):
    beta, hb = alpha * ka, h * kh
    p = admissible_p_bound(alpha, beta, h, hb)
    assert hb**p / beta == pytest.approx(h**p / alpha, rel=1e-9)
    assert hb ** (0.9 * p) / beta <= h ** (0.9 * p) / alpha


def test_cycle_detection():
    assert _cycle_period([1.0, 2.0, 1.0, 2.0], 1e-6, 1e-2) == 2
    assert _cycle_period([0.3285, 0.345, 0.3286, 0.3449], 1e-6, 1e-2) == 2
    assert _cycle_period([0.27, 1.35, 0.44, 0.27, 1.35, 0.44], 1e-6, 1e-2) == 3
    assert _cycle_period([1.0, 2.0, 1.0], 1e-6, 1e-2) == 0
    assert _cycle_period([1.0, 1.0, 1.0, 1.0], 1e-6, 1e-2) == 0


def test_damped_oscillation_is_not_a_cycle():
    h = [0.3375 + 0.01 * (-0.77) ** k for k in range(30)]
    assert all(_cycle_period(h[: n + 1], 1e-6, 1e-2) == 0 for n in range(len(h)))
    creeping = [0.3366 - 1e-4 * k for k in range(10)]
    assert _cycle_period(creeping, 1e-6, 1e-2) == 0
