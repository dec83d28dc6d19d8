import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tvselect.grid import tv_weighted
from tvselect.local import (
    LocalSelectConfig,
    WindowSpec,
    latv_select,
    local_residual,
    platv_select,
    select_local,
    shrink_alpha0,
)
from tvselect.noise import NoiseSpec, degrade
from tvselect.phantoms import named_image
from tvselect.scalar import paps_select
from tvselect.solvers import ConfigError, SolverConfig
from tvselect.trace import Termination

SOLVER = SolverConfig(tol=1e-8, max_iterations=20000, record_energy=False)
SPEC = NoiseSpec("gaussian", sigma=0.1, seed=7)


@pytest.fixture(scope="module")
def case():
    x = named_image("phantom", 32)
    return x, degrade(x, SPEC)


def _direct_window_sum(a, omega):
    h = omega // 2
    out = np.empty_like(a)
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            out[i, j] = a[max(i - h, 0) : i + h + 1, max(j - h, 0) : j + h + 1].sum()
    return out


def test_constant_residual_gives_constant_field():
    g = np.zeros((9, 9))
    u = np.full((9, 9), math.sqrt(0.4))
    for boundary in ("clip", "mirror"):
        S = local_residual(u, g, tau=2, win=WindowSpec(3, boundary)).S
        assert np.allclose(S, 0.2, atol=1e-14)


def test_clipped_corner_count():
    M = WindowSpec(3, "clip").counts((4, 4))
    assert M[0, 0] == 4 and M[0, 1] == 6 and M[1, 1] == 9


def test_mirror_corner_impulse_counted_four_times():
    a = np.zeros((6, 6))
    a[0, 0] = 1.0
    s = WindowSpec(3, "mirror").window_sum(a)
    assert s[0, 0] == 4.0
    assert np.all(WindowSpec(3, "mirror").counts((6, 6)) == 9)


@given(st.integers(2, 12), st.integers(2, 12), st.sampled_from([1, 3, 5, 7]), st.integers(0, 2**31 - 1))
def test_window_sums_match_direct(n1, n2, omega, seed):
    a = np.random.default_rng(seed).random((n1, n2))
    win = WindowSpec(omega, "clip")
    assert np.allclose(win.window_sum(a), _direct_window_sum(a, omega), atol=1e-10)
    M = win.counts(a.shape)
    if omega <= min(n1, n2):
        assert M.min() >= math.ceil((omega + 1) / 2) ** 2
    assert M.max() <= omega**2


def test_window_validation():
    with pytest.raises(ConfigError):
        WindowSpec(4)
    with pytest.raises(ConfigError):
        WindowSpec(3, "wrap")
    with pytest.warns(RuntimeWarning):
        WindowSpec(11).check((8, 8))


def test_latv_low_branch_grows_total_weight(case):
    _, g = case
    _, _, tr = latv_select(g, SPEC, win=WindowSpec(5), cfg=LocalSelectConfig(alpha0=1e-3), solver_cfg=SOLVER)
    assert tr.branch == "low"
    means = np.array([r.alpha_mean for r in tr.records])
    assert np.all(np.diff(means) >= -1e-15)
    assert np.all(tr.H <= tr.B)


@pytest.mark.parametrize("alpha0", [1e-3, 1.0])
def test_platv_pixelwise_monotone_per_branch(case, alpha0):
    _, g = case
    seen = []

    from tvselect.model import RestorationProblem

    class Recording(RestorationProblem):
        def solve(self, alpha, warm=None):
            ev = super().solve(alpha, warm)
            seen.append(ev)
            return ev

    prob = Recording(g, SPEC, cfg=SOLVER)
    alpha, _, tr = platv_select(g, SPEC, win=WindowSpec(5), cfg=LocalSelectConfig(alpha0=alpha0), problem=prob)
    assert tr.termination in (Termination.DISCREPANCY_MET, Termination.P_UNDERFLOW)
    low = tr.branch == "low"
    assert low == (alpha0 == 1e-3)
    # accepted iterates are the solves that stayed on the starting branch
    accepted = [ev for ev in seen if (ev.H <= ev.B if low else ev.H >= ev.B)]
    for a, b in zip(accepted, accepted[1:]):
        step = np.asarray(b.alpha) - np.asarray(a.alpha)
        assert np.all(step >= 0) if low else np.all(step <= 0)
    if low:
        assert np.all(tr.H <= tr.B)
    assert tr.H[-1] <= tr.B[-1]


def test_shrink_alpha0_keeps_admissible_start(case):
    _, g = case
    cfg = LocalSelectConfig(alpha0=1e-3)
    assert shrink_alpha0(g, SPEC, cfg=cfg, solver_cfg=SOLVER) == 1e-3


def test_shrink_alpha0_uses_exact_factor(case):
    _, g = case
    a = shrink_alpha0(g, SPEC, cfg=LocalSelectConfig(alpha0=10.0), solver_cfg=SOLVER)
    k = round(math.log(a / 10.0) / math.log(0.2))
    assert k >= 1 and a == pytest.approx(10.0 * 0.2**k, rel=1e-15)


def test_shrink_alpha0_gives_up():
    g = np.random.default_rng(0).random((8, 8))
    spec = NoiseSpec("gaussian", sigma=1e-9)
    with pytest.raises(ConfigError):
        shrink_alpha0(g, spec, cfg=LocalSelectConfig(alpha0=1.0, max_shrinks=3), solver_cfg=SOLVER)


def test_global_window_reduces_to_scalar_selection(case):
    _, g = case
    cfg = LocalSelectConfig(alpha0=1e-3)
    with pytest.warns(RuntimeWarning, match="exceeds"):
        alpha, _, tr = platv_select(g, SPEC, win=WindowSpec(63), cfg=cfg, solver_cfg=SOLVER)
    assert np.ptp(alpha) <= 1e-12 * alpha.mean()
    ref = paps_select(g, SPEC, solver_cfg=SOLVER)[0]
    assert abs(alpha.mean() - ref) / ref < 1e-2


def test_platv_total_variation_not_below_scalar(case):
    _, g = case
    a_s, u_s, _ = paps_select(g, SPEC, solver_cfg=SOLVER)
    a_l, u_l, _ = select_local("platv", g, SPEC, win=WindowSpec(7), solver_cfg=SOLVER, auto_alpha0=True)
    assert tv_weighted(u_s) <= tv_weighted(u_l) + 1e-3 * tv_weighted(u_s) + 1e-3


def test_noise_free_data_stops_quickly():
    x = named_image("phantom", 32)
    alpha, u, tr = select_local("latv", x, NoiseSpec("gaussian", sigma=1e-3), win=WindowSpec(3), solver_cfg=SOLVER)
    assert tr.termination is not None
    assert np.max(np.abs(u - x)) < 0.05


def test_unknown_local_method(case):
    with pytest.raises(ConfigError):
        select_local("aps", case[1], SPEC)


@pytest.mark.parametrize("kw", [{"alpha0": 0}, {"shrink_factor": 1.0}, {"p_decrease_factor": 0}, {"eps_B": -1}])
def test_bad_config(kw):
    with pytest.raises(ConfigError):
        LocalSelectConfig(**kw)
