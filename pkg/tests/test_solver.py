"""Solver updates against dense linear algebra and descent properties."""

import numpy as np
import pytest
import scipy.linalg

from conftest import quad_dataset, two_crowds
from trajclust.bspline import SplineConfig, design_matrix
from trajclust.covariance import WorkingCovariance, covariance_blocks
from trajclust.penalty import PenaltyConfig
from trajclust.solver import (
    AdmmConfig,
    AdmmState,
    augmented_lagrangian,
    default_init,
    delta_update,
    dual_update,
    gamma_update,
    gls_pieces,
    objective,
    run_admm,
)
from trajclust._kernels import pair_indices


def make_problem(n=6, t_count=10, rho=0.3, noise=0.1, seed=2, gap=5.0):
    rng = np.random.default_rng(seed)
    coefs = [(1.0, -0.5, gap * (i % 2) + 0.05 * rng.standard_normal())
             for i in range(n)]
    ds = quad_dataset(coefs, t_count=t_count, noise=noise, seed=seed + 1)
    cfg = SplineConfig(order=3, n_interior=1, domain=(0.0, 1.0))
    design = design_matrix(ds, cfg)
    cov = WorkingCovariance(sigma2=0.25, rho=rho, kappa=float(t_count - 1))
    return design, ds, covariance_blocks(cov, ds)


def subject_gls(design, dataset, v_blocks):
    gram, xvy = gls_pieces(design, dataset, v_blocks)
    return np.stack([np.linalg.solve(g, r) for g, r in zip(gram, xvy)])


def incidence(n, d):
    pi, pj = pair_indices(n)
    A = np.zeros((len(pi), n))
    A[np.arange(len(pi)), pi] = 1.0
    A[np.arange(len(pi)), pj] = -1.0
    return np.kron(A, np.eye(d))


def test_zero_lam_returns_gls_with_scalar_covariance():
    # With V = sigma^2 I the OLS cold start is already the fixed point.
    design, ds, _ = make_problem()
    cov = WorkingCovariance(sigma2=0.25, rho=0.0, kappa=9.0)
    vb = covariance_blocks(cov, ds)
    state = run_admm(design, ds, vb, PenaltyConfig(), lam=0.0)
    assert state.converged
    assert state.iterations == 1
    assert state.primal_norm == 0.0
    assert np.allclose(state.gamma, subject_gls(design, ds, vb), atol=1e-10)


def test_zero_lam_with_general_covariance_and_gls_start():
    design, ds, vb = make_problem(rho=0.4)
    gls = subject_gls(design, ds, vb)
    pi, pj = pair_indices(design.n_subjects)
    init = AdmmState(gamma=gls, delta=gls[pi] - gls[pj],
                     upsilon=np.zeros((len(pi), design.dim)))
    state = run_admm(design, ds, vb, PenaltyConfig(), lam=0.0, init=init)
    assert state.converged
    assert np.allclose(state.gamma, gls, atol=1e-10)


@pytest.mark.parametrize("structured", [True, False])
def test_gamma_update_matches_dense_assembly(structured):
    design, ds, vb = make_problem(n=5)
    n, d = design.n_subjects, design.dim
    rng = np.random.default_rng(9)
    npairs = n * (n - 1) // 2
    delta = rng.standard_normal((npairs, d))
    upsilon = rng.standard_normal((npairs, d))
    penalty = PenaltyConfig(tau=3.0, theta=1.3)

    got = gamma_update(design, ds, vb, delta, upsilon, penalty,
                       structured=structured)

    gram, xvy = gls_pieces(design, ds, vb)
    A = incidence(n, d)
    M = scipy.linalg.block_diag(*gram) + penalty.theta * (A.T @ A)
    rhs = xvy.ravel() + A.T @ (penalty.theta * delta - upsilon).ravel()
    expected = np.linalg.solve(M, rhs).reshape(n, d)
    assert np.allclose(got, expected, atol=1e-8)


def test_structured_and_dense_solves_agree():
    design, ds, vb = make_problem(n=7, t_count=12)
    rng = np.random.default_rng(3)
    npairs = 21
    delta = rng.standard_normal((npairs, design.dim))
    upsilon = rng.standard_normal((npairs, design.dim))
    penalty = PenaltyConfig()
    a = gamma_update(design, ds, vb, delta, upsilon, penalty, structured=True)
    b = gamma_update(design, ds, vb, delta, upsilon, penalty, structured=False)
    assert np.allclose(a, b, atol=1e-8)


def test_dense_solve_size_guard():
    # 501 subjects with a 4-dim basis crosses the dense limit of 2000.
    coefs = [(0.1, 0.0, float(i % 2)) for i in range(501)]
    ds = quad_dataset(coefs, t_count=5)
    design = design_matrix(ds, SplineConfig(order=3, n_interior=1))
    cov = WorkingCovariance(sigma2=1.0, rho=0.0, kappa=4.0)
    vb = covariance_blocks(cov, ds)
    state = default_init(design, ds)
    with pytest.raises(ValueError, match="use the structured solve"):
        gamma_update(design, ds, vb, state.delta, state.upsilon,
                     PenaltyConfig(), structured=False)


def test_single_subject_has_no_pairs():
    ds = quad_dataset([(1.0, 0.0, 0.0)], t_count=8)
    design = design_matrix(ds, SplineConfig(order=3, n_interior=1))
    cov = WorkingCovariance(sigma2=1.0, rho=0.0, kappa=7.0)
    vb = covariance_blocks(cov, ds)
    state = run_admm(design, ds, vb, PenaltyConfig(), lam=0.5)
    assert state.converged
    assert state.delta.shape == (0, design.dim)
    assert np.allclose(state.gamma, subject_gls(design, ds, vb), atol=1e-10)


def test_block_updates_descend_augmented_lagrangian():
    design, ds, vb = make_problem(n=6, noise=0.3)
    penalty = PenaltyConfig()
    lam = 0.4
    rng = np.random.default_rng(17)
    state = default_init(design, ds)
    delta = state.delta + 0.5 * rng.standard_normal(state.delta.shape)
    upsilon = 0.1 * rng.standard_normal(state.delta.shape)

    def L(g, dlt):
        return augmented_lagrangian(design, ds, vb, g, dlt, upsilon,
                                    penalty, lam)

    before = L(state.gamma, delta)
    gamma1 = gamma_update(design, ds, vb, delta, upsilon, penalty)
    mid = L(gamma1, delta)
    assert mid <= before + 1e-10
    delta1 = delta_update(gamma1, upsilon, lam, penalty)
    after = L(gamma1, delta1)
    assert after <= mid + 1e-10


def test_fused_iteration_equals_standalone_updates():
    design, ds, vb = make_problem(n=5, noise=0.2)
    penalty = PenaltyConfig()
    lam = 0.6
    init = default_init(design, ds)
    pi, pj = pair_indices(design.n_subjects)

    gamma1 = gamma_update(design, ds, vb, init.delta, init.upsilon, penalty)
    delta1 = delta_update(gamma1, init.upsilon, lam, penalty)
    upsilon1 = dual_update(init.upsilon, gamma1, delta1, penalty)
    primal = np.linalg.norm(gamma1[pi] - gamma1[pj] - delta1)
    diff = delta1 - init.delta
    s = np.zeros_like(gamma1)
    np.add.at(s, pi, diff)
    np.subtract.at(s, pj, diff)
    dual = penalty.theta * np.linalg.norm(s)

    state = run_admm(design, ds, vb, penalty, lam,
                     config=AdmmConfig(max_iter=1), init=init)
    assert np.allclose(state.gamma, gamma1, atol=1e-12)
    assert np.allclose(state.delta, delta1, atol=1e-12)
    assert np.allclose(state.upsilon, upsilon1, atol=1e-12)
    assert state.primal_norm == pytest.approx(primal, abs=1e-12)
    assert state.dual_norm == pytest.approx(dual, abs=1e-10)


def test_max_iter_capped_run_reports_nonconvergence():
    design, ds, vb = make_problem(n=6, noise=0.3)
    state = run_admm(design, ds, vb, PenaltyConfig(), lam=0.8,
                     config=AdmmConfig(max_iter=1))
    assert not state.converged
    assert state.iterations == 1
    full = run_admm(design, ds, vb, PenaltyConfig(), lam=0.8)
    assert full.converged
    assert full.primal_norm < AdmmConfig().tolerance(6, design.dim)


def test_primal_only_stopping():
    design, ds, vb = make_problem(n=6, noise=0.3)
    relaxed = run_admm(design, ds, vb, PenaltyConfig(), lam=0.8,
                       config=AdmmConfig(dual_factor=None))
    capped = run_admm(design, ds, vb, PenaltyConfig(), lam=0.8)
    assert relaxed.converged and capped.converged
    assert relaxed.iterations <= capped.iterations
    eps = AdmmConfig().tolerance(6, design.dim)
    assert capped.dual_norm < 10.0 * eps


def test_trace_file_contents(tmp_path):
    design, ds, vb = make_problem(n=4)
    path = tmp_path / "trace.csv"
    state = run_admm(design, ds, vb, PenaltyConfig(), lam=0.3,
                     config=AdmmConfig(max_iter=50), trace=path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "iteration,primal,dual,objective"
    assert len(lines) == state.iterations + 1
    first = lines[1].split(",")
    assert int(first[0]) == 1
    floats = [float(x) for x in first[1:]]
    assert all(np.isfinite(floats))
    # objective column is the penalized criterion at that iterate
    last = lines[-1].split(",")
    recomputed = objective(design, ds, vb, state.gamma, 0.3, 3.0)
    assert float(last[3]) == pytest.approx(recomputed, rel=1e-10)


def test_lagrangian_reduces_to_objective_on_feasible_points():
    design, ds, vb = make_problem(n=5)
    state = default_init(design, ds)
    pi, pj = pair_indices(design.n_subjects)
    delta = state.gamma[pi] - state.gamma[pj]
    lam = 0.5
    L = augmented_lagrangian(design, ds, vb, state.gamma, delta,
                             np.zeros_like(delta), PenaltyConfig(), lam)
    assert L == pytest.approx(objective(design, ds, vb, state.gamma, lam, 3.0))


def test_default_init_is_subject_ols():
    design, ds, _ = make_problem(n=4)
    state = default_init(design, ds)
    for X, subj, row in zip(design.blocks, ds.subjects, state.gamma):
        coef, *_ = np.linalg.lstsq(X, subj.values, rcond=None)
        assert np.allclose(row, coef, atol=1e-10)
    pi, pj = pair_indices(4)
    assert np.allclose(state.delta, state.gamma[pi] - state.gamma[pj])
    assert np.array_equal(state.upsilon, np.zeros_like(state.delta))


def test_default_init_needs_enough_observations():
    ds = quad_dataset([(1.0, 0.0, 0.0)], t_count=3)
    design = design_matrix(ds, SplineConfig(order=3, n_interior=1))
    with pytest.raises(ValueError, match="needs at least d=4"):
        default_init(design, ds)


def test_config_validation():
    with pytest.raises(ValueError, match="epsilon must be positive"):
        AdmmConfig(epsilon=0.0)
    with pytest.raises(ValueError, match="max_iter"):
        AdmmConfig(max_iter=0)
    with pytest.raises(ValueError, match="dual_factor"):
        AdmmConfig(dual_factor=-2.0)
    assert AdmmConfig().tolerance(100, 4) == pytest.approx(2e-3)
    assert AdmmConfig(epsilon=0.5).tolerance(100, 4) == 0.5


def test_negative_lam_rejected():
    design, ds, vb = make_problem(n=3)
    with pytest.raises(ValueError, match="lam must be >= 0"):
        run_admm(design, ds, vb, PenaltyConfig(), lam=-0.1)
