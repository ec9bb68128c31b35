import numpy as np
import pytest

from tvspec.ops import build_graph_operators
from tvspec.pointcloud import PointCloudGraph, build_point_cloud_graph
from tvspec.solver import (
    ProxProblem,
    default_config,
    prox_data,
    prox_dual,
    rof_energy,
    solve_rof,
    tv_energy,
    weighted_mean,
)


def two_node_graph(w=np.exp(-1.0)):
    return build_graph_operators(PointCloudGraph(
        np.array([[0.0, 0, 0], [1.0, 0, 0]]), 1, 1.0,
        np.array([[0, 1], [1, 0]]), w * np.ones(2),
    ))


def random_graph_ops(rng, n):
    pts = rng.standard_normal((n, 3))
    return build_graph_operators(build_point_cloud_graph(pts, k=min(3, n - 1)))


def subgradient_oracle(ops, u0, alpha, iterations=50000, rng=None):
    """Diminishing-step subgradient descent on the same energy (best iterate)."""
    pairs_mat = ops.Ku
    u = u0.copy()
    best = u.copy()
    best_e = _graph_energy(ops, u, u0, alpha)
    step0 = 0.1 * max(1.0, np.abs(u0).max())
    for k in range(1, iterations + 1):
        jumps = pairs_mat @ u
        g = pairs_mat.T @ np.sign(jumps) + (u - u0) / alpha
        u = u - step0 / np.sqrt(k) * g
        e = _graph_energy(ops, u, u0, alpha)
        if e < best_e:
            best_e, best = e, u.copy()
    return best, best_e


def _graph_energy(ops, u, u0, alpha):
    return float(np.abs(ops.Ku @ u).sum() + np.sum((u - u0) ** 2) / (2 * alpha))


def test_default_config_values(ico3_ops):
    cfg = default_config(ico3_ops, "vertices", channels=1)
    assert cfg.theta == 0.5
    assert cfg.gap_tol == 1e-4
    assert cfg.max_iter == 1000
    assert default_config(ico3_ops, "vertices", channels=3).max_iter == 300
    bound = ico3_ops.min_edge_length / ico3_ops.operator_norm("vertices") ** 2
    assert cfg.sigma == cfg.tau
    assert cfg.sigma * cfg.tau <= bound * (1 + 1e-12)
    # on this mesh the edge rule is the binding one
    assert cfg.sigma == pytest.approx(np.sqrt(bound))


def test_default_config_face_domain_capped(ico3_ops):
    cfg = default_config(ico3_ops, "faces")
    bound = ico3_ops.min_edge_length / ico3_ops.operator_norm("faces") ** 2
    assert cfg.sigma * cfg.tau <= bound * (1 + 1e-12)


def test_prox_dual_isotropic():
    q = np.array([[0.3, 0.0, 0.0]])
    assert prox_dual(q, "isotropic") == pytest.approx(q)
    q = np.array([[3.0, 4.0, 0.0]])
    assert prox_dual(q, "isotropic").ravel() == pytest.approx([0.6, 0.8, 0.0])


def test_prox_dual_anisotropic():
    q = np.array([[3.0, -0.5]])
    assert prox_dual(q, "anisotropic").ravel() == pytest.approx([1.0, -0.5])


def test_prox_data():
    u0 = np.array([1.0, -2.0])
    assert prox_data(u0.copy(), u0, 0.3, 0.7) == pytest.approx(u0)
    u = u0 + 0.5
    big = prox_data(u, u0, 1e9, 1.0)
    assert big == pytest.approx(u0, rel=1e-9, abs=1e-9)
    assert prox_data(np.array([2.0]), np.array([0.0]), 1.0, 1.0) == pytest.approx([1.0])


def test_small_alpha_returns_data(ico2, ico2_ops, rng):
    u0 = rng.standard_normal(ico2.n_vertices)
    cfg = default_config(ico2_ops, "vertices")
    res = solve_rof(ProxProblem(ops=ico2_ops, alpha=1e-9, tv_kind="isotropic",
                                domain="vertices", data=u0), cfg)
    assert np.abs(res.u.ravel() - u0).max() <= 1e-6 * np.abs(u0).max()


def test_large_alpha_returns_area_mean(ico2, ico2_ops, rng):
    u0 = rng.standard_normal(ico2.n_vertices)
    cfg = default_config(ico2_ops, "vertices", step_rule="norm")
    cfg.max_iter = 30000
    cfg.gap_tol = 1e-12
    res = solve_rof(ProxProblem(ops=ico2_ops, alpha=1e9, tv_kind="isotropic",
                                domain="vertices", data=u0), cfg)
    mean = weighted_mean(u0, ico2_ops.A).ravel()
    err = np.linalg.norm(res.u.ravel() - mean) / np.linalg.norm(u0 - mean)
    assert err <= 1e-3


def test_two_node_shrinkage_closed_form():
    w = np.exp(-1.0)
    ops = two_node_graph(w)
    for a, b, alpha in [(2.0, -1.0, 0.7), (0.3, 0.1, 0.05), (1.0, 1.0, 1.0), (-1.0, 3.0, 5.0)]:
        cfg = default_config(ops, "points")
        cfg.gap_tol = 0.0
        cfg.max_iter = 30000
        res = solve_rof(ProxProblem(ops=ops, alpha=alpha, tv_kind="isotropic",
                                    domain="points", data=np.array([a, b])), cfg)
        u = res.u.ravel()
        expect = np.sign(a - b) * max(abs(a - b) - 2 * alpha * w, 0.0)
        assert u[0] - u[1] == pytest.approx(expect, abs=1e-6)
        assert u.mean() == pytest.approx((a + b) / 2, abs=1e-9)


def test_energy_monotone_and_dual_feasible(ico2, ico2_ops, rng):
    u0 = rng.standard_normal(ico2.n_vertices)
    problem = ProxProblem(ops=ico2_ops, alpha=0.05, tv_kind="isotropic",
                          domain="vertices", data=u0)
    res = solve_rof(problem, default_config(ico2_ops, "vertices"))
    assert rof_energy(problem, res.u) <= rof_energy(problem, problem.data)
    assert np.abs(prox_dual(res.q, "isotropic") - res.q).max() <= 1e-12


def test_mean_preserved(ico2, ico2_ops, rng):
    u0 = rng.standard_normal(ico2.n_vertices)
    res = solve_rof(ProxProblem(ops=ico2_ops, alpha=0.2, tv_kind="isotropic",
                                domain="vertices", data=u0),
                    default_config(ico2_ops, "vertices"))
    m0 = weighted_mean(u0, ico2_ops.A)
    m1 = weighted_mean(res.u, ico2_ops.A)
    assert m1 == pytest.approx(m0, rel=1e-6)


def test_matches_subgradient_oracle_small_graphs(rng):
    for trial in range(3):
        n = int(rng.integers(3, 7))
        ops = random_graph_ops(rng, n)
        u0 = rng.standard_normal(n)
        alpha = float(rng.uniform(0.05, 0.5))
        cfg = default_config(ops, "points")
        cfg.gap_tol = 1e-12
        cfg.max_iter = 50000
        res = solve_rof(ProxProblem(ops=ops, alpha=alpha, tv_kind="isotropic",
                                    domain="points", data=u0), cfg)
        _, oracle_e = subgradient_oracle(ops, u0, alpha, iterations=50000, rng=rng)
        pd_e = _graph_energy(ops, res.u.ravel(), u0, alpha)
        assert pd_e <= oracle_e + 1e-4


def test_not_converged_is_flagged(ico2, ico2_ops, rng):
    u0 = rng.standard_normal(ico2.n_vertices)
    cfg = default_config(ico2_ops, "vertices")
    cfg.max_iter = 3
    cfg.gap_tol = 1e-14
    res = solve_rof(ProxProblem(ops=ico2_ops, alpha=0.5, tv_kind="isotropic",
                                domain="vertices", data=u0), cfg)
    assert res.iterations == 3
    assert not res.converged


def test_anisotropic_energy_definition(ico2, ico2_ops, rng):
    u = rng.standard_normal(ico2.n_vertices)
    g = (ico2_ops.G @ u).reshape(-1, 3)
    manual = float(ico2_ops.T @ np.abs(g).sum(axis=1))
    assert tv_energy(ico2_ops, "vertices", u, "anisotropic") == pytest.approx(manual)
    manual_iso = float(ico2_ops.T @ np.linalg.norm(g, axis=1))
    assert tv_energy(ico2_ops, "vertices", u, "isotropic") == pytest.approx(manual_iso)
