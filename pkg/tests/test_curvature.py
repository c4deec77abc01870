import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_ball_points, random_vectors
from kahlerpinch import zoo
from kahlerpinch.curvature import (CurvatureError, OptimizerConfig, chern_lu_residual, constant_map,
                                   curvature_tensor, hbc, hbc_bounds_on_set, hbc_extrema, hbc_extrema_tensor, hsc,
                                   hsc_extrema, identity_map, linear_map, rescaled, ricci, schwarz_yau_check,
                                   slice_map, tensor_from_jet, unitary_frame)
from kahlerpinch.domains import Ball, region_projector, sample_collar
from kahlerpinch.jets import MetricJet


def test_euclidean_is_flat(rng):
    f = zoo.euclidean(2)
    z = random_vectors(rng, 1, 2)[0]
    assert not np.any(curvature_tensor(f, z).R)
    X = random_vectors(rng, 1, 2)[0]
    assert hsc(f, z, X) == 0.0
    assert not np.any(ricci(f, z))
    assert hbc_extrema(f, z) == (0.0, 0.0)


def test_disc_component_at_origin():
    T = curvature_tensor(zoo.ball_bergman(1.0, 1), np.zeros(1))
    assert T.R[0, 0, 0, 0].real == pytest.approx(-8.0, abs=1e-12)
    assert T.hsc(np.ones(1)) == pytest.approx(-2.0, abs=1e-12)


def test_disc_component_matches_finite_differences():
    f = zoo.ball_bergman(1.0, 1)
    exact = curvature_tensor(f, np.array([0.3 - 0.2j])).R
    fd = tensor_from_jet(f.fd_jet(np.array([0.3 - 0.2j]))).R
    assert np.allclose(exact, fd, atol=1e-4)


def test_tensor_scales_linearly(rng):
    h = zoo.polydisc_bergman([1.0, 1.5])
    h2 = zoo.scale(2.0, h)
    for z in random_ball_points(rng, 10, 2, 0.9):
        assert np.allclose(curvature_tensor(h2, z).R, 2 * curvature_tensor(h, z).R, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_ball_hsc_is_constant(n, rng):
    f = zoo.ball_bergman(1.3, n)
    zs = random_ball_points(rng, 20, n, 1.2)
    Xs = random_vectors(rng, 20, n)
    vals = np.array([hsc(f, z, X) for z, X in zip(zs, Xs)])
    assert np.max(np.abs(vals + 4.0 / (n + 1))) < 1e-6


def test_hsc_homogeneity(rng):
    f = zoo.bump_perturbation(zoo.ball_bergman(1.0, 2), 0.05, np.zeros(2), 0.4)
    z = np.array([0.1, 0.05j])
    T = curvature_tensor(f, z)
    for X in random_vectors(rng, 5, 2):
        assert T.hsc(5 * X) == pytest.approx(T.hsc(X), rel=1e-10)
        assert T.hsc((2 - 3j) * X) == pytest.approx(T.hsc(X), rel=1e-10)


@given(st.complex_numbers(min_magnitude=0.1, max_magnitude=10), st.complex_numbers(min_magnitude=0.1, max_magnitude=10),
       st.integers(0, 2 ** 31))
def test_hbc_invariant_under_rescaling_property(a, b, seed):
    rng = np.random.default_rng(seed)
    f = zoo.bump_perturbation(zoo.ball_bergman(1.0, 2), 0.05, np.zeros(2), 0.4)
    T = curvature_tensor(f, random_ball_points(rng, 1, 2, 0.5)[0])
    X, Y = random_vectors(rng, 2, 2)
    ref = T.hbc(X, Y)
    assert abs(T.hbc(a * X, b * Y) - ref) <= 1e-10 * max(1.0, abs(ref))


def test_hbc_diagonal_and_symmetry(rng):
    f = zoo.quartic_potential(3)
    z = random_ball_points(rng, 1, 3, 1.0)[0]
    T = curvature_tensor(f, z)
    for X, Y in zip(random_vectors(rng, 10, 3), random_vectors(rng, 10, 3)):
        assert T.hbc(X, X) == pytest.approx(T.hsc(X), rel=1e-12)
        assert abs(T.hbc(X, Y) - T.hbc(Y, X)) <= 1e-10


def test_ball_orthonormal_pair_value():
    f = zoo.ball_bergman(1.0, 2)
    z = np.array([0.3 + 0.1j, -0.2j])
    T = curvature_tensor(f, z)
    P = unitary_frame(T.h)
    X, Y = P[:, 0], P[:, 1]
    assert T.norm2(X) == pytest.approx(1.0)
    assert abs(np.conj(Y) @ T.h.T @ X) < 1e-12
    assert T.hbc(X, Y) == pytest.approx(-2.0 / 3, abs=1e-6)


def test_zero_vectors_rejected():
    T = curvature_tensor(zoo.euclidean(2), np.zeros(2))
    with pytest.raises(CurvatureError):
        T.hsc(np.zeros(2))
    with pytest.raises(CurvatureError):
        T.hbc(np.ones(2), np.zeros(2))


@pytest.mark.parametrize("lam", [0.5, 2.0, 10.0])
def test_scaling_law(lam, rng):
    h = zoo.bump_perturbation(zoo.ball_bergman(1.0, 2), 0.1, np.array([0.1, 0]), 0.3)
    hl = zoo.scale(lam, h)
    for z, X, Y in zip(random_ball_points(rng, 5, 2, 0.5), random_vectors(rng, 5, 2), random_vectors(rng, 5, 2)):
        assert hbc(hl, z, X, Y) == pytest.approx(hbc(h, z, X, Y) / lam, abs=1e-8)


ZOO = {
    "euclidean": lambda: zoo.euclidean(2),
    "ball": lambda: zoo.ball_bergman(1.0, 2),
    "polydisc": lambda: zoo.polydisc_bergman([1.0, 2.0]),
    "quartic": lambda: zoo.quartic_potential(2),
    "bump": lambda: zoo.bump_perturbation(zoo.ball_bergman(1.0, 2), 0.1, np.zeros(2), 0.4),
    "reinhardt": lambda: zoo.reinhardt_bergman(Ball(np.zeros(2), 1.0), 8),
}


@pytest.mark.parametrize("name", sorted(ZOO))
def test_tensor_symmetries(name, rng):
    f = ZOO[name]()
    count = 20 if name == "reinhardt" else 100
    for z in random_ball_points(rng, count, 2, 0.9):
        T = curvature_tensor(f, z)
        d = T.symmetry_defects()
        allowed = max(10 * T.tol, 1e-10 * max(1.0, float(np.max(np.abs(T.R)))))
        assert d["conjugation"] <= allowed
        assert d["kahler"] <= allowed


def test_ball_curvature_is_point_independent(rng):
    f = zoo.ball_bergman(1.0, 2)
    X = np.array([1.0, 0.5j])
    at0 = hsc(f, np.zeros(2), X)
    for z in random_ball_points(rng, 20, 2, 0.95):
        assert hsc(f, z, X) == pytest.approx(at0, abs=1e-6)


def test_ricci_ball_is_einstein(rng):
    f = zoo.ball_bergman(1.0, 3)
    ratios = []
    for z in random_ball_points(rng, 10, 3, 0.9):
        ric, h = ricci(f, z), f.metric(z)
        c = np.real(np.trace(np.linalg.solve(h, ric))) / 3
        assert np.max(np.abs(ric - c * h)) <= 1e-8 * np.max(np.abs(h))
        ratios.append(c)
    assert max(ratios) - min(ratios) <= 1e-6
    assert np.mean(ratios) == pytest.approx(-2.0, abs=1e-8)


def test_ricci_is_scale_invariant(rng):
    h = zoo.bump_perturbation(zoo.ball_bergman(1.0, 2), 0.1, np.zeros(2), 0.4)
    for z in random_ball_points(rng, 5, 2, 0.7):
        assert np.allclose(ricci(zoo.scale(2.0, h), z), ricci(h, z), atol=1e-8)


def test_ill_conditioned_metric_rejected():
    n = 2
    jet = MetricJet(np.zeros(n), np.diag([1.0, 1e-13]).astype(complex), np.zeros((n,) * 3, complex),
                    np.zeros((n,) * 3, complex), np.zeros((n,) * 4, complex))
    with pytest.raises(CurvatureError, match="ill-conditioned"):
        tensor_from_jet(jet)


def test_ball_extrema():
    lo, hi = hbc_extrema(zoo.ball_bergman(1.0, 2), np.array([0.2, 0.3j]))
    assert lo == pytest.approx(-4.0 / 3, abs=1e-3)
    assert hi == pytest.approx(-2.0 / 3, abs=1e-3)


def test_one_dimensional_extrema_coincide():
    z = np.array([0.4j])
    T = curvature_tensor(zoo.ball_bergman(1.0, 1), z)
    e = hbc_extrema_tensor(T)
    assert e.min == e.max == pytest.approx(-2.0)


def test_polydisc_hsc_range():
    lo, hi = hsc_extrema(zoo.polydisc_bergman([1.0, 1.0]), np.array([0.3, -0.1j]))
    assert lo == pytest.approx(-2.0, abs=1e-8)
    assert hi == pytest.approx(-1.0, abs=1e-8)


def _dense_pair_values(T, count, seed):
    rng = np.random.default_rng(seed)
    Rt = T.orthonormal()
    n = T.dim
    X = random_vectors(rng, count, n)
    Y = random_vectors(rng, count, n)
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    return np.real(np.einsum("abcd,na,nb,nc,nd->n", Rt, X, X.conj(), Y, Y.conj()))


@pytest.mark.parametrize("name", ["ball", "bump", "polydisc", "quartic"])
def test_extrema_dominate_dense_sampling(name, rng):
    f = ZOO[name]()
    for k, z in enumerate(random_ball_points(rng, 5, 2, 0.6)):
        T = curvature_tensor(f, z)
        e = hbc_extrema_tensor(T)
        v = _dense_pair_values(T, 100_000, k)
        assert e.max >= v.max() - 1e-9
        assert e.min <= v.min() + 1e-9
        assert e.converged


def test_extrema_three_dimensional_dominates_sampling(rng):
    f = zoo.bump_perturbation(zoo.ball_bergman(1.0, 3), 0.05, np.zeros(3), 0.4)
    T = curvature_tensor(f, np.array([0.1, 0.05j, -0.1]))
    e = hbc_extrema_tensor(T)
    v = _dense_pair_values(T, 100_000, 3)
    assert e.max >= v.max() - 1e-9 and e.min <= v.min() + 1e-9
    assert e.max >= e.sampled_max and e.min <= e.sampled_min


def test_extrema_deterministic():
    T = curvature_tensor(ZOO["bump"](), np.array([0.1, 0.2j]))
    a, b = hbc_extrema_tensor(T), hbc_extrema_tensor(T)
    assert (a.min, a.max) == (b.min, b.max)


def test_bounds_on_collar_for_ball():
    dom = Ball(np.zeros(2), 1.0)
    S = sample_collar(dom, 0.05, 0.3, 24, seed=1)
    rep = hbc_bounds_on_set(zoo.ball_bergman(1.0, 2), S, OptimizerConfig(restarts=4, with_hsc=True))
    assert rep.hbc_inf == pytest.approx(-4.0 / 3, abs=1e-3)
    assert rep.hbc_sup == pytest.approx(-2.0 / 3, abs=1e-3)
    assert all(rep.hbc_inf <= p.hbc_min for p in rep.per_point)
    d = rep.to_dict()
    assert set(d) >= {"region", "seed", "per_point", "aggregate", "optimizer_stats"}
    assert rep.to_csv().splitlines()[0].endswith("units")


def test_bounds_euclidean():
    S = sample_collar(Ball(np.zeros(2), 1.0), 0.05, 0.3, 8)
    rep = hbc_bounds_on_set(zoo.euclidean(2), S)
    assert (rep.hbc_inf, rep.hbc_sup) == (0.0, 0.0)


def test_bump_breaks_pinching_on_support():
    f = zoo.bump_perturbation(zoo.ball_bergman(1.0, 2), 0.3, np.zeros(2), 0.4)
    S = sample_collar(Ball(np.zeros(2), 1.0), 0.6, 1.0, 24)  # points within 0.4 of the centre
    rep = hbc_bounds_on_set(f, S, OptimizerConfig(restarts=4, with_hsc=False))
    assert rep.hbc_sup > -2.0 / 3


def test_refinement_only_widens():
    f = zoo.bump_perturbation(zoo.ball_bergman(1.0, 2), 0.1, np.zeros(2), 0.4)
    dom = Ball(np.zeros(2), 1.0)
    S = sample_collar(dom, 0.5, 0.9, 12)
    cfg = OptimizerConfig(restarts=4, with_hsc=False)
    plain = hbc_bounds_on_set(f, S, cfg)
    refined = hbc_bounds_on_set(f, S, cfg, project=region_projector(dom, 0.5, 0.9), max_evals=60)
    assert refined.hbc_sup >= plain.hbc_sup
    assert refined.hbc_inf <= plain.hbc_inf
    assert any(p.refined for p in refined.per_point)


def test_empty_sample_set_rejected():
    from kahlerpinch.domains import SampleSet
    with pytest.raises(CurvatureError):
        hbc_bounds_on_set(zoo.euclidean(1), SampleSet(np.zeros((0, 1), complex), 0, "compact"))


def test_cauchy_riemann_residuals():
    maps = [identity_map(2), slice_map(2), linear_map([[1, 2j], [0.5, -1]], [0.1, 0]),
            rescaled(slice_map(2, 1), 0.5 - 0.2j), constant_map([0.1, 0.2], 1)]
    for f in maps:
        assert f.cr_residual(np.full(f.source_dim, 0.1 + 0.05j)) <= 1e-10


def test_chern_lu_disc_identity():
    r = chern_lu_residual(identity_map(1), zoo.ball_bergman(1.0, 1))
    assert r["residual"] <= 1e-4
    assert r["rhs"] == pytest.approx(-2.0)
    assert r["lhs"] == pytest.approx(-2.0, abs=1e-4)


def test_chern_lu_ball_slice():
    r = chern_lu_residual(slice_map(2), zoo.ball_bergman(1.0, 2))
    assert r["residual"] <= 1e-4
    assert r["lhs"] == pytest.approx(-4.0 / 3, abs=1e-4)


def test_chern_lu_rescaled_and_perturbed():
    f = rescaled(linear_map([[0.6], [0.3j]], [0.1, -0.05]), 0.7)
    h = zoo.bump_perturbation(zoo.ball_bergman(1.0, 2), 0.1, np.zeros(2), 0.4)
    assert chern_lu_residual(f, h)["residual"] <= 1e-4
    assert chern_lu_residual(rescaled(identity_map(1), 0.5), zoo.ball_bergman(1.0, 1))["residual"] <= 1e-4


def test_chern_lu_needs_nonvanishing_differential():
    with pytest.raises(CurvatureError):
        chern_lu_residual(constant_map([0.1], 1), zoo.ball_bergman(1.0, 1))


def test_schwarz_yau_identity_equality_case(rng):
    h = zoo.ball_bergman(1.0, 1)
    pts = random_ball_points(rng, 20, 1, 0.9)
    rep = schwarz_yau_check(identity_map(1), h, h, C=2.0, A=2.0, samples=pts)
    assert rep["passed"]
    assert rep["ratio"] == pytest.approx(1.0, abs=1e-12)


def test_schwarz_yau_ball_identity_and_constant(rng):
    h = zoo.ball_bergman(1.0, 2)
    pts = random_ball_points(rng, 20, 2, 0.9)
    rep = schwarz_yau_check(identity_map(2), h, h, C=2.0, A=2.0 / 3, samples=pts)
    assert rep["passed"] and rep["ratio"] <= 1
    rep = schwarz_yau_check(constant_map([0.1, 0.2], 2), h, h, C=2.0, A=2.0 / 3, samples=pts)
    assert rep["passed"] and rep["max_pencil"] == 0.0


def test_schwarz_yau_disc_into_larger_ball_is_strict(rng):
    g = zoo.ball_bergman(1.0, 1)
    h = zoo.ball_bergman(2.0, 2)
    rep = schwarz_yau_check(slice_map(2), g, h, C=2.0, A=2.0 / 3, samples=random_ball_points(rng, 20, 1, 0.95))
    assert rep["passed"] and rep["margin"] > 0.1


def test_schwarz_yau_bidisc_target_is_inapplicable():
    # the bidisc metric has HBC sup 0, so no positive A exists
    lo, hi = hbc_extrema(zoo.polydisc_bergman([1.0, 1.0]), np.zeros(2))
    assert hi == pytest.approx(0.0, abs=1e-12)
    rep = schwarz_yau_check(slice_map(2), zoo.ball_bergman(1.0, 1), zoo.polydisc_bergman([1.0, 1.0]),
                            C=2.0, A=-hi, samples=np.zeros((1, 1)))
    assert rep["status"] == "inapplicable"


def test_schwarz_yau_dimension_mismatch():
    h = zoo.ball_bergman(1.0, 2)
    with pytest.raises(CurvatureError):
        schwarz_yau_check(identity_map(1), h, h, 2.0, 1.0, np.zeros((1, 2)))
