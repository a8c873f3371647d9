import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isorecover.errors import DegenerateSimplex, DimensionError, NotDistancePreserving
from isorecover.extension import (
    LabeledSimplex,
    check_distance_preserving,
    extend_finite_isometry,
    verify_gram_equality,
)
from isorecover.isometry import EuclideanIsometry, random_isometry

from conftest import random_simplex

STD2 = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
ROT90 = np.array([[0.0, -1.0], [1.0, 0.0]])


def test_labeled_simplex_shapes():
    with pytest.raises(DimensionError):
        LabeledSimplex(STD2[:2], STD2[:2])
    with pytest.raises(DimensionError):
        LabeledSimplex(STD2, STD2[:2])


def test_check_distance_preserving_examples():
    ok, _ = check_distance_preserving(LabeledSimplex(STD2, STD2))
    assert ok
    ok, info = check_distance_preserving(LabeledSimplex(STD2, [[0, 0], [2, 0], [0, 1]]))
    assert not ok
    assert info["worst_pair"] == (0, 1)
    assert info["defect"] == pytest.approx(1.0)
    rotated = STD2 @ ROT90.T
    # direct computation: every pairwise distance survives the rotation
    for i in range(3):
        for j in range(3):
            assert np.linalg.norm(rotated[i] - rotated[j]) == pytest.approx(np.linalg.norm(STD2[i] - STD2[j]))
    assert check_distance_preserving(LabeledSimplex(STD2, rotated))[0]


def test_extend_examples():
    H = extend_finite_isometry(LabeledSimplex(STD2, STD2))
    assert np.allclose(H.Q, np.eye(2), atol=1e-15) and np.allclose(H.b, 0, atol=1e-15)

    # V = I, so Q = W: columns (0,1) and (-1,0)
    H = extend_finite_isometry(LabeledSimplex(STD2, [[0, 0], [0, 1], [-1, 0]]))
    assert np.allclose(H.Q, ROT90, atol=1e-15) and np.allclose(H.b, 0, atol=1e-15)

    H = extend_finite_isometry(LabeledSimplex(STD2, STD2 + [3, -2]))
    assert np.allclose(H.Q, np.eye(2), atol=1e-15) and np.allclose(H.b, [3, -2], atol=1e-15)


def test_extend_errors():
    with pytest.raises(DegenerateSimplex):
        extend_finite_isometry(LabeledSimplex([[0, 0], [1, 1], [2, 2]], [[0, 0], [1, 1], [2, 2]]))
    with pytest.raises(NotDistancePreserving):
        extend_finite_isometry(LabeledSimplex(STD2, 2 * STD2))


def test_extend_reports_repair():
    H, info = extend_finite_isometry(LabeledSimplex(STD2, STD2 @ ROT90.T), full_output=True)
    assert 0.0 <= info["repair"] <= 1e-15
    assert np.allclose(info["raw_Q"], ROT90, atol=1e-15)


def test_gram_examples():
    assert verify_gram_equality(LabeledSimplex(STD2, STD2), 1e-12)
    rot = STD2 @ ROT90.T
    V = (STD2[1:] - STD2[0]).T
    W = (rot[1:] - rot[0]).T
    assert np.allclose(V.T @ V, W.T @ W)
    assert verify_gram_equality(LabeledSimplex(STD2, rot), 1e-12)
    assert not verify_gram_equality(LabeledSimplex(STD2, 2 * STD2), 1e-9)


def test_one_dimensional():
    H = extend_finite_isometry(LabeledSimplex([[1.0], [3.0]], [[5.0], [3.0]]))
    assert H.Q[0, 0] == pytest.approx(-1.0) and H.b[0] == pytest.approx(6.0)


@pytest.mark.parametrize("d", range(1, 9))
def test_round_trip_and_interpolation(rng, d):
    for _ in range(100):
        H = random_isometry(d, rng)
        S = random_simplex(rng, d)
        images = H.apply(S)
        G = extend_finite_isometry(LabeledSimplex(S, images))
        assert G.isclose(H)
        assert G.is_valid(1e-9)[0]
        err = np.linalg.norm(G.apply(S) - images, axis=1)
        assert np.all(err <= 1e-9 * (1.0 + np.linalg.norm(images, axis=1)))


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_equivariance_under_translation(rng, d):
    H = random_isometry(d, rng)
    S = random_simplex(rng, d)
    s, t = rng.standard_normal(d), rng.standard_normal(d)
    G0 = extend_finite_isometry(LabeledSimplex(S, H.apply(S)))
    G1 = extend_finite_isometry(LabeledSimplex(S + s, H.apply(S) + t))
    assert np.allclose(G1.Q, G0.Q, rtol=0, atol=1e-9)
    assert np.allclose(G1.b, G0.b + t - G0.Q @ s, rtol=0, atol=1e-9)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1), st.floats(-12, -6))
def test_extend_iff_checks_pass(d, seed, log_delta):
    """Perturbations straddling pair_tol: extension succeeds exactly when both checks pass."""
    r = np.random.default_rng(seed)
    H = random_isometry(d, r)
    S = random_simplex(r, d)
    images = H.apply(S)
    images[r.integers(d + 1)] += 10.0**log_delta * r.standard_normal(d)
    ls = LabeledSimplex(S, images)
    tol = 1e-9
    expected = check_distance_preserving(ls, tol)[0] and verify_gram_equality(ls, tol)
    try:
        extend_finite_isometry(ls, pair_tol=tol)
        succeeded = True
    except NotDistancePreserving:
        succeeded = False
    assert succeeded == expected
