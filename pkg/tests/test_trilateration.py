import math

import numpy as np
import pytest

from isorecover.errors import DegenerateAnchors, Infeasible
from isorecover.isometry import random_isometry
from isorecover.trilateration import anchor_distances, equidistance_collapse, locate

from conftest import random_simplex

STD2 = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def test_locate_examples():
    # distances forward-computed from (1, 1)
    d = [math.hypot(1, 1), math.hypot(0, 1), math.hypot(1, 0)]
    assert np.allclose(locate(STD2, d), [1.0, 1.0], atol=1e-12)
    assert np.allclose(locate(STD2, [0.0, 1.0, 1.0]), [0.0, 0.0], atol=1e-12)
    with pytest.raises(Infeasible):
        locate(STD2, [10.0, 1.0, 1.0])


def test_locate_degenerate_and_bad_input():
    with pytest.raises(DegenerateAnchors):
        locate([[0, 0], [1, 1], [2, 2]], [1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        locate(STD2, [1.0, -1.0, 1.0])
    with pytest.raises(ValueError):
        locate(STD2, [1.0, 1.0])


@pytest.mark.parametrize("d", range(1, 9))
def test_round_trip(rng, d):
    for _ in range(200):
        A = random_simplex(rng, d)
        z = 3.0 * rng.standard_normal(d)
        got = locate(A, anchor_distances(A, z))
        assert np.linalg.norm(got - z) <= 1e-9 * (1.0 + np.linalg.norm(z))


@pytest.mark.parametrize("d", [1, 2, 3, 6])
def test_isometry_compatibility(rng, d):
    for _ in range(100):
        A = random_simplex(rng, d)
        H = random_isometry(d, rng)
        z = rng.standard_normal(d)
        got = locate(H.apply(A), anchor_distances(A, z))
        assert np.linalg.norm(got - H.apply(z)) <= 1e-9 * (1.0 + np.linalg.norm(z))


def test_equidistance_examples():
    assert equidistance_collapse([1, 1], [1, 1], STD2, 0.0)
    # distances to anchor (0,1) are 0 and 2
    assert not equidistance_collapse([0, 1], [0, -1], STD2, 1e-9)
    # only two anchors: mirror images across the x-axis cannot be told apart
    assert equidistance_collapse([0, 1], [0, -1], STD2[:2], 1e-9)


def test_equidistance_degenerate():
    with pytest.raises(DegenerateAnchors):
        equidistance_collapse([0, 1], [1, 0], [[0, 0], [1, 1], [2, 2]], 1e-9)


@pytest.mark.parametrize("d", [1, 2, 3, 5, 8])
def test_uniqueness(rng, d):
    for _ in range(2000):
        A = random_simplex(rng, d)
        p = rng.standard_normal(d)
        q = rng.standard_normal(d)
        if np.linalg.norm(p - q) <= 1e-6:
            continue
        assert not equidistance_collapse(p, q, A, 1e-9)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_mirror_points_with_d_anchors(rng, d):
    """With only d anchors the reflection through their hyperplane is invisible."""
    A = random_simplex(rng, d)[:d]
    U, _, _ = np.linalg.svd((A[1:] - A[0]).T)
    normal = U[:, -1]
    z = rng.standard_normal(d)
    mirror = z - 2 * np.dot(z - A[0], normal) * normal
    assert np.linalg.norm(mirror - z) > 1e-6
    assert equidistance_collapse(z, mirror, A, 1e-9)
    assert not equidistance_collapse(z, mirror, np.vstack([A, A[0] + normal]), 1e-9)
