"""Unit and property tests for the cosine/angular similarity primitives."""

import numpy as np
import pytest

from dacp.similarity import angular_similarity, cosine_similarity


class TestCosine:
    def test_self_similarity(self):
        assert cosine_similarity([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_45_degrees(self):
        # closed form sqrt(2)/2
        assert cosine_similarity([1.0, 1.0], [1.0, 0.0]) == pytest.approx(
            0.7071067811865476, abs=1e-12)

    def test_zero_vector_convention(self):
        assert cosine_similarity([0.0, 0.0], [1.0, 2.0]) == 0.0

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            cosine_similarity([1.0, 2.0], [1.0, 2.0, 3.0])


class TestAngular:
    def test_parallel(self):
        a = np.array([0.3, 1.7, 2.2])
        assert angular_similarity(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_antiparallel(self):
        a = np.array([0.3, 1.7, 2.2])
        assert angular_similarity(a, -a) == pytest.approx(0.0, abs=1e-12)

    def test_45_degrees(self):
        # angle pi/4, so 1 - 1/4
        assert angular_similarity([1.0, 0.0], [1.0, 1.0]) == pytest.approx(0.75, abs=1e-12)

    def test_orthogonal(self):
        assert angular_similarity([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.5, abs=1e-12)

    def test_zero_vector_convention(self):
        assert angular_similarity([0.0, 0.0, 0.0], [1.0, 2.0, 3.0]) == 0.5

    def test_symmetry_and_scale_invariance(self, rng):
        for _ in range(1000):
            dim = int(rng.integers(2, 8))
            a = rng.normal(size=dim)
            b = rng.normal(size=dim)
            s = angular_similarity(a, b)
            assert 0.0 <= s <= 1.0
            assert angular_similarity(b, a) == pytest.approx(s, abs=1e-12)
            t = float(rng.uniform(0.1, 10.0))
            assert angular_similarity(t * a, b) == pytest.approx(s, abs=1e-9)

    def test_one_iff_positively_parallel(self, rng):
        for _ in range(200):
            a = rng.normal(size=5)
            t = float(rng.uniform(0.5, 2.0))
            assert angular_similarity(a, t * a) == pytest.approx(1.0, abs=1e-12)
            b = rng.normal(size=5)
            if angular_similarity(a, b) > 1.0 - 1e-9:
                # randomly drawn pairs are never this aligned
                raise AssertionError("unexpected parallel pair")
