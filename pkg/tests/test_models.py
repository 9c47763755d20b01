import numpy as np
import pytest

from qptori import jets, models
from qptori.models import PendulumParams, pendulum_field


class TestParams:
    def test_defaults(self):
        p = PendulumParams()
        assert p.alpha == 0.8
        assert p.eps == 0.01
        assert p.d == 4
        assert np.allclose(p.omega, [1.0, np.sqrt(2), np.sqrt(3), np.sqrt(5), np.sqrt(7)])

    def test_d_range(self):
        with pytest.raises(ValueError):
            PendulumParams(d=0)
        with pytest.raises(ValueError):
            PendulumParams(d=5)

    def test_omega_length(self):
        with pytest.raises(ValueError):
            PendulumParams(d=2, omega=(1.0, 2.0))
        with pytest.raises(ValueError):
            PendulumParams(d=1, omega=(0.0, 1.0))


class TestForcing:
    def test_value_at_zero(self):
        for d in (1, 2, 4):
            field = pendulum_field(d=d)
            zeta = field.forcing(np.zeros((1, d + 1)))
            assert zeta[0] == pytest.approx(1.0 / (2 * d + 3), abs=1e-15)

    def test_denominator_bounded(self):
        field = pendulum_field(d=4)
        rng = np.random.default_rng(0)
        zeta = field.forcing(rng.random((1000, 5)))
        assert (zeta > 0).all()
        assert (zeta <= 1.0).all()

    def test_mirror_symmetry(self):
        field = pendulum_field(d=3)
        rng = np.random.default_rng(1)
        theta = rng.random((50, 4))
        assert np.allclose(field.forcing(theta), field.forcing(-theta), atol=1e-15)


class TestField:
    def test_unforced_equilibrium(self):
        field = pendulum_field(d=1, eps=0.0)
        out = field.rhs_point(np.array([[np.pi, 0.0]]), np.zeros((1, 2)))
        assert np.abs(out).max() < 1e-15

    def test_forcing_enters_second_component(self):
        field = pendulum_field(d=1)
        theta = np.array([[0.0, 0.25]])
        out = field.rhs_point(np.array([[np.pi, 0.0]]), theta)
        assert out[0, 0] == 0.0
        assert out[0, 1] == pytest.approx(0.01 * field.forcing(theta)[0], abs=1e-16)

    def test_jet_matches_finite_differences(self):
        field = pendulum_field(d=2)
        rng = np.random.default_rng(2)
        x = rng.standard_normal((5, 2))
        theta = rng.random((5, 3))
        seeds, spec = jets.seed_gradient(x)
        out = field.rhs(seeds, theta, spec)
        _, jac = jets.split_gradient(out)
        h = 1e-6
        for col in range(2):
            e = np.zeros(2)
            e[col] = h
            fd = (field.rhs_point(x + e, theta) - field.rhs_point(x - e, theta)) / (2 * h)
            assert np.abs(fd - jac[:, :, col]).max() < 1e-8


class TestRegistry:
    def test_get_pendulum(self):
        field = models.get("pendulum", {"d": 2, "eps": 0.005})
        assert field.d == 2
        assert field.params.eps == 0.005

    def test_unknown_model(self):
        with pytest.raises(KeyError):
            models.get("nonexistent", {})

    def test_register_custom(self):
        calls = []

        def factory(params):
            calls.append(params)
            return pendulum_field(d=1)

        models.register("custom-test", factory)
        try:
            field = models.get("custom-test", {"a": 1})
            assert field.d == 1
            assert calls == [{"a": 1}]
        finally:
            del models._REGISTRY["custom-test"]
