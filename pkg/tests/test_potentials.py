import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from swarmshape import (
    Configuration,
    Kernel,
    PotentialParams,
    TargetSet,
    barrier_level,
    energy_parts,
    repulsion_energy,
    repulsion_grad,
    shape_energy,
    shape_energy_grad,
    target_energy,
    target_energy_grad,
    total_energy,
)
from swarmshape.dynamics import RngStream, brute_force_pairs
from swarmshape.potentials import (
    InfeasibleGradientError,
    cot_falloff,
    cot_falloff_deriv,
    exp_bump,
    exp_bump_deriv,
)
from swarmshape.shape import Shape, circle_points
from conftest import feasible_config


def fd_grad(fn, positions, h=1e-5):
    grad = np.zeros_like(positions)
    for i in range(positions.shape[0]):
        for c in range(2):
            plus = positions.copy(); plus[i, c] += h
            minus = positions.copy(); minus[i, c] -= h
            grad[i, c] = (fn(plus) - fn(minus)) / (2 * h)
    return grad


class TestParams:
    def test_radius_order_enforced(self):
        with pytest.raises(ValueError):
            PotentialParams(hard_radius=1.0, sensing_radius=0.5)

    def test_default_barrier_distance(self):
        p = PotentialParams(hard_radius=0.1, sensing_radius=1.0)
        assert p.barrier_distance == pytest.approx(0.19)

    def test_interaction_radius_per_kernel(self):
        exp = PotentialParams(0.1, 1.0, kernel=Kernel.EXP_BUMP)
        cot = PotentialParams(0.1, 1.0, kernel=Kernel.COTANGENT)
        assert exp.interaction_radius == 2.0 and exp.singular_distance == 0.2
        assert cot.interaction_radius == 1.0 and cot.singular_distance == 0.0


class TestKernels:
    def test_exp_bump_boundary_values(self):
        assert exp_bump(2.0, 1.0, 2.0) == 0.0
        assert exp_bump(4.0, 1.0, 2.0) == 0.0
        assert exp_bump(1.0, 1.0, 2.0) == math.inf
        assert exp_bump(0.5, 1.0, 2.0) == math.inf

    def test_exp_bump_closed_form(self):
        # independent evaluation of exp(1/(x^2-r^2) - 1/(R^2-x^2))
        expected = math.exp(1 / (1.5 ** 2 - 1.0) - 1 / (4.0 - 1.5 ** 2))
        assert exp_bump(1.5, 1.0, 2.0) == pytest.approx(expected, rel=1e-15)
        assert expected == pytest.approx(1.2568, abs=1e-4)

    def test_exp_bump_decreasing(self):
        xs = np.linspace(1.01, 1.99, 200)
        vals = exp_bump(xs, 1.0, 2.0)
        assert np.all(np.diff(vals) < 0)

    def test_exp_bump_deriv_matches_fd(self):
        for x in (1.2, 1.5, 1.8):
            h = 1e-7
            fd = (exp_bump(x + h, 1.0, 2.0) - exp_bump(x - h, 1.0, 2.0)) / (2 * h)
            assert exp_bump_deriv(x, 1.0, 2.0) == pytest.approx(fd, rel=1e-6)

    def test_cot_boundary_values(self):
        assert cot_falloff(1.0, 1.0) == 0.0   # at the squared sensing radius
        assert cot_falloff(2.5, 1.0) == 0.0
        assert cot_falloff(0.0, 1.0) == math.inf

    def test_cot_closed_form(self):
        assert cot_falloff(0.5, 1.0) == pytest.approx(1.0, rel=1e-12)
        assert cot_falloff(1/3, 1.0) == pytest.approx(math.sqrt(3), rel=1e-12)

    def test_cot_deriv_matches_fd(self):
        for s in (0.2, 0.5, 0.9):
            h = 1e-7
            fd = (cot_falloff(s + h, 1.0) - cot_falloff(s - h, 1.0)) / (2 * h)
            assert cot_falloff_deriv(s, 1.0) == pytest.approx(fd, rel=1e-6)


class TestShapeEnergy:
    def test_all_on_shape_zero(self, loop_shape):
        cfg = Configuration(loop_shape.points[::10][:10])
        assert shape_energy(cfg, loop_shape) == 0.0

    def test_single_point_shape(self):
        sh = Shape(np.array([[0.0, 0.0]]))
        cfg = Configuration(np.array([[3.0, 4.0], [0.0, 0.0]]))
        assert shape_energy(cfg, sh) == pytest.approx(12.5)

    def test_matches_brute_force_double_loop(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-4, 4, size=(100, 2))
        sh = Shape(pts)
        pos = rng.uniform(-5, 5, size=(17, 2))
        brute = np.mean([min(np.sum((pts - x) ** 2, axis=1)) for x in pos])
        assert shape_energy(Configuration(pos), sh) == pytest.approx(brute, rel=1e-14)

    def test_grad_on_shape_robot_zero(self, loop_shape):
        cfg = Configuration(np.vstack([loop_shape.points[0], [0.0, 0.0]]))
        grad = shape_energy_grad(cfg, loop_shape)
        assert np.array_equal(grad[0], [0.0, 0.0])

    def test_grad_single_robot_single_point(self):
        sh = Shape(np.array([[0.0, 0.0]]))
        grad = shape_energy_grad(Configuration(np.array([[3.0, 4.0]])), sh)
        assert np.allclose(grad, [[6.0, 8.0]])

    def test_grad_matches_fd(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(-4, 4, size=(60, 2))
        sh = Shape(pts)
        pos = rng.uniform(-3, 3, size=(6, 2))
        analytic = shape_energy_grad(Configuration(pos), sh)
        fd = fd_grad(lambda p: shape_energy(Configuration(p), sh), pos)
        assert np.linalg.norm(fd - analytic) <= 1e-5 * max(1.0, np.linalg.norm(analytic))


class TestTargetEnergy:
    def test_zero_at_targets(self):
        pos = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert target_energy(Configuration(pos), TargetSet(pos.copy())) == 0.0

    def test_offsets_value(self):
        pos = np.array([[1.0, 0.0], [0.0, 2.0]])
        targets = TargetSet(np.zeros((2, 2)))
        assert target_energy(Configuration(pos), targets) == pytest.approx(2.5)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            target_energy(Configuration(np.zeros((2, 2))), TargetSet(np.zeros((3, 2))))

    def test_grad_matches_fd(self):
        rng = np.random.default_rng(2)
        pos = rng.uniform(-3, 3, size=(5, 2))
        targets = TargetSet(rng.uniform(-3, 3, size=(5, 2)))
        analytic = target_energy_grad(Configuration(pos), targets)
        fd = fd_grad(lambda p: target_energy(Configuration(p), targets), pos, h=1e-6)
        assert np.linalg.norm(fd - analytic) <= 1e-6 * max(1.0, np.linalg.norm(analytic))


class TestRepulsion:
    def test_beyond_cutoff_zero(self, cot_params):
        cfg = Configuration(np.array([[0.0, 0.0], [5.0, 0.0]]))
        pairs = brute_force_pairs(cfg, cot_params.interaction_radius)
        assert repulsion_energy(cfg, cot_params, pairs) == 0.0

    def test_single_robot_zero(self, cot_params):
        cfg = Configuration(np.array([[0.0, 0.0]]))
        pairs = brute_force_pairs(cfg, cot_params.interaction_radius)
        assert repulsion_energy(cfg, cot_params, pairs) == 0.0

    def test_cot_two_robot_value(self, cot_params):
        # squared distance R^2/2: falloff value 1, two ordered pairs
        d = math.sqrt(0.5)
        cfg = Configuration(np.array([[0.0, 0.0], [d, 0.0]]))
        pairs = brute_force_pairs(cfg, cot_params.interaction_radius)
        assert repulsion_energy(cfg, cot_params, pairs) == pytest.approx(0.02, rel=1e-9)

    def test_singular_pair_gives_inf_energy(self, cot_params):
        cfg = Configuration(np.array([[0.0, 0.0], [0.0, 0.0]]))
        pairs = brute_force_pairs(cfg, cot_params.interaction_radius)
        assert repulsion_energy(cfg, cot_params, pairs) == math.inf

    def test_exp_bump_singular_inside_two_hard_radii(self, exp_params):
        cfg = Configuration(np.array([[0.0, 0.0], [0.15, 0.0]]))  # d < 2r = 0.2
        pairs = brute_force_pairs(cfg, exp_params.interaction_radius)
        assert repulsion_energy(cfg, exp_params, pairs) == math.inf
        with pytest.raises(InfeasibleGradientError):
            repulsion_grad(cfg, exp_params, pairs)

    def test_grad_antisymmetry_sums_to_zero(self, exp_params):
        rng = RngStream(7)
        cfg = feasible_config(rng, 12, 0.8, scale=1.2)
        pairs = brute_force_pairs(cfg, exp_params.interaction_radius)
        grad = repulsion_grad(cfg, exp_params, pairs)
        scale = max(1.0, np.abs(grad).max())
        assert np.all(np.abs(grad.sum(axis=0)) <= 1e-12 * scale)

    def test_grad_beyond_cutoff_zero(self, cot_params):
        cfg = Configuration(np.array([[0.0, 0.0], [3.0, 0.0], [-3.0, 0.0]]))
        pairs = brute_force_pairs(cfg, cot_params.interaction_radius)
        assert np.array_equal(repulsion_grad(cfg, cot_params, pairs), np.zeros((3, 2)))

    @pytest.mark.parametrize("kernel", [Kernel.EXP_BUMP, Kernel.COTANGENT])
    def test_grad_matches_fd(self, kernel):
        params = PotentialParams(0.1, 1.0, 0.01, kernel)
        rng = RngStream(40 + (1 if kernel is Kernel.EXP_BUMP else 0))
        checked = 0
        while checked < 20:
            cfg = feasible_config(rng, 8, params.singular_distance + 0.25, scale=1.2)
            pairs = brute_force_pairs(cfg, params.interaction_radius)
            if len(pairs) == 0:
                continue
            # keep probes away from the cotangent kink at the sensing radius
            if kernel is Kernel.COTANGENT and np.any(
                    np.abs(pairs.dist - params.sensing_radius) < 1e-3):
                continue
            analytic = repulsion_grad(cfg, params, pairs)
            fd = fd_grad(lambda p: repulsion_energy(
                Configuration(p), params), cfg.positions)
            assert np.linalg.norm(fd - analytic) <= 1e-5 * max(1e-6, np.linalg.norm(analytic))
            checked += 1

    def test_pair_list_radius_must_cover_kernel(self, exp_params):
        cfg = Configuration(np.array([[0.0, 0.0], [1.5, 0.0]]))
        pairs = brute_force_pairs(cfg, 1.0)  # too small for the bump support 2R=2
        with pytest.raises(ValueError, match="support"):
            repulsion_energy(cfg, exp_params, pairs)

    def test_cutoff_locality(self, cot_params):
        # moving a robot whose pairs all stay beyond the cutoff changes nothing
        base = np.array([[0.0, 0.0], [0.5, 0.0], [4.0, 4.0]])
        moved = base.copy()
        moved[2] = [-4.0, 4.5]
        e0 = repulsion_energy(Configuration(base), cot_params,
                              brute_force_pairs(Configuration(base), 1.0))
        e1 = repulsion_energy(Configuration(moved), cot_params,
                              brute_force_pairs(Configuration(moved), 1.0))
        assert e0 == e1

    @given(st.integers(0, 2 ** 31))
    @settings(max_examples=20, deadline=None)
    def test_permutation_equivariance(self, seed):
        params = PotentialParams(0.1, 1.0, 0.01, Kernel.COTANGENT)
        rng = RngStream(seed)
        cfg = feasible_config(rng, 9, 0.15, scale=0.8)
        perm = np.argsort(rng.normal_pairs(9)[:, 0])
        permuted = Configuration(cfg.positions[perm])
        p0 = brute_force_pairs(cfg, params.interaction_radius)
        p1 = brute_force_pairs(permuted, params.interaction_radius)
        assert repulsion_energy(cfg, params, p0) == pytest.approx(
            repulsion_energy(permuted, params, p1), rel=1e-12, abs=1e-15)
        g0 = repulsion_grad(cfg, params, p0)
        g1 = repulsion_grad(permuted, params, p1)
        assert np.allclose(g0[perm], g1, rtol=1e-12, atol=1e-14)


class TestTotalEnergy:
    def test_decomposition(self, loop_shape, cot_params):
        rng = RngStream(9)
        cfg = feasible_config(rng, 10, 0.3, scale=3.0)
        pairs = brute_force_pairs(cfg, cot_params.interaction_radius)
        psi, f, g = energy_parts(cfg, loop_shape, cot_params, pairs)
        assert psi == f + g
        assert psi == total_energy(cfg, loop_shape, cot_params, pairs)

    def test_zero_when_on_shape_and_spread(self, loop_shape, cot_params):
        cfg = Configuration(loop_shape.points[::20])  # spacing ~ 3.2 > cutoff
        pairs = brute_force_pairs(cfg, cot_params.interaction_radius)
        assert total_energy(cfg, loop_shape, cot_params, pairs) == 0.0

    def test_nonnegative(self, loop_shape, cot_params):
        rng = RngStream(10)
        for _ in range(10):
            cfg = feasible_config(rng, 8, 0.05, scale=4.0)
            pairs = brute_force_pairs(cfg, cot_params.interaction_radius)
            psi, f, g = energy_parts(cfg, loop_shape, cot_params, pairs)
            assert f >= 0 and g >= 0 and psi >= 0


class TestBarrierLevel:
    def test_exp_bump_value(self):
        p = PotentialParams(1.0, 2.0, amplitude=1.0, kernel=Kernel.EXP_BUMP,
                            barrier_distance=1.5)
        assert barrier_level(p) == pytest.approx(exp_bump(1.5, 1.0, 2.0), rel=1e-15)

    def test_amplitude_scaling(self):
        p1 = PotentialParams(1.0, 2.0, amplitude=1.0, kernel=Kernel.EXP_BUMP,
                             barrier_distance=1.5)
        p2 = PotentialParams(1.0, 2.0, amplitude=2.0, kernel=Kernel.EXP_BUMP,
                             barrier_distance=1.5)
        assert barrier_level(p2) == pytest.approx(2 * barrier_level(p1), rel=1e-15)

    def test_cot_value(self):
        m = math.sqrt(0.5)  # m^2 = R^2/2 with R = 1: falloff is exactly 1
        p = PotentialParams(0.1, 1.0, amplitude=0.01, kernel=Kernel.COTANGENT,
                            barrier_distance=m)
        assert barrier_level(p) == pytest.approx(0.01, rel=1e-12)

    @pytest.mark.parametrize("kernel", [Kernel.EXP_BUMP, Kernel.COTANGENT])
    def test_barrier_property_two_robots(self, kernel):
        # a pair at or inside the barrier distance costs at least the budget
        params = PotentialParams(0.1, 1.0, 0.01, kernel)
        em = barrier_level(params)
        m = params.barrier_distance
        for frac in (0.5, 0.8, 1.0):
            d = (2 * m if kernel is Kernel.EXP_BUMP else m) * frac
            if d <= params.singular_distance:
                continue
            cfg = Configuration(np.array([[0.0, 0.0], [d, 0.0]]))
            pairs = brute_force_pairs(cfg, params.interaction_radius)
            assert repulsion_energy(cfg, params, pairs) >= em
