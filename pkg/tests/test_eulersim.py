import math

import numpy as np
import pytest

from gyrolimit.diagnostics import energy
from gyrolimit.ensemble import VortexEnsemble
from gyrolimit.errors import DomainError, InputError
from gyrolimit.eulersim import EulerState, Solver, euler_velocity, integrate_euler, rk4_step
from gyrolimit.fieldkernel import BlobParams

from .conftest import disk_points

PAIR = VortexEnsemble(np.array([[1.0, 0.0], [-1.0, 0.0]]), np.ones(2))


def exact_pair(t):
    a = 0.5 * t
    return np.array([[math.cos(a), math.sin(a)], [-math.cos(a), -math.sin(a)]])


def test_velocity_examples():
    assert np.array_equal(euler_velocity(np.zeros((1, 2)), np.ones(1)), np.zeros((1, 2)))
    u = euler_velocity(PAIR.z, PAIR.w)
    assert np.allclose(u, [[0, 0.5], [0, -0.5]])


def test_velocity_momentum_identity(rng):
    z = rng.normal(size=(50, 2))
    w = rng.random(50)
    u = euler_velocity(z, w)
    assert np.abs(w @ u).max() < 1e-13


def test_coincident_vortices_rejected():
    with pytest.raises(DomainError):
        euler_velocity(np.zeros((2, 2)), np.ones(2))


def test_single_vortex_fixed():
    s = EulerState(VortexEnsemble(np.array([[0.3, 0.4]]), np.ones(1)))
    for _ in range(10):
        s = rk4_step(s, 0.1)
    assert np.array_equal(s.vortices.z, [[0.3, 0.4]])


def test_two_vortex_period():
    traj = integrate_euler(PAIR, 1e-3, 4 * math.pi)
    z = traj.snapshot_at(4 * math.pi).z
    assert np.abs(z - PAIR.z).max() <= 1e-6


def test_two_vortex_fourth_order():
    T = 2.0
    errs = [np.abs(integrate_euler(PAIR, dt, T).snapshot_at(T).z - exact_pair(T)).max()
            for dt in (0.2, 0.1, 0.05)]
    slope = np.polyfit(np.log([0.2, 0.1, 0.05]), np.log(errs), 1)[0]
    assert slope == pytest.approx(4.0, abs=0.3)


def test_invariants_two_vortex():
    traj = integrate_euler(PAIR, 1e-3, 1.0, diag_interval=0.5)
    z = traj.snapshot_at(1.0).z
    assert np.abs(z.mean(0)).max() <= 1e-10
    m0 = traj.records[0].modified_moment
    assert abs(traj.records[-1].modified_moment - m0) <= 1e-8
    e = traj.series("energy")
    assert np.abs(e - e[0]).max() <= 1e-10


def _run(z, w, b, dt, n):
    s = EulerState(VortexEnsemble(z, w))
    for _ in range(n):
        s = rk4_step(s, dt, b)
    return s.vortices


def test_blob_patch_mass_and_reversibility(rng):
    # u(Mz) = -M u(z) for the reflection M = diag(1, -1), so the reflected
    # end state integrated forward retraces the trajectory.
    z0 = disk_points(rng, 200)
    w = np.full(200, 1 / 200)
    b = BlobParams(0.05)
    M = np.array([1.0, -1.0])
    fwd = _run(z0, w, b, 0.02, 20)
    assert fwd.total_mass == w.sum()
    back = _run(fwd.z * M, w, b, 0.02, 20).z * M
    tol = np.abs(fwd.z - _run(z0, w, b, 0.01, 40).z).max()
    assert np.abs(back - z0).max() <= 10 * tol + 1e-13


def test_tree_solver_matches_direct(rng):
    z0 = disk_points(rng, 500)
    v = VortexEnsemble(z0, np.full(500, 1 / 500))
    a = integrate_euler(v, 0.01, 0.1, 0.05).snapshot_at(0.1).z
    b = integrate_euler(v, 0.01, 0.1, 0.05, Solver("tree")).snapshot_at(0.1).z
    assert np.abs(a - b).max() < 2e-4


def test_bad_dt():
    with pytest.raises(InputError):
        integrate_euler(PAIR, 0.0, 1.0)


def test_energy_definition_examples():
    half = VortexEnsemble(np.array([[0.0, 0.0], [1.0, 0.0]]), np.full(2, 0.5))
    assert energy(half) == pytest.approx(0.0, abs=1e-15)
    e = VortexEnsemble(np.array([[0.0, 0.0], [math.e, 0.0]]), np.ones(2))
    assert energy(e) == pytest.approx(-1.0)
