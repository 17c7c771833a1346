import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gyrolimit._vec import perp
from gyrolimit.diagnostics import energy, modified_moment
from gyrolimit.ensemble import ParticleEnsemble
from gyrolimit.errors import InputError, NonFiniteState, StepRefused
from gyrolimit.vpsim import (
    VPIntegrator,
    VPState,
    VPStepParams,
    default_dt,
    gyroperiod,
    integrate_vp,
    kick_substep,
    rotation_drift_substep,
    strang_step,
)

from .conftest import disk_points


def one(x, v, eps):
    return VPState(ParticleEnsemble(np.array([x], float), np.array([v], float), np.ones(1), eps))


def test_quarter_rotation():
    s = rotation_drift_substep(one((0, 0), (1, 0), 1.0), math.pi / 2)
    assert np.allclose(s.ensemble.v, [[0, 1]], atol=1e-15)


def test_full_gyroperiod_is_identity():
    s0 = one((0.3, -0.2), (1, 0), 0.5)
    s = rotation_drift_substep(s0, 2 * math.pi * 0.25)
    assert np.allclose(s.ensemble.v, s0.ensemble.v, atol=1e-14)
    assert np.allclose(s.ensemble.x, s0.ensemble.x, atol=1e-14)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5),
       st.floats(0.01, 1.0), st.floats(0, 10))
def test_rotation_preserves_guiding_center_and_speed(x1, x2, v1, v2, eps, dt):
    s0 = one((x1, x2), (v1, v2), eps)
    s = rotation_drift_substep(s0, dt)
    z0 = s0.ensemble.x + eps * perp(s0.ensemble.v)
    z1 = s.ensemble.x + eps * perp(s.ensemble.v)
    scale = 1 + np.abs(z0).max() + eps * np.abs(s0.ensemble.v).max()
    assert np.abs(z1 - z0).max() <= 1e-14 * scale
    sp0, sp1 = np.linalg.norm(s0.ensemble.v), np.linalg.norm(s.ensemble.v)
    assert abs(sp1 - sp0) <= 1e-12 * max(sp0, 1e-300) + 1e-300


def test_kick_examples():
    s0 = one((0, 0), (0.5, 0.5), 0.1)
    s = kick_substep(s0, 0.01, np.zeros((1, 2)))
    assert np.array_equal(s.ensemble.v, s0.ensemble.v)
    s = kick_substep(s0, 0.01, np.array([[1.0, 0.0]]))
    assert np.allclose(s.ensemble.v - s0.ensemble.v, [[0.1, 0]])
    assert s.ensemble.total_mass == s0.ensemble.total_mass
    with pytest.raises(InputError):
        kick_substep(s0, 0.01, np.zeros((2, 2)))


def test_step_refused_suggests_dt():
    s = one((0, 0), (1, 0), 0.1)
    p = VPStepParams(dt=gyroperiod(0.1) / 4)
    with pytest.raises(StepRefused) as exc:
        strang_step(s, p)
    assert exc.value.suggested_dt == pytest.approx(default_dt(0.1))


def test_field_free_orbit_is_circle():
    eps, v0 = 0.2, np.array([1.0, 0.5])
    p = VPStepParams(dt=default_dt(eps), mode="external", E0=(0.0, 0.0))
    s = one((1.0, 1.0), v0, eps)
    z0 = s.ensemble.x[0] + eps * perp(v0)
    integ = VPIntegrator(p)
    for _ in range(300):
        s = integ.step(s)
        z = s.ensemble.x[0] + eps * perp(s.ensemble.v[0])
        assert np.abs(z - z0).max() <= 1e-12
        assert np.linalg.norm(s.ensemble.x[0] - z0) == pytest.approx(eps * np.linalg.norm(v0), rel=1e-12)


def test_constant_field_guiding_center_drift():
    eps = 0.1
    p = VPStepParams(dt=default_dt(eps), mode="external", E0=(1.0, 0.0))
    ens = ParticleEnsemble(np.zeros((1, 2)), np.array([[0.3, -0.2]]), np.ones(1), eps)
    traj = integrate_vp(ens, p, 1.0)
    a, b = traj.snapshot_at(0.0), traj.snapshot_at(1.0)
    dz = (b.x + eps * perp(b.v)) - (a.x + eps * perp(a.v))
    assert np.allclose(dz, [[0.0, 1.0]], atol=1e-12)


def _pair(eps=0.1):
    x = np.array([[-0.5, 0.0], [0.5, 0.1]])
    v = np.array([[0.2, 0.4], [-0.3, 0.1]])
    return ParticleEnsemble(x, v, np.array([1.0, 0.5]), eps)


def test_two_particle_modified_moment_and_mass():
    ens = _pair()
    p = VPStepParams(dt=default_dt(0.1), delta=0.0)
    integ = VPIntegrator(p)
    s = VPState(ens.copy())
    m0 = modified_moment(ens)
    for _ in range(1000):
        s = integ.step(s)
    assert abs(modified_moment(s.ensemble) - m0) <= 1e-8 * abs(m0)
    assert s.ensemble.total_mass == ens.total_mass


def test_second_order_self_convergence():
    ens = _pair(0.2)
    T = 0.5

    def run(spg):
        return integrate_vp(ens, VPStepParams(dt=default_dt(0.2, spg), delta=0.05), T).snapshot_at(T)

    a, b, c = run(32), run(64), run(128)
    e1 = np.abs(a.x - c.x).max()
    e2 = np.abs(b.x - c.x).max()
    ratio = e1 / e2
    # second order: error(dt) / error(dt/2) -> 4 (the dt/4 reference adds a 4/3 bias at most)
    assert 3.0 < ratio < 6.0


def test_energy_drift_small_on_smooth_data(rng):
    eps = 0.1
    x = disk_points(rng, 300)
    v = 0.3 * rng.normal(size=(300, 2))
    ens = ParticleEnsemble(x, v, np.full(300, 1 / 300), eps)
    p = VPStepParams(dt=default_dt(eps), delta=0.1)
    traj = integrate_vp(ens, p, 0.5, diag_interval=0.25)
    E = traj.series("energy")
    assert np.abs(E - E[0]).max() / abs(E[0]) <= 1e-3 * 0.5


def test_integrate_snapshots_and_records():
    ens = _pair(0.2)
    p = VPStepParams(dt=default_dt(0.2), delta=0.05)
    traj = integrate_vp(ens, p, 0.3, checkpoints=(0.1, 0.3), diag_interval=0.1)
    assert sorted(traj.snapshots) == pytest.approx([0.0, 0.1, 0.3])
    assert [r.t for r in traj.records] == pytest.approx([0.0, 0.1, 0.2, 0.3])
    assert traj.n_steps > 0


def test_integrate_reproducible():
    ens = _pair(0.2)
    p = VPStepParams(dt=default_dt(0.2), delta=0.05)
    a = integrate_vp(ens, p, 0.2).snapshot_at(0.2)
    b = integrate_vp(ens, p, 0.2).snapshot_at(0.2)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.v, b.v)


def test_tree_solver_runs_and_is_close():
    rng = np.random.default_rng(3)
    x = disk_points(rng, 400)
    ens = ParticleEnsemble(x, 0.1 * rng.normal(size=(400, 2)), np.full(400, 1 / 400), 0.2)
    pd = VPStepParams(dt=default_dt(0.2), delta=0.05)
    pt = VPStepParams(dt=default_dt(0.2), delta=0.05, solver="tree")
    a = integrate_vp(ens, pd, 0.1).snapshot_at(0.1)
    b = integrate_vp(ens, pt, 0.1).snapshot_at(0.1)
    assert np.abs(a.x - b.x).max() < 1e-4


def test_nonfinite_state_aborts_with_step_report():
    ens = ParticleEnsemble(np.zeros((1, 2)), np.zeros((1, 2)), np.ones(1), 0.5)
    p = VPStepParams(dt=default_dt(0.5), mode="external", E0=(np.inf, 0.0))
    with pytest.raises(NonFiniteState) as exc:
        integrate_vp(ens, p, 0.1)
    assert exc.value.step >= 1
