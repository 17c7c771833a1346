import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gyrolimit.ensemble import GridSpec, ParticleEnsemble, deposit_density, monokinetic_family
from gyrolimit.errors import InputError
from gyrolimit.fieldkernel import BlobParams, direct_field, self_exclusion
from gyrolimit.gyro import eb_drift_error, gyro_density, z_drift_residual, z_transform
from gyrolimit.profiles import MeanVelocity, PatchProfile, VelocityShape
from gyrolimit.vpsim import VPIntegrator, VPState, VPStepParams, default_dt

finite = st.floats(-10, 10)


def test_z_transform_examples():
    e = ParticleEnsemble(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]), np.ones(1), 0.5)
    assert np.allclose(z_transform(e).z, [[0.5, 0.0]])
    e0 = ParticleEnsemble(np.array([[1.0, 2.0]]), np.zeros((1, 2)), np.ones(1), 0.5)
    assert np.array_equal(z_transform(e0).z, e0.x)
    assert np.array_equal(z_transform(e, epsilon=0.0).z, e.x)


@given(st.lists(st.tuples(finite, finite, finite, finite), min_size=1, max_size=10), st.floats(0, 1))
def test_z_transform_inverse_and_mass(rows, eps):
    a = np.array(rows)
    e = ParticleEnsemble(a[:, :2], a[:, 2:], np.ones(len(a)), eps)
    gc = z_transform(e)
    back = z_transform(ParticleEnsemble(gc.z, e.v, e.w, eps), epsilon=-eps)
    assert np.allclose(back.z, e.x, atol=1e-12)
    assert gc.total_mass == e.total_mass


def test_gyro_density_eps0_and_mass():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, size=(500, 2))
    v = rng.normal(size=(500, 2))
    g = GridSpec.covering((-2, 2, -2, 2), 20)
    e0 = ParticleEnsemble(x, v, np.full(500, 1 / 500), 0.0)
    assert np.array_equal(gyro_density(e0, g).values, deposit_density(x, e0.w, g).values)
    e = ParticleEnsemble(x, v, np.full(500, 1 / 500), 0.3)
    d = gyro_density(e, g)
    assert d.mass + d.clipped_mass == pytest.approx(1.0, abs=1e-12)


def test_gyro_density_shift_shrinks_with_eps_eta():
    rho0, F = PatchProfile("bump"), VelocityShape("bump")
    g = GridSpec.covering((-1.5, 1.5, -1.5, 1.5), 30)
    diffs = []
    for eps, eta in ((0.2, 0.4), (0.05, 0.1)):
        e = monokinetic_family(rho0, MeanVelocity("constant", 1.0, 0.0), F, eta,
                               (-1.2, 1.2, -1.2, 1.2), 16, 4, epsilon=eps)
        a = gyro_density(e, g).values
        b = deposit_density(e.x, e.w, g).values
        diffs.append(np.abs(a - b).sum() * g.h**2)
    assert diffs[1] < diffs[0]


def test_z_drift_field_free_is_exact():
    e = ParticleEnsemble(np.array([[0.0, 0.0], [1.0, 1.0]]), np.array([[1.0, 0], [0, 2.0]]), np.ones(2), 0.1)
    p = VPStepParams(dt=default_dt(0.1), mode="external", E0=(0.0, 0.0))
    s = VPIntegrator(p).step(VPState(e))
    mx, mean = z_drift_residual(e, s.ensemble, p.dt, lambda x, w: np.zeros_like(x))
    assert mx <= 1e-12 and mean <= 1e-12


def test_z_drift_errors():
    a = ParticleEnsemble(np.zeros((1, 2)), np.zeros((1, 2)), np.ones(1), 0.1)
    b = ParticleEnsemble(np.zeros((2, 2)), np.zeros((2, 2)), np.ones(2), 0.1)
    with pytest.raises(InputError):
        z_drift_residual(a, b, 0.1, lambda x, w: np.zeros_like(x))


def test_z_drift_self_consistent_refines():
    x = np.array([[-0.5, 0.0], [0.5, 0.1]])
    v = np.array([[0.2, 0.4], [-0.3, 0.1]])
    e = ParticleEnsemble(x, v, np.array([1.0, 0.5]), 0.2)

    def fld(pts, w):
        return direct_field(pts, pts, w, BlobParams(0.0), self_exclusion(len(pts)))

    res = []
    for spg in (32, 64):
        p = VPStepParams(dt=default_dt(0.2, spg))
        s = VPIntegrator(p).step(VPState(e))
        res.append(z_drift_residual(e, s.ensemble, p.dt, fld)[0])
    assert np.isfinite(res).all() and res[1] < res[0]


def test_eb_drift_linear_in_eps():
    ms = [eb_drift_error(e) for e in (0.2, 0.1, 0.05)]
    assert ms[0].x_error > ms[1].x_error > ms[2].x_error
    assert all(m.z_error < 1e-13 for m in ms)
