import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdscreen.modellab.ballspring import BallSpringModel, Bond, cubic_cluster, periodic_chain
from qdscreen.phonons import (
    HuangRhysDecomposition,
    PhononError,
    PhononSet,
    finite_displacement_force_constants,
    partial_hr_factors,
    phonon_modes,
    pl_lineshape,
    spectral_function,
)

# hbar * sqrt(eV / (amu A^2)) in meV, from CODATA 2018 constants
HBAR = 6.62607015e-34 / (2 * math.pi)
EV = 1.602176634e-19
AMU = 1.66053906660e-27
MEV_FACTOR = HBAR * math.sqrt(EV / (AMU * 1e-20)) / EV * 1e3


def test_chain_matches_analytic_dispersion():
    n, k, m = 8, 10.0, 28.0855
    model = periodic_chain(n, k=k, mass=m)
    ph = phonon_modes(model.force_constants(), model.masses)
    analytic = 2 * math.sqrt(k / m) * np.abs(np.sin(np.pi * np.arange(n) / n)) * MEV_FACTOR
    expected = np.sort(np.concatenate([analytic, np.zeros(2 * n)]))
    got = np.sort(ph.frequencies)
    scale = expected.max()
    assert np.max(np.abs(got - expected)) / scale < 1e-6
    nz = expected > 1e-6
    assert np.max(np.abs(got[nz] / expected[nz] - 1)) < 1e-6


def test_mass_on_wall():
    fc = np.diag([4.0, 4.0, 4.0])
    ph = phonon_modes(fc, [2.0], acoustic_sum_rule=False)
    assert ph.frequencies == pytest.approx([math.sqrt(2.0) * MEV_FACTOR] * 3, rel=1e-9)


def test_imaginary_and_shape_errors():
    with pytest.raises(PhononError, match="imaginary"):
        phonon_modes(-np.eye(3), [1.0], acoustic_sum_rule=False)
    with pytest.raises(PhononError):
        phonon_modes(np.eye(6), [1.0])
    with pytest.raises(PhononError, match="symmetric"):
        phonon_modes(np.triu(np.ones((3, 3))), [1.0], acoustic_sum_rule=False)


def test_finite_displacement_exact_for_harmonic():
    model = cubic_cluster()
    fc = finite_displacement_force_constants(model.forces, model.positions)
    assert np.max(np.abs(fc - model.force_constants())) < 1e-9


def test_finite_displacement_error_is_second_order():
    model = periodic_chain(4)
    model.quartic = 50.0
    shift = np.zeros_like(model.positions)
    shift[:, 0] = [0.0, 0.05, -0.02, 0.03]  # evaluate away from the symmetric minimum

    def forces(p):
        return model.forces(p + shift)

    exact = None
    errs = []
    for d in (0.02, 0.01, 0.005):
        fc = finite_displacement_force_constants(forces, model.positions, d, acoustic_sum_rule=False)
        if exact is None:
            # analytic Hessian of k s^2/2 + g4 s^4/24 per bond
            exact = np.zeros_like(fc)
            u = shift
            for b in model.bonds:
                s = b.direction @ (u[b.j] - u[b.i])
                kk = b.k + model.quartic * s * s / 2
                kmat = kk * np.outer(b.direction, b.direction)
                for a, c, sign in ((b.i, b.i, 1), (b.j, b.j, 1), (b.i, b.j, -1), (b.j, b.i, -1)):
                    exact[3 * a : 3 * a + 3, 3 * c : 3 * c + 3] += sign * kmat
        errs.append(np.max(np.abs(fc - exact)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_provider_failure_is_wrapped():
    def bad(p):
        raise RuntimeError("calculator crashed")

    with pytest.raises(PhononError, match="force provider failed"):
        finite_displacement_force_constants(bad, np.zeros((1, 3)))


def test_rigid_translation_has_no_huang_rhys():
    model = cubic_cluster()
    ph = phonon_modes(model.force_constants(), model.masses)
    dr = np.tile([0.03, -0.01, 0.02], (model.n_atoms, 1))
    assert partial_hr_factors(ph, dr).total < 1e-8


@settings(max_examples=50)
@given(st.floats(-0.05, 0.05), st.integers(0, 26))
def test_single_mode_displacement(amplitude, atom):
    """Displacing along one mode puts all weight on that mode (and its degenerate partners)."""
    model = cubic_cluster()
    ph = phonon_modes(model.force_constants(), model.masses)
    k = 3 + atom  # skip the three translations
    dr = amplitude * ph.eigenvectors[k] / np.sqrt(model.masses)[:, None]
    hr = partial_hr_factors(ph, dr)
    w = ph.frequencies[k] * 1e-3
    q2 = amplitude**2
    hbar2_over_amu = HBAR**2 / (AMU * 1e-20) / EV
    assert hr.total == pytest.approx(w * q2 / (2 * hbar2_over_amu), rel=1e-9, abs=1e-15)


def one_mode(s=0.3, energy=50.0):
    ph = PhononSet(np.array([energy]), np.zeros((1, 1, 3)), np.array([1.0]))
    return ph, HuangRhysDecomposition(np.array([s]), s, np.array([0.0]))


def test_poisson_weights():
    ph, hr = one_mode()
    res = pl_lineshape(hr, ph, 1.0, 2.0)
    e, a = res.energy, res.sideband

    def weight(center):
        sel = np.abs(e - center) < 0.025
        return np.trapezoid(a[sel], e[sel])

    assert res.zpl_weight == pytest.approx(math.exp(-0.3))
    assert weight(1.0) == pytest.approx(0.740818, abs=1e-3)
    assert weight(0.95) == pytest.approx(0.3 * math.exp(-0.3), abs=1e-3)
    assert weight(0.90) == pytest.approx(0.045 * math.exp(-0.3), abs=1e-3)
    # the omega^3 factor tilts weight towards the ZPL
    sel = np.abs(e - 1.0) < 0.025
    assert np.trapezoid(res.intensity[sel], e[sel]) > weight(1.0)


def test_lineshape_zero_coupling_is_gaussian():
    ph, hr = one_mode(0.0)
    res = pl_lineshape(hr, ph, 0.9, 2.0)
    peak = res.energy[np.argmax(res.sideband)]
    assert peak == pytest.approx(0.9, abs=1e-4)
    assert res.zpl_weight == 1.0


def test_spectral_sum_rule():
    model = cubic_cluster()
    ph = phonon_modes(model.force_constants(), model.masses)
    rng = np.random.default_rng(3)
    hr = partial_hr_factors(ph, rng.normal(0, 0.02, (model.n_atoms, 3)))
    grid = np.linspace(-60, 200, 26001)
    assert np.trapezoid(spectral_function(hr, ph, grid, 2.0), grid) == pytest.approx(hr.total, abs=1e-6)


def test_lineshape_grid_errors():
    ph, hr = one_mode(0.3, 50.0)
    with pytest.raises(PhononError, match="Nyquist"):
        pl_lineshape(hr, ph, 1.0, n_time=512, resolution=0.05)
    with pytest.raises(PhononError, match="coarser"):
        pl_lineshape(hr, ph, 1.0, 2.0, grid=np.linspace(0.5, 1.1, 20))


def test_user_grid_normalized():
    ph, hr = one_mode(0.5, 30.0)
    grid = np.linspace(0.7, 1.05, 3501)
    res = pl_lineshape(hr, ph, 1.0, 2.0, grid)
    assert np.trapezoid(res.intensity, grid) == pytest.approx(1.0)
    assert np.all(res.intensity >= 0)
