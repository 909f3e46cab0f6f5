import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geophase import models
from geophase.errors import DegenerateLoop
from geophase.linalg import TWO_PI, hermiticity_error


def test_spin_half_examples():
    H = models.spin_half_hamiltonian([0, 0, 2])
    assert np.allclose(H, np.diag([1, -1]))
    H = models.spin_half_hamiltonian([2, 0, 0])
    assert np.allclose(H, [[0, 1], [1, 0]])
    w = np.linalg.eigvalsh(models.spin_half_hamiltonian([1, 1, 1]))
    assert np.allclose(w, [-np.sqrt(3) / 2, np.sqrt(3) / 2], atol=1e-14)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_spin_half_splitting_is_field_length(B):
    w = np.linalg.eigvalsh(models.spin_half_hamiltonian(B))
    assert abs((w[1] - w[0]) - np.linalg.norm(B)) < 1e-12
    assert hermiticity_error(models.spin_half_hamiltonian(B)) == 0


def test_latitude_loop_examples():
    pts = models.latitude_loop(0.0, 1.0, 16).points()
    assert np.allclose(pts, [0, 0, 1])
    pts = models.latitude_loop(np.pi / 2, 1.0, 4).points()
    assert np.allclose(pts, [[1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0]], atol=1e-15)
    L = models.latitude_loop(np.pi / 3, 0.7, 100)
    assert np.array_equal(L.sampler(np.array([0.0])), L.sampler(np.array([0.0])))
    assert np.abs(L.sampler(np.array([L.period])) - L.sampler(np.array([0.0]))).max() < 1e-14


def test_latitude_loop_rejects_zero_rate():
    with pytest.raises(DegenerateLoop):
        models.latitude_loop(1.0, 0.0, 10)


def test_open_curve_is_rejected():
    with pytest.raises(DegenerateLoop):
        models.ParameterLoop("open", lambda t: np.asarray(t)[..., None], 1.0, 10)


def test_builtin_loops_close():
    loops = [
        models.latitude_loop(1.1, -2.0, 64),
        models.plaquette_loop([0, 0, 1], (0, 1), 0.1, 64),
        models.circular_drive_loop(0.3, 0.2, 64, -1),
        models.rotation_loop(0.5, 64),
        models.phase_loop(64, 0.3, 2),
    ]
    for L in loops:
        a, b = L.sampler(np.array([0.0, L.period]))
        d = b - a
        if L.angular:
            d = np.mod(d + np.pi, TWO_PI) - np.pi
        assert np.abs(d).max() <= L.closure_tol


def test_two_spin_examples():
    spec = models.SpinRegisterSpec(1.0, 0.6, 0.0, 0.2, 0.1)
    H = models.two_spin_hamiltonian(spec).eval([0.0, 0.0])
    w1, w2 = 1.0, 0.6
    assert np.allclose(H, np.diag([w1 + w2, w1 - w2, -w1 + w2, -w1 - w2]) / 2)
    # free and coupling parts commute when the field is along z
    spec = models.SpinRegisterSpec(1.0, 0.6, 0.3, 0.2, 0.1)
    H = models.two_spin_hamiltonian(spec).eval([0.0, 0.0])
    Hint = 0.25 * spec.J * np.kron(models.SIGMA_Z, models.SIGMA_Z)
    H0 = H - Hint
    assert np.abs(H0 @ Hint - Hint @ H0).max() < 1e-15
    # swapping the spins conjugates by the qubit swap
    S = np.eye(4)[[0, 2, 1, 3]]
    R = [0.3, -0.2]
    Ha = models.two_spin_hamiltonian(spec).eval(R)
    Hb = models.two_spin_hamiltonian(spec.swapped()).eval(R)
    assert np.allclose(S @ Ha @ S, Hb, atol=1e-15)


def test_identical_spins_rejected():
    with pytest.raises(ValueError):
        models.SpinRegisterSpec(1.0, 1.0, 0.0, 0.1, 0.1)


def test_spin32_generators():
    J1, J2, J3 = models.spin32_generators()
    assert np.allclose(J3, np.diag([1.5, -1.5, 0.5, -0.5]))
    c = lambda a, b: a @ b - b @ a
    assert np.abs(c(J1, J2) - 1j * J3).max() <= 1e-12
    assert np.abs(c(J2, J3) - 1j * J1).max() <= 1e-12
    assert np.abs(c(J3, J1) - 1j * J2).max() <= 1e-12
    assert np.abs(J1 @ J1 + J2 @ J2 + J3 @ J3 - 3.75 * np.eye(4)).max() < 1e-14


def test_quadrupole_lab_hamiltonian():
    spec = models.QuadrupoleSpec(1.3, 0.2, 0.0)
    H = models.quadrupole_lab_hamiltonian(spec, 0.0)
    _, _, J3 = models.spin32_generators()
    assert np.allclose(H, 1.3 * (J3 @ J3 - 1.25 * np.eye(4)))
    assert np.allclose(np.linalg.eigvalsh(H), [-1.3, -1.3, 1.3, 1.3])
    spec = models.QuadrupoleSpec(1.0, 0.2, 0.9)
    t = np.linspace(0, spec.period, 33)
    w = np.linalg.eigvalsh(models.quadrupole_lab_hamiltonian(spec, t))
    assert np.abs(w - w[0]).max() <= 1e-10


def test_model_validates_parameter_count():
    m = models.spin_half_model()
    with pytest.raises(ValueError):
        m.eval([1.0, 2.0])
    with pytest.raises(ValueError):
        m.eval([np.nan, 0, 1])
    assert m.level_slice(1) == slice(1, 2)
