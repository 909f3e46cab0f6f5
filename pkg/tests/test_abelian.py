import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geophase import abelian, models
from geophase.errors import DomainViolation, LevelCrossing, LevelMismatch, PivotSingular
from geophase.linalg import TWO_PI, phase_distance, random_hermitian

from conftest import circle_loop, engineered_model

# three-level instance used for frozen values; phases from the discrete
# Pancharatnam product -arg prod <n_k|n_k+1> over 20000 eigen-solver samples
TEMPLATE = np.array([
    [0.3, 0.8, 0.5 * np.exp(0.4j)],
    [0.8, -0.6, 0.7 * np.exp(-1.1j)],
    [0.5 * np.exp(-0.4j), 0.7 * np.exp(1.1j), 0.9],
])
TEMPLATE_PHASES = (-1.35439637223, 1.41410514445, -0.05970877064)


def pancharatnam(H, level):
    _, V = np.linalg.eigh(H)
    v = V[:, :, level]
    ov = np.einsum("ki,ki->k", v.conj(), np.roll(v, -1, axis=0))
    return -np.angle(np.prod(ov))


def bloch(theta, phi):
    return models.spin_half_hamiltonian(
        [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


# ---------------------------------------------------------------- coordinates

def test_two_level_coordinates():
    th, ph = 0.9, 0.4
    H = bloch(th, ph)
    E = np.linalg.eigvalsh(H)
    # the lower level carries -tan(theta/2) e^{-i phi}; the upper one cot(theta/2) e^{-i phi}
    lo = abelian.uniform_coordinates(H, E[0], level=0)
    up = abelian.uniform_coordinates(H, E[1], level=1)
    assert abs(lo.xi[0] + np.tan(th / 2) * np.exp(-1j * ph)) < 1e-14
    assert abs(up.xi[0] - np.exp(-1j * ph) / np.tan(th / 2)) < 1e-14


def test_diagonal_last_level_has_zero_coordinates():
    H = np.diag([0.1, 0.7, 2.0])
    uc = abelian.uniform_coordinates(H, 2.0)
    assert np.all(uc.xi == 0)
    v = uc.vector()
    assert np.allclose(v, [0, 0, 1])


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_coordinates_reproduce_eigenvectors(seed):
    rng = np.random.default_rng(seed)
    H = random_hermitian(3, rng)
    E, V = np.linalg.eigh(H)
    for k in range(3):
        piv = abelian.best_pivot(H, E[k])
        v = abelian.uniform_coordinates(H, E[k], piv, level=k).vector()
        assert abs(abs(np.vdot(V[:, k], v)) - 1) < 1e-9
        assert abs(np.linalg.norm(v) - 1) < 1e-12


def test_singular_pivot_raises():
    H = np.diag([0.0, 1.0, 2.0])
    with pytest.raises(PivotSingular):
        abelian.uniform_coordinates(H, 1.0, pivot=(0, 1))


# ---------------------------------------------------------------- increments

def _uc(H, E, level):
    return abelian.uniform_coordinates(H, E, level=level)


def test_increment_trivial_cases():
    H = bloch(0.8, 0.3)
    E = np.linalg.eigvalsh(H)[1]
    a = _uc(H, E, 1)
    assert abelian.connection_increment(a, a).value == 0
    # real coordinates along the segment contribute nothing
    H2 = bloch(0.9, 0.0)
    a = _uc(bloch(0.8, 0.0), np.linalg.eigvalsh(bloch(0.8, 0.0))[1], 1)
    b = _uc(H2, np.linalg.eigvalsh(H2)[1], 1)
    assert abs(abelian.connection_increment(a, b).value) < 1e-16


def test_equator_increment():
    dphi = TWO_PI / 1000
    Ha, Hb = bloch(np.pi / 2, 0.3), bloch(np.pi / 2, 0.3 + dphi)
    a, b = _uc(Ha, 0.5, 1), _uc(Hb, 0.5, 1)
    inc = abelian.connection_increment(a, b)
    # |xi| = 1 on the equator: the increment is +dphi/2 up to the chord correction
    assert abs(inc.value - dphi / 2) < 1e-5
    assert inc.imag_residue <= 1e-12


def test_increment_level_mismatch():
    H = bloch(0.8, 0.3)
    E = np.linalg.eigvalsh(H)
    with pytest.raises(LevelMismatch):
        abelian.connection_increment(_uc(H, E[0], 0), _uc(H, E[1], 1))


# ---------------------------------------------------------------- berry_phase

@pytest.mark.parametrize("theta", [np.pi / 6, np.pi / 3, np.pi / 2, 2 * np.pi / 3])
def test_latitude_phases(theta):
    L = models.latitude_loop(theta, 1.0, 4000)
    m = models.spin_half_model()
    up = abelian.berry_phase(m, L, 1)
    lo = abelian.berry_phase(m, L, 0)
    omega = TWO_PI * (1 - np.cos(theta))
    assert phase_distance(up.gamma, -omega / 2) < 1e-6
    assert phase_distance(lo.gamma, omega / 2) < 1e-6
    # antipodal consistency
    assert phase_distance(up.gamma, -lo.gamma) < 2e-6


def test_latitude_pole_is_trivial():
    L = models.latitude_loop(0.0, 1.0, 64)
    assert abs(abelian.berry_phase(models.spin_half_model(), L, 0).gamma) < 1e-15


def test_winding_accumulates_unreduced():
    L = models.latitude_loop(2 * np.pi / 3, 1.0, 4000)
    L2 = models.ParameterLoop("twice", lambda t: L.sampler(2 * np.asarray(t)), L.period, 8000)
    g1 = abelian.berry_phase(models.spin_half_model(), L, 0).gamma
    h2 = abelian.berry_phase(models.spin_half_model(), L2, 0)
    assert abs(h2.gamma - 2 * g1) < 1e-9
    assert h2.winding == int(round((h2.gamma - h2.principal) / TWO_PI))


def test_midpoint_convergence_is_second_order():
    m = models.spin_half_model()
    exact = -np.pi * (1 - np.cos(1.0))
    errs = [phase_distance(abelian.berry_phase(m, models.latitude_loop(1.0, 1.0, n), 1).gamma, exact)
            for n in (100, 200, 400)]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8)


def test_pivot_choice_does_not_change_phase():
    m = models.spin_half_model()
    L = models.latitude_loop(1.2, 1.0, 2000)
    g0 = abelian.berry_phase(m, L, 0, pivot=(0,)).gamma
    g1 = abelian.berry_phase(m, L, 0, pivot=(1,)).gamma
    assert phase_distance(g0, g1) < 1e-5


def test_increments_are_real():
    mod = models.three_level_model(TEMPLATE)
    hol, rows = abelian.berry_phase(mod, models.phase_loop(500), 1, trace=True)
    assert len(rows) == 500
    assert abs(rows[-1][-1] - hol.gamma) < 1e-12


def test_level_crossing_detected():
    # eigenvalues of diag(cos, -cos) cross at phi = pi/2
    def func(R):
        R = np.asarray(R, dtype=float)
        c = np.cos(R[..., 0])
        H = np.zeros(R.shape[:-1] + (2, 2), dtype=complex)
        H[..., 0, 0], H[..., 1, 1] = c, -c
        return H
    mod = models.ParametricHamiltonian("cross", 2, 1, func, (1, 1))
    with pytest.raises(LevelCrossing):
        abelian.berry_phase(mod, models.phase_loop(100), 0)


def test_steps_below_minimum_rejected():
    with pytest.raises(ValueError):
        abelian.berry_phase(models.spin_half_model(), models.latitude_loop(1.0, 1.0, 4), 0)


def test_pivot_fallback_recovers():
    # the loop passes through -z, where the default minor H_00 - E_0 of the lower level vanishes
    m = models.spin_half_model()
    loop = circle_loop(0.05, 400, nparams=3, center=[0.05, 0.0, -1.0])
    with pytest.raises(PivotSingular):
        abelian.berry_phase(m, loop, 0, pivot=(0,))
    auto = abelian.berry_phase(m, loop, 0)
    ref = pancharatnam(m.eval(loop.points()), 0)
    assert phase_distance(auto.gamma, ref) < 1e-5


# ---------------------------------------------------------------- closed forms

def test_two_level_closed_form():
    half = models.latitude_loop(np.pi / 2, 1.0, 1000)
    assert phase_distance(abelian.two_level_closed_form(half, 1).gamma, -np.pi) < 1e-12
    tiny = models.latitude_loop(1e-6, 1.0, 1000)
    assert abs(abelian.two_level_closed_form(tiny, 1).gamma) < 1e-11
    L = models.latitude_loop(np.pi / 3, 1.0, 10_000)
    cf = abelian.two_level_closed_form(L, 1).gamma
    num = abelian.berry_phase(models.spin_half_model(), L, 1).gamma
    assert phase_distance(cf, num) < 1e-6


def test_three_level_frozen_values():
    mod = models.three_level_model(TEMPLATE)
    L = models.phase_loop(4000)
    for k, ref in enumerate(TEMPLATE_PHASES):
        assert phase_distance(abelian.berry_phase(mod, L, k).gamma, ref) < 1e-6
        assert phase_distance(abelian.three_level_closed_form(TEMPLATE, k, L).gamma, ref) < 1e-6
    assert abs(sum(TEMPLATE_PHASES)) < 1e-8


def test_three_level_trivial_cases():
    T = TEMPLATE.copy()
    T[0, 2] = 0.6 * np.exp(0.4j)
    T[1, 2] = 0.6 * np.exp(-1.1j)
    c = abelian.three_level_printed_coefficients(T, 0.3, 0.1)
    assert c["A"] == 0
    still = models.phase_loop(64, 0.7, winding=0)
    assert abelian.three_level_closed_form(TEMPLATE, 0, still).gamma == 0


def test_three_level_printed_coefficients_differ():
    # recorded discrepancy: the printed C_k [A - D_k sin chi] does not integrate to the phase
    L = models.phase_loop(2000)
    printed = abelian.three_level_closed_form(TEMPLATE, 0, L, printed_form=True).gamma
    assert phase_distance(printed, TEMPLATE_PHASES[0]) > 1e-2


# ---------------------------------------------------------------- algebras

def test_algebra_constant_path():
    p = abelian.AlgebraFormPath("su2", np.full(50, 0.3 + 0.2j), 0.5)
    assert abelian.algebra_phase(p).gamma == 0


def test_su2_circle_matches_solid_angle():
    th = 1.1
    phi = np.linspace(0, TWO_PI, 4000, endpoint=False)
    p = abelian.AlgebraFormPath("su2", np.tan(th / 2) * np.exp(1j * phi), 0.5)
    g = abelian.algebra_phase(p).gamma
    ref = abelian.two_level_closed_form(models.latitude_loop(th, 1.0, 4000), 1).gamma
    assert phase_distance(g, ref) < 1e-6


def test_hw_circle():
    rho = 0.4
    phi = np.linspace(0, TWO_PI, 4000, endpoint=False)
    p = abelian.AlgebraFormPath("hw", rho * np.exp(1j * phi), 1.0)
    # sign fixed by the su2 case above: counter-clockwise circles give -2 * (pi rho^2) * 2 m
    assert abs(abelian.algebra_phase(p).gamma + 4 * np.pi * rho ** 2) < 1e-5


def test_su11_domain():
    with pytest.raises(DomainViolation):
        abelian.AlgebraFormPath("su11", np.array([0.5, 1.2]), 0.5)


# ---------------------------------------------------------------- curvature

def test_curvature_monopole():
    m = models.spin_half_model()
    F = abelian.curvature_oracle(m, [0, 0, 1], 1)
    assert np.allclose(abelian.curvature_vector(F), [0, 0, -0.5], atol=1e-8)
    rng = np.random.default_rng(1)
    for _ in range(5):
        R = rng.normal(size=3)
        r = np.linalg.norm(R)
        for level, sign in ((1, 1), (0, -1)):
            B = abelian.curvature_vector(abelian.curvature_oracle(m, R, level))
            assert np.allclose(B, -sign * R / (2 * r ** 3), rtol=1e-7, atol=1e-9)


def test_curvature_antisymmetric():
    mod = engineered_model([0.0, 0.8, 1.9], seed=2, nparams=3)
    F = abelian.curvature_oracle(mod, [0.1, -0.2, 0.3], 1)
    assert np.abs(F + F.T).max() < 1e-9


def test_stokes_on_small_plaquette():
    m = models.spin_half_model()
    center = np.array([0.3, -0.4, 0.8])
    size = 0.02
    L = models.plaquette_loop(center, (0, 1), size, 400)
    g = abelian.berry_phase(m, L, 1).gamma
    F = abelian.curvature_oracle(m, center, 1)
    flux = F[0, 1] * size ** 2
    assert abs(g - flux) <= 1e-4 * abs(flux)
