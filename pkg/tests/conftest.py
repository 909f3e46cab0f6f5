import numpy as np
import pytest
from scipy.linalg import expm

from geophase import models
from geophase.linalg import TWO_PI, dagger, random_hermitian, random_unitary


def engineered_model(spectrum, seed, nparams=2, scale=1.0, degeneracies=None):
    """``H(R) = V(R) diag(spectrum) V(R)^+`` with ``V = exp(i sum R_k G_k) V0``.

    Repeated entries in ``spectrum`` give exactly degenerate levels everywhere.
    """
    rng = np.random.default_rng(seed)
    lam = np.asarray(spectrum, dtype=float)
    n = lam.size
    G = np.array([random_hermitian(n, rng, scale) for _ in range(nparams)])
    V0 = random_unitary(n, rng)
    if degeneracies is None:
        _, degeneracies = np.unique(np.round(lam, 12), return_counts=True)

    def func(R):
        R = np.asarray(R, dtype=float)
        K = np.einsum("...k,kij->...ij", R, G).reshape(-1, n, n)
        V = np.array([expm(1j * k) for k in K]).reshape(R.shape[:-1] + (n, n)) @ V0
        return (V * lam[..., None, :]) @ dagger(V)

    return models.ParametricHamiltonian(f"engineered{n}", n, nparams, func, tuple(int(d) for d in degeneracies))


def circle_loop(radius, steps, nparams=2, center=None):
    c = np.zeros(nparams) if center is None else np.asarray(center, dtype=float)

    def sampler(t):
        a = TWO_PI * np.asarray(t, dtype=float)
        pts = np.zeros(a.shape + (nparams,)) + c
        pts[..., 0] += radius * np.cos(a)
        pts[..., 1] += radius * np.sin(a)
        return pts

    return models.ParameterLoop("circle", sampler, 1.0, steps)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
