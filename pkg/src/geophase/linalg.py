"""Small dense linear-algebra kernels shared by all modules."""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


def dagger(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2).conj()


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dagger(a))


def hermiticity_error(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - dagger(a)), initial=0.0))


def unitarity_error(u: np.ndarray) -> float:
    """Max-entry deviation of ``U^dagger U`` from the identity."""
    n = u.shape[-1]
    return float(np.max(np.abs(dagger(u) @ u - np.eye(n)), initial=0.0))


def expm_hermitian(h: np.ndarray, scale: complex = -1j) -> np.ndarray:
    """``exp(scale * H)`` for (stacks of) Hermitian ``H`` via eigendecomposition.

    With the default ``scale=-1j`` (or any purely imaginary scale) the result is
    unitary to machine precision regardless of the step size.
    """
    w, v = np.linalg.eigh(h)
    return (v * np.exp(scale * w)[..., None, :]) @ dagger(v)


def ordered_product(mats: np.ndarray) -> np.ndarray:
    """Time-ordered product ``M[k-1] ... M[1] M[0]`` of a stack of matrices.

    Pairwise tree reduction keeps the ordering while doing the work in
    vectorised ``matmul`` calls.
    """
    mats = np.asarray(mats)
    if mats.shape[0] == 0:
        raise ValueError("empty product")
    while mats.shape[0] > 1:
        if mats.shape[0] % 2:
            # fold the last (latest) factor onto its predecessor
            tail = mats[-1] @ mats[-2]
            mats = np.concatenate([mats[:-2], tail[None]], axis=0)
            continue
        mats = mats[1::2] @ mats[0::2]
    return mats[0]


def wrap_phase(x):
    """Reduce an angle to the half-open interval ``(-pi, pi]``."""
    y = np.mod(np.asarray(x, dtype=float) + np.pi, TWO_PI) - np.pi
    y = np.where(y == -np.pi, np.pi, y)
    return float(y) if np.ndim(y) == 0 else y


def phase_distance(a, b) -> float:
    """Distance between two phases on the circle."""
    return abs(wrap_phase(float(a) - float(b)))


def equal_up_to_global_phase(a: np.ndarray, b: np.ndarray) -> tuple[float, complex]:
    """Return ``(max |a - e^{i chi} b|, e^{i chi})`` with ``chi`` fitted optimally."""
    overlap = np.vdot(b, a)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0 + 0j
    return float(np.max(np.abs(a - phase * b))), complex(phase)


def subspace_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Principal angles between the column spaces of ``a`` and ``b``."""
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    s = np.linalg.svd(dagger(qa) @ qb, compute_uv=False)
    return np.arccos(np.clip(s, -1.0, 1.0))


def spectral_norm(h: np.ndarray) -> float:
    return float(np.linalg.norm(h, 2))


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (a + a.conj().T)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
