"""Wilczek-Zee connection and holonomy for degenerate levels.

A ``d``-fold level is represented by the ``(n-d) x d`` matrix
``Z = (H[P,P] - E)^{-1} (-H[P,Q])``: the eigenvectors are the columns of
``X`` with ``X[P] = Z`` and ``X[Q] = 1``.  Gram-Schmidt on those columns is a
Cholesky factorisation of ``Gamma = 1 + Z^dagger Z``.

Convention: a connection sample is the Hermitian matrix ``A[b, a] = i <z_b|dz_a>``
and coefficients ``c`` in the frame evolve as ``c -> exp(i A) c`` per step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import schur

from .abelian import DEFAULT_COND_TOL, DEFAULT_GAP_TOL, normalized_minor_det, plan_pivots
from .errors import (FrameDiscontinuity, InvariantViolation, LevelCrossing, LevelMismatch,
                     MultiplicityDrift, NonClosedGauge, PivotSingular)
from .linalg import dagger, expm_hermitian, ordered_product, unitarity_error
from .models import MIN_STEPS, ParameterLoop, ParametricHamiltonian


@dataclass(frozen=True)
class DegenerateFrame:
    level: int
    energy: float
    d: int
    pivot: tuple[int, ...]
    Z: np.ndarray
    z: np.ndarray

    @property
    def free(self) -> tuple[int, ...]:
        n = self.z.shape[0]
        return tuple(i for i in range(n) if i not in self.pivot)


@dataclass(frozen=True)
class MatrixConnectionSample:
    A: np.ndarray
    skew_residue: float = 0.0


@dataclass(frozen=True)
class NonAbelianHolonomy:
    U: np.ndarray
    level: int
    steps: int
    method: str
    pivot_changes: tuple = ()
    connections: np.ndarray | None = field(default=None, repr=False)


def _complement(n: int, pivot: Sequence[int]) -> list[int]:
    return [i for i in range(n) if i not in pivot]


def _frames_from_Z(Z: np.ndarray, pivot, n: int) -> np.ndarray:
    d = Z.shape[-1]
    X = np.zeros(Z.shape[:-2] + (n, d), dtype=complex)
    X[..., list(pivot), :] = Z
    X[..., _complement(n, pivot), :] = np.eye(d)
    gram = np.eye(d) + dagger(Z) @ Z
    L = np.linalg.cholesky(gram)
    # z = X L^{-dagger}, i.e. Gram-Schmidt on the columns of X in order
    return dagger(np.linalg.solve(L, dagger(X)))


def gram_matrices(Z: np.ndarray) -> list[np.ndarray]:
    """Leading Gram matrices ``Gamma_a = 1 + Z_a^dagger Z_a``, ``a = 1..d``."""
    gram = np.eye(Z.shape[1]) + Z.conj().T @ Z
    return [gram[:a, :a] for a in range(1, Z.shape[1] + 1)]


def degenerate_frame(H, E: float, d: int, pivot: Sequence[int] | None = None, level: int = -1,
                     cond_tol: float = DEFAULT_COND_TOL) -> DegenerateFrame:
    """Orthonormal eigenframe of a ``d``-fold degenerate level at energy ``E``."""
    H = np.asarray(H, dtype=complex)
    n = H.shape[0]
    if not 1 <= d < n:
        raise ValueError("multiplicity must satisfy 1 <= d < n")
    pivot = tuple(range(n - d) if pivot is None else pivot)
    if len(pivot) != n - d:
        raise ValueError(f"pivot must have n - d = {n - d} indices")
    det = float(normalized_minor_det(H, E, pivot))
    if not det >= cond_tol:
        raise PivotSingular(f"pivot {pivot} singular (normalised det {det:.3e})", pivot, det)
    P, Q = list(pivot), _complement(n, pivot)
    Z = np.linalg.solve(H[np.ix_(P, P)] - E * np.eye(n - d), -H[np.ix_(P, Q)])
    return DegenerateFrame(level, float(E), d, pivot, Z, _frames_from_Z(Z, pivot, n))


def _closed_form(Zm: np.ndarray, dZ: np.ndarray) -> np.ndarray:
    """Connection from ``Z`` and ``dZ`` via the Cholesky factor of ``Gamma``.

    With ``Gamma = L L^dagger``:
    ``A = i L^{-1} Z^dagger dZ L^{-dagger} - i (dL^dagger) L^{-dagger}``, where
    ``(dL^dagger) L^{-dagger}`` is the upper-triangular half (diagonal halved)
    of ``L^{-1} dGamma L^{-dagger}``.  Vectorised over leading axes.
    """
    d = Zm.shape[-1]
    gram = np.eye(d) + dagger(Zm) @ Zm
    L = np.linalg.cholesky(gram)
    Linv = np.linalg.inv(L)
    T = Linv @ (dagger(Zm) @ dZ) @ dagger(Linv)
    S = T + dagger(T)
    upper = np.triu(S, 1) + 0.5 * np.eye(d) * np.diagonal(S, axis1=-2, axis2=-1)[..., None, :]
    return 1j * (T - upper)


def _check_pair(fa: DegenerateFrame, fb: DegenerateFrame):
    if fa.level != fb.level or fa.d != fb.d:
        raise LevelMismatch("frames belong to different levels")
    if fa.pivot != fb.pivot:
        raise LevelMismatch("frames use different pivots; insert a gauge transition")


def matrix_connection_closed_form(frame_a: DegenerateFrame, frame_b: DegenerateFrame) -> MatrixConnectionSample:
    """Connection increment between adjacent samples from Hamiltonian data only."""
    _check_pair(frame_a, frame_b)
    A = _closed_form(0.5 * (frame_a.Z + frame_b.Z), frame_b.Z - frame_a.Z)
    skew = float(np.max(np.abs(A - dagger(A))))
    return MatrixConnectionSample(0.5 * (A + dagger(A)), skew)


def _numeric(za: np.ndarray, zb: np.ndarray) -> np.ndarray:
    return 1j * dagger(0.5 * (za + zb)) @ (zb - za)


def matrix_connection_numeric(frame_a: DegenerateFrame, frame_b: DegenerateFrame) -> MatrixConnectionSample:
    """Connection increment from the definition ``i <z_b | dz_a>`` at the midpoint."""
    _check_pair(frame_a, frame_b)
    overl = np.abs(np.einsum("ia,ia->a", frame_a.z.conj(), frame_b.z))
    if np.any(overl < 0.5):
        raise FrameDiscontinuity(f"frame jumped between samples (overlaps {overl})")
    A = _numeric(frame_a.z, frame_b.z)
    skew = float(np.max(np.abs(A - dagger(A))))
    return MatrixConnectionSample(0.5 * (A + dagger(A)), skew)


def sample_degenerate_level(model: ParametricHamiltonian, loop: ParameterLoop, level: int,
                            gap_tol: float = DEFAULT_GAP_TOL, split_tol: float = 1e-8):
    """Hamiltonians on the loop and the (mean) energy of a degenerate level."""
    H = model.eval(loop.points())
    evals = np.linalg.eigvalsh(H)
    sl = model.level_slice(level)
    cluster = evals[:, sl]
    scale = np.max(np.abs(evals), axis=-1)
    scale = np.where(scale > 0, scale, 1.0)
    split = (cluster[:, -1] - cluster[:, 0]) / scale
    if np.any(split > split_tol):
        k = int(np.argmax(split))
        raise MultiplicityDrift(f"level {level} splits by {split[k] * scale[k]:.3e} at sample {k}")
    gaps = np.full(len(evals), np.inf)
    if sl.start > 0:
        gaps = np.minimum(gaps, cluster[:, 0] - evals[:, sl.start - 1])
    if sl.stop < evals.shape[1]:
        gaps = np.minimum(gaps, evals[:, sl.stop] - cluster[:, -1])
    if np.any(gaps / scale < gap_tol):
        k = int(np.argmin(gaps / scale))
        raise LevelCrossing(f"level {level} meets a neighbour at sample {k}")
    return H, cluster.mean(axis=1), sl.stop - sl.start


def _batched_Z(H, E, pivot, d):
    n = H.shape[-1]
    P, Q = list(pivot), _complement(n, pivot)
    sub = H[:, P, :][:, :, P] - E[:, None, None] * np.eye(n - d)
    return np.linalg.solve(sub, -H[:, P, :][:, :, Q])


def connection_path(model: ParametricHamiltonian, loop: ParameterLoop, level: int, *,
                    method: str = "closed_form", pivot=None, cond_tol: float = DEFAULT_COND_TOL,
                    gap_tol: float = DEFAULT_GAP_TOL):
    """Per-step connection matrices around the loop.

    Returns ``(A, transitions, changes)`` where ``A`` has shape ``(N, d, d)``,
    ``transitions[k]`` is the unitary applied before step ``k`` (``None`` when
    the pivot does not change) and ``changes`` logs pivot switches.
    """
    if method not in ("closed_form", "numeric"):
        raise ValueError("method must be 'closed_form' or 'numeric'")
    H, E, d = sample_degenerate_level(model, loop, level, gap_tol)
    n = H.shape[-1]
    plan = plan_pivots(H, E, d, pivot, cond_tol)
    Zs = {p: _batched_Z(H, E, p, d) for p in dict.fromkeys(plan)}
    zs = {p: _frames_from_Z(Z, p, n) for p, Z in Zs.items()}
    N = loop.steps
    A = np.empty((N, d, d), dtype=complex)
    transitions: list = [None] * N
    changes = []
    for k in range(N):
        p, nxt = plan[k], (k + 1) % N
        q = plan[nxt]
        if q != p:
            # coefficients in the new chart: c' = z_new^dagger z_old c
            transitions[k] = dagger(zs[q][k]) @ zs[p][k]
            changes.append((nxt, p, q))
        if method == "closed_form":
            Za, Zb = Zs[q][k], Zs[q][nxt]
            A[k] = _closed_form(0.5 * (Za + Zb), Zb - Za)
        else:
            za, zb = zs[q][k], zs[q][nxt]
            overl = np.abs(np.einsum("ia,ia->a", za.conj(), zb))
            if np.any(overl < 0.5):
                raise FrameDiscontinuity(f"frame jumped at step {k}")
            A[k] = _numeric(za, zb)
    A = 0.5 * (A + dagger(A))
    return A, transitions, changes


def ordered_exponential(A: np.ndarray, transitions=None) -> np.ndarray:
    """``... exp(iA_1) T_1 exp(iA_0) T_0`` with optional chart transitions ``T_k``."""
    steps = expm_hermitian(A, scale=1j)
    if transitions is not None and any(t is not None for t in transitions):
        mats = []
        for k, s in enumerate(steps):
            mats.append(s if transitions[k] is None else s @ transitions[k])
        steps = np.stack(mats)
    return ordered_product(steps)


def holonomy(model: ParametricHamiltonian, loop: ParameterLoop, level: int,
             steps: int | None = None, *, method: str = "closed_form", pivot=None,
             cond_tol: float = DEFAULT_COND_TOL, gap_tol: float = DEFAULT_GAP_TOL,
             unitarity_tol: float = 1e-10, keep_connections: bool = False) -> NonAbelianHolonomy:
    """Path-ordered holonomy of a (possibly degenerate) level around ``loop``."""
    if steps is not None:
        loop = loop.with_steps(steps)
    if loop.steps < MIN_STEPS:
        raise ValueError(f"loop needs at least {MIN_STEPS} steps")
    A, transitions, changes = connection_path(model, loop, level, method=method, pivot=pivot,
                                              cond_tol=cond_tol, gap_tol=gap_tol)
    U = ordered_exponential(A, transitions)
    err = unitarity_error(U)
    if err > unitarity_tol:
        raise InvariantViolation(f"holonomy not unitary (error {err:.3e})")
    return NonAbelianHolonomy(U, level, loop.steps, method, tuple(changes),
                              A if keep_connections else None)


def hermitian_log_unitary(W: np.ndarray) -> np.ndarray:
    """Hermitian ``K`` with ``exp(iK) = W`` and spectrum in ``(-pi, pi]``."""
    T, Q = schur(W, output="complex")
    ang = np.angle(np.diag(T))
    return (Q * ang) @ Q.conj().T


def gauge_transform(A: np.ndarray, V: np.ndarray, closure_tol: float = 1e-10) -> np.ndarray:
    """Transform a connection path under the frame change ``c -> V(lambda) c``.

    ``A`` has shape ``(N, d, d)`` (one sample per step) and ``V`` shape
    ``(N + 1, d, d)`` sampled at the step endpoints with ``V[N] == V[0]``.
    Each step is transformed exactly, ``exp(iA'_k) = V_{k+1} exp(iA_k) V_k^dagger``,
    which is the discrete form of ``A' = V A V^dagger - i (dV) V^dagger``;
    the holonomy therefore conjugates as ``U' = V(0) U V(0)^dagger``.
    """
    A = np.asarray(A)
    V = np.asarray(V)
    if V.shape[0] != A.shape[0] + 1:
        raise ValueError("gauge must be sampled at N + 1 endpoints")
    if np.max(np.abs(V[-1] - V[0])) > closure_tol:
        raise NonClosedGauge("gauge transformation is not single valued on the loop")
    steps = expm_hermitian(A, scale=1j)
    W = V[1:] @ steps @ dagger(V[:-1])
    return np.stack([hermitian_log_unitary(w) for w in W])
