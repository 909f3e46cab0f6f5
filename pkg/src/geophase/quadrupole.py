"""Spin-3/2 quadrupole in a uniformly rotating field.

Frames used throughout (``W = exp(-i theta J2)``, ``phi = omega1 t``)::

    lab          H(t) = exp(-i phi J3) W H0 W^+ exp(i phi J3)
    rotating     H1   = W H0 W^+ - omega1 J3                 (time independent)
    tilted       K    = W^+ H1 W = H0 - omega1 J3~,   J3~ = W^+ J3 W
    diagonal     D    = V^+ K V

With ``U = exp(-i phi J3) W V`` the connection ``i U^+ dU/dphi = V^+ J3~ V``
is constant, and the exact lab evolution is
``psi(t) = W V exp(-i omega1 t A) exp(-i D t) V^+ W^+ psi(0)``.

The two-step reduction (``U2`` then the real ``beta`` rotation ``U3``) is
kept for comparison with the closed-form block coefficients; it is only
approximate because ``U2`` leaves an antisymmetric part in the coupling block.
``V`` is the exact eigenframe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .linalg import dagger, expm_hermitian, hermiticity_error, unitarity_error
from .models import (I2, SIGMA_X, SIGMA_Y, SIGMA_Z, QuadrupoleSpec, quadrupole_h0,
                     spin32_generators, tilt_operator)

SQRT3_2 = np.sqrt(3.0) / 2.0


def _blocks(M):
    return M[:2, :2], M[:2, 2:], M[2:, :2], M[2:, 2:]


def tilted_j3(theta: float) -> np.ndarray:
    """``W^+ J3 W = cos(theta) J3 - sin(theta) J1``."""
    W = tilt_operator(theta)
    _, _, J3 = spin32_generators()
    return dagger(W) @ J3 @ W


def rotating_frame_hamiltonian(spec: QuadrupoleSpec) -> np.ndarray:
    """``H1 = W (H0 - omega1 J3~) W^+`` by exact conjugation."""
    W = tilt_operator(spec.theta)
    K = quadrupole_h0(spec.omega0) - spec.omega1 * tilted_j3(spec.theta)
    return W @ K @ dagger(W)


def tilted_hamiltonian(spec: QuadrupoleSpec) -> np.ndarray:
    """``K = W^+ H1 W``, the block form the two-step reduction works on."""
    return quadrupole_h0(spec.omega0) - spec.omega1 * tilted_j3(spec.theta)


def literal_block_hamiltonian(spec: QuadrupoleSpec) -> np.ndarray:
    """The printed block matrix, with coupling ``omega1 sqrt(3)/2`` (no ``sin theta``)."""
    w0, w1, th = spec.omega0, spec.omega1, spec.theta
    top = w0 * I2 - 1.5 * w1 * np.cos(th) * SIGMA_Z
    bot = -w0 * I2 - 0.5 * w1 * np.cos(th) * SIGMA_Z + w1 * np.sin(th) * SIGMA_X
    off = w1 * SQRT3_2 * I2
    return np.block([[top, off], [off, bot]]).astype(complex)


def erratum_check(spec: QuadrupoleSpec) -> dict:
    """Compare the exact tilted Hamiltonian with the printed block matrix."""
    K = tilted_hamiltonian(spec)
    lit = literal_block_hamiltonian(spec)
    ka, kb, _, kd = _blocks(K)
    la, lb, _, ld = _blocks(lit)
    return {
        "diagonal_blocks": float(max(np.abs(ka - la).max(), np.abs(kd - ld).max())),
        "coupling_block": float(np.abs(kb - lb).max()),
        "coupling_with_sin_theta": float(np.abs(kb - np.sin(spec.theta) * lb).max()),
    }


# --------------------------------------------------------------------------
# two-step block diagonalization
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Spin32Frame:
    alpha: float
    xi: float
    lam1: np.ndarray
    lam2: np.ndarray
    k: np.ndarray
    mu: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray

    @property
    def unitarity_residual(self) -> float:
        return float(np.abs(self.beta1 ** 2 + self.beta2 ** 2 - 1).max())

    @property
    def diagonalization_residual(self) -> float:
        b1, b2 = self.beta1, self.beta2
        return float(np.abs(self.xi * (b1 ** 2 - b2 ** 2) + (self.lam1 - self.lam2) * b1 * b2).max())

    def closed_form_betas(self):
        """``(beta1^2, beta2^2)`` from the explicit expressions in ``k``."""
        s = np.sqrt(1 + self.k ** 2)
        return 0.5 / (s * (self.k + s)), 0.5 * (1 + self.k / s)


def spin32_frame(spec: QuadrupoleSpec) -> Spin32Frame | None:
    """Frame parameters, or ``None`` at ``theta = 0`` where ``xi`` vanishes.

    Couplings below ``1e-15`` of the field scale are treated as zero.
    """
    th, w0, w1 = spec.theta, spec.omega0, spec.omega1
    xi = w1 * SQRT3_2 * np.sin(th)
    # below this the mixing is under rounding and k would overflow
    if abs(xi) <= 1e-15 * max(w0, abs(w1)):
        return None
    alpha = float(np.arctan(2 * np.tan(th)))
    s3 = np.array([1.0, -1.0])
    lam1 = w0 - 1.5 * w1 * np.cos(th) * s3
    lam2 = -w0 - 0.5 * w1 * np.cos(th) / np.cos(alpha) * s3
    k = (lam1 - lam2) / (2 * xi)
    # k + sqrt(1 + k^2) without cancellation for k << 0
    mu = np.where(k >= 0, k + np.sqrt(1 + k ** 2), 1.0 / (np.sqrt(1 + k ** 2) - k))
    beta1 = 1.0 / np.sqrt(1 + mu ** 2)
    return Spin32Frame(alpha, float(xi), lam1, lam2, k, mu, beta1, mu * beta1)


def u2_matrix(alpha: float) -> np.ndarray:
    """``diag(1, exp(i alpha sigma2 / 2))``; removes ``sigma1`` from the lower block."""
    U = np.eye(4, dtype=complex)
    U[2:, 2:] = expm_hermitian(SIGMA_Y, 0.5j * alpha)
    return U


def u3_matrix(frame: Spin32Frame) -> np.ndarray:
    b1, b2 = np.diag(frame.beta1), np.diag(frame.beta2)
    return np.block([[b1, b2], [-b2, b1]]).astype(complex)


def _aligned_eigenframe(K: np.ndarray, reference: np.ndarray):
    """Eigenvectors of ``K`` matched to the columns of ``reference``.

    Columns are assigned by maximum total overlap and phased so the overlap
    with their reference column is real and positive.
    """
    E, V = np.linalg.eigh(K)
    ov = np.abs(dagger(reference) @ V) ** 2
    rows, cols = linear_sum_assignment(-ov)
    order = cols[np.argsort(rows)]
    V, E = V[:, order], E[order]
    ph = np.diag(dagger(reference) @ V)
    V = V * np.exp(-1j * np.angle(ph))
    return E, V


@dataclass(frozen=True)
class BlockDiagonalization:
    U2: np.ndarray
    U3: np.ndarray
    frame: Spin32Frame | None
    #: exact eigenframe of K aligned to the standard basis, and its energies
    V: np.ndarray
    energies: np.ndarray
    #: largest off-diagonal element left by the two-step reduction
    two_step_residual: float
    #: largest principal angle between the two-step and exact 2-dim blocks
    subspace_angle: float


def block_diagonalize(spec: QuadrupoleSpec) -> BlockDiagonalization:
    """Two-step reduction of the tilted Hamiltonian plus the exact frame.

    At ``theta = 0`` the Hamiltonian is already diagonal and ``U2 = U3 = I``.
    """
    K = tilted_hamiltonian(spec)
    frame = spin32_frame(spec)
    if frame is None:
        U2 = U3 = np.eye(4, dtype=complex)
    else:
        U2, U3 = u2_matrix(frame.alpha), u3_matrix(frame)
    R = U2 @ U3
    Kd = dagger(R) @ K @ R
    resid = float(np.abs(Kd - np.diag(np.diag(Kd))).max())
    E, V = _aligned_eigenframe(K, np.eye(4))
    # compare the 2-dim blocks the two-step columns span with the exact ones
    E2, V2 = _aligned_eigenframe(K, R)
    angle = 0.0
    for sl in (slice(0, 2), slice(2, 4)):
        s = np.linalg.svd(dagger(R[:, sl]) @ V2[:, sl], compute_uv=False)
        angle = max(angle, float(np.arccos(np.clip(s.min(), -1, 1))))
    return BlockDiagonalization(U2, U3, frame, V, E, resid, angle)


# --------------------------------------------------------------------------
# connection
# --------------------------------------------------------------------------

def closed_form_connection(frame: Spin32Frame | None) -> tuple[np.ndarray, dict]:
    """Block connection from the printed coefficients, per unit ``dphi``."""
    if frame is None:
        coef = {"a_3/2": 0.0, "b_3/2": 1.5, "c_3/2": 0.0, "a_1/2": 0.0, "b_1/2": 0.5, "c_1/2": 0.0}
        _, _, J3 = spin32_generators()
        return J3.copy(), coef
    b11, b12 = frame.beta1
    b21, b22 = frame.beta2
    ca, sa = np.cos(frame.alpha), np.sin(frame.alpha)
    coef = {
        "a_3/2": 0.25 * (3 * b11 ** 2 - 3 * b12 ** 2 + b21 ** 2 * ca - b22 ** 2 * ca),
        "b_3/2": 0.25 * (3 * b11 ** 2 + 3 * b12 ** 2 + b21 ** 2 * ca + b22 ** 2 * ca),
        "c_3/2": -0.5 * sa * b21 * b22,
        "a_1/2": 0.25 * (3 * b21 ** 2 - 3 * b22 ** 2 + b11 ** 2 * ca - b12 ** 2 * ca),
        "b_1/2": 0.25 * (3 * b21 ** 2 + 3 * b22 ** 2 + b11 ** 2 * ca + b12 ** 2 * ca),
        "c_1/2": -0.5 * sa * b11 * b12,
    }
    coef = {k: float(v) for k, v in coef.items()}
    B1, B2 = np.diag(frame.beta1), np.diag(frame.beta2)
    Atr = 0.5 * B1 @ B2 * (3 - ca) @ SIGMA_Z + 0.5 * sa * B2 @ SIGMA_X @ B1
    A32 = coef["a_3/2"] * I2 + coef["b_3/2"] * SIGMA_Z + coef["c_3/2"] * SIGMA_X
    A12 = coef["a_1/2"] * I2 + coef["b_1/2"] * SIGMA_Z + coef["c_1/2"] * SIGMA_X
    return np.block([[A32, Atr], [Atr.T, A12]]).astype(complex), coef


def _frame_unitary(spec: QuadrupoleSpec, R: np.ndarray, phi):
    _, _, J3 = spin32_generators()
    return expm_hermitian(J3, -1j * phi) @ tilt_operator(spec.theta) @ R


def numeric_connection(spec: QuadrupoleSpec, R: np.ndarray, phi: float = 0.0):
    """``i U^+ dU/dphi`` with ``U = exp(-i phi J3) W R``.

    Only the first factor depends on ``phi``; its derivative ``-i J3 U1`` is
    applied to the assembled matrices.
    """
    _, _, J3 = spin32_generators()
    U = _frame_unitary(spec, R, phi)
    dU = -1j * J3 @ U
    return 1j * dagger(U) @ dU


@dataclass(frozen=True)
class QuadrupoleConnection:
    #: exact constant connection in the aligned eigenframe
    A: np.ndarray
    #: numeric connection in the two-step frame and the printed closed form there
    A_two_step: np.ndarray
    A_closed_form: np.ndarray
    coefficients: dict
    closed_form_mismatch: float
    time_drift: float
    hermiticity: float

    @property
    def blocks(self):
        A32, Atr, _, A12 = _blocks(self.A)
        return {"A_3/2": A32, "A_tr": Atr, "A_1/2": A12}

    @property
    def transition_norm(self) -> float:
        return float(np.linalg.norm(self.A[:2, 2:], 2))

    @property
    def c32(self) -> float:
        return float(abs(self.A[0, 1]))


def connection(spec: QuadrupoleSpec, phases=(0.0, 1.3, 4.1)) -> QuadrupoleConnection:
    """Connection computed exactly, numerically in the two-step frame, and in closed form.

    The closed-form mismatch is reported, not corrected.
    """
    bd = block_diagonalize(spec)
    R = bd.U2 @ bd.U3
    A_exact = dagger(bd.V) @ tilted_j3(spec.theta) @ bd.V
    samples = [numeric_connection(spec, R, p) for p in phases]
    drift = max(float(np.abs(s - samples[0]).max()) for s in samples)
    A2 = samples[0]
    Acf, coef = closed_form_connection(bd.frame)
    # the exact-frame connection must be the same constant at every phase
    for p in phases:
        drift = max(drift, float(np.abs(numeric_connection(spec, bd.V, p) - A_exact).max()))
    return QuadrupoleConnection(A_exact, A2, Acf, coef, float(np.abs(A2 - Acf).max()), drift,
                                hermiticity_error(A_exact))


# --------------------------------------------------------------------------
# evolution and gate
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadrupoleGate:
    U: np.ndarray
    t: float
    energies: np.ndarray
    A: np.ndarray
    #: ``exp(-i D t) exp(-i omega1 t A)``, the printed ordering
    U_printed_order: np.ndarray = field(repr=False)
    global_phase: float = 0.0

    @property
    def dynamic_phases(self) -> np.ndarray:
        return self.energies * self.t


def _pieces(spec: QuadrupoleSpec):
    bd = block_diagonalize(spec)
    A = dagger(bd.V) @ tilted_j3(spec.theta) @ bd.V
    return bd, 0.5 * (A + dagger(A))


def two_qubit_gate(spec: QuadrupoleSpec, t: float) -> QuadrupoleGate:
    """Evolution in the diagonal frame, ``exp(-i omega1 t A) exp(-i D t)``.

    The first two frame vectors (mostly ``m = +-3/2``) and the last two
    (``m = +-1/2``) are read as the two values of the first qubit.  The
    global phase, ``-mean(D) t``, is stripped and reported.
    """
    bd, A = _pieces(spec)
    g = float(np.mean(bd.energies))
    D = bd.energies - g
    hol = expm_hermitian(A, -1j * spec.omega1 * t)
    dyn = np.diag(np.exp(-1j * D * t))
    U = hol @ dyn
    err = unitarity_error(U)
    if err > 1e-10:
        raise ArithmeticError(f"gate lost unitarity ({err:.2e})")
    return QuadrupoleGate(U, float(t), bd.energies, A, dyn @ hol, -g * float(t))


def evolve(spec: QuadrupoleSpec, psi0, t: float) -> np.ndarray:
    """Lab-frame state at time ``t`` (exact, including the global phase)."""
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (4,):
        raise ValueError("psi0 must be a 4-vector")
    nrm = np.linalg.norm(psi0)
    if abs(nrm - 1) > 1e-9:
        raise ValueError("psi0 must be normalized")
    bd, A = _pieces(spec)
    frame = tilt_operator(spec.theta) @ bd.V
    c = dagger(frame) @ psi0
    c = np.exp(-1j * bd.energies * t) * c
    c = expm_hermitian(A, -1j * spec.omega1 * t) @ c
    return frame @ c


def evolution_operator(spec: QuadrupoleSpec, t: float) -> np.ndarray:
    bd, A = _pieces(spec)
    frame = tilt_operator(spec.theta) @ bd.V
    return frame @ expm_hermitian(A, -1j * spec.omega1 * t) @ np.diag(
        np.exp(-1j * bd.energies * t)) @ dagger(frame)
