"""Closed-form solution of the continuous two-point problem.

For a stationary quadratic Lagrangian the optimality ODE is linear with
constant coefficients,

    -P z'' + 2 J1 z' + Q z + J3 = 0,

and the two-point solution is a pair of matrix exponentials

    z(t) = exp(i (t-a) Omega_1) z_1 + exp(i (t-a) Omega_2) z_2 - Q^{-1} J3,

where the Omega_k solve the quadratic matrix equation
P Omega^2 + 2i J1 Omega + Q = 0.  The module also evaluates the boundary
interpolation kernels F and Z and the rescaled limit profile z'.
"""

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations

import numpy as np

from .errors import (
    InvalidArgumentError,
    NotDiagonalizableError,
    ResonantContinuousProblemError,
    SingularCoefficientError,
    SolventExtractionError,
    UnsupportedConfigurationError,
)
from .linalg import eig, matfun, principal_sqrt
from .model import QuadraticLagrangian

_RES_TOL = 1e-10


def _as_square(A, name):
    M = np.atleast_2d(np.asarray(A, dtype=complex))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidArgumentError(f"{name} must be square")
    return M


def solvent_residual(P, Q, J1, Omega) -> float:
    """Relative residual of P Omega^2 + 2i J1 Omega + Q = 0."""
    num = np.linalg.norm(P @ Omega @ Omega + 2j * J1 @ Omega + Q)
    den = (np.linalg.norm(P) * max(np.linalg.norm(Omega), 1.0) ** 2
           + np.linalg.norm(Q) + 1.0)
    return float(num / den)


def solve_omega(P, Q, J1=None):
    """Both solvents of P Omega^2 + 2i J1 Omega + Q = 0.

    With J1 = 0 these are +/- the principal square root of -P^{-1}Q.  The
    general case linearizes to a 2d x 2d eigenproblem; eigenpairs are split
    into two groups of d (sorted halves first, exhaustive partition search
    for d <= 3 as fallback) and each group's eigenvector top blocks U give
    the solvent U diag(mu) U^{-1}.
    """
    P = _as_square(P, "P")
    Q = _as_square(Q, "Q")
    d = P.shape[0]
    J1 = np.zeros((d, d), dtype=complex) if J1 is None else _as_square(J1, "J1")
    try:
        Pinv_Q = np.linalg.solve(P, Q)
    except np.linalg.LinAlgError as exc:
        raise SingularCoefficientError("P must be nonsingular") from exc

    if np.abs(J1).max() == 0.0:
        Om = principal_sqrt(-Pinv_Q, allow_negative_real=True)
        return Om, -Om

    C = np.zeros((2 * d, 2 * d), dtype=complex)
    C[:d, d:] = np.eye(d)
    C[d:, :d] = -Pinv_Q
    C[d:, d:] = -2j * np.linalg.solve(P, J1)
    dec = eig(C)
    mu, W = dec.values, dec.vectors
    if dec.cond > 1e8:
        raise NotDiagonalizableError("linearization of the solvent equation is defective")

    def extract(idx):
        U = W[:d, idx]
        if np.linalg.cond(U) > 1e8:
            return None
        Om = U @ np.diag(mu[idx]) @ np.linalg.inv(U)
        return Om

    def try_partition(idx1):
        idx1 = list(idx1)
        idx2 = [i for i in range(2 * d) if i not in idx1]
        O1, O2 = extract(idx1), extract(idx2)
        if O1 is None or O2 is None:
            return None
        r = max(solvent_residual(P, Q, J1, O1), solvent_residual(P, Q, J1, O2))
        return r, O1, O2

    # sorted halves: second half first so that the J1=0 limit puts the
    # +omega branch in Omega1
    cand = try_partition(range(d, 2 * d))
    if cand is not None and cand[0] <= 1e-9:
        return cand[1], cand[2]
    if d > 3:
        raise SolventExtractionError(
            "no solvent from sorted halves and partition search is limited to d <= 3")
    best = None
    for idx1 in combinations(range(2 * d), d):
        c = try_partition(idx1)
        if c is not None and (best is None or c[0] < best[0]):
            best = c
    if best is None or best[0] > 1e-9:
        raise SolventExtractionError("no eigenvalue partition yields a pair of solvents")
    return best[1], best[2]


def nonresonant(Omega1, Omega2, a: float, b: float) -> float:
    """Two-point solvability margin |det(exp(i(b-a)Omega2) - exp(i(b-a)Omega1))|."""
    tau = b - a
    E1 = matfun(np.asarray(Omega1, dtype=complex), lambda w: np.exp(1j * tau * w))
    E2 = matfun(np.asarray(Omega2, dtype=complex), lambda w: np.exp(1j * tau * w))
    return float(abs(np.linalg.det(E2 - E1)))


def sin_margin(Omega, a: float, b: float) -> float:
    """|det sin((b-a) Omega)|, the equivalent margin for the symmetric real
    case Omega2 = -Omega1 with J1 = 0."""
    S = matfun(np.asarray(Omega, dtype=complex), lambda w: np.sin((b - a) * w))
    return float(abs(np.linalg.det(S)))


@dataclass(frozen=True)
class ContinuousSolution:
    """Two-exponential closed form of the continuous two-point solution."""

    Omega1: np.ndarray
    Omega2: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    offset: np.ndarray
    a: float
    b: float

    @cached_property
    def _modes(self):
        out = []
        for Om, zk in ((self.Omega1, self.z1), (self.Omega2, self.z2)):
            dec = eig(np.asarray(Om, dtype=complex))
            if dec.cond > 1e8:
                raise NotDiagonalizableError("Omega is defective; cannot evaluate")
            coef = np.linalg.solve(dec.vectors, zk)
            out.append((dec.values, dec.vectors, coef))
        return out

    def __call__(self, t):
        return eval_z(self, t)

    def sample(self, ts) -> np.ndarray:
        """Values at an array of times, shape (len(ts), d)."""
        ts = np.asarray(ts, dtype=float)
        d = self.z1.shape[0]
        out = np.broadcast_to(self.offset, (len(ts), d)).copy()
        for vals, V, coef in self._modes:
            phases = np.exp(1j * np.outer(ts - self.a, vals))
            out += (phases * coef[None, :]) @ V.T
        return out

    def derivative(self, t, order: int = 1) -> np.ndarray:
        """Analytic derivative of the closed form at scalar t."""
        acc = np.zeros(self.z1.shape[0], dtype=complex)
        for vals, V, coef in self._modes:
            fac = (1j * vals) ** order * np.exp(1j * (t - self.a) * vals)
            acc += V @ (fac * coef)
        return acc


def eval_z(sol: ContinuousSolution, t) -> np.ndarray:
    """Value of the closed form at scalar time t."""
    return sol.sample(np.array([float(t)]))[0]


def solve_cel(L: QuadraticLagrangian, d_a, d_b, a: float, b: float) -> ContinuousSolution:
    """Solve the continuous two-point problem for a stationary Lagrangian."""
    if not L.stationary:
        raise UnsupportedConfigurationError("closed-form solve requires a stationary Lagrangian")
    if not b > a:
        raise InvalidArgumentError("need b > a")
    P, Q, J1, J2, J3, _ = L.at(a)
    d = L.dim
    d_a = np.asarray(d_a, dtype=complex).reshape(-1)
    d_b = np.asarray(d_b, dtype=complex).reshape(-1)
    if d_a.shape != (d,) or d_b.shape != (d,):
        raise InvalidArgumentError(f"boundary data must be vectors of length {d}")
    try:
        offset = -np.linalg.solve(Q, J3)
    except np.linalg.LinAlgError as exc:
        raise SingularCoefficientError("Q must be nonsingular for the constant term") from exc
    Om1, Om2 = solve_omega(P, Q, J1)
    tau = b - a
    E1 = matfun(Om1, lambda w: np.exp(1j * tau * w))
    E2 = matfun(Om2, lambda w: np.exp(1j * tau * w))
    margin = float(abs(np.linalg.det(E2 - E1)))
    scale = max(1.0, float(np.abs(E1).max()), float(np.abs(E2).max())) ** d
    if margin <= _RES_TOL * scale:
        raise ResonantContinuousProblemError(
            "two-point problem is resonant: exponentials collide", margin=margin)
    R = np.linalg.inv(E2 - E1)
    e1 = E1 @ (d_a - offset) - (d_b - offset)
    e2 = E2 @ (d_a - offset) - (d_b - offset)
    z1 = R @ e2
    z2 = -R @ e1
    return ContinuousSolution(Omega1=Om1, Omega2=Om2, z1=z1, z2=z2,
                              offset=offset, a=float(a), b=float(b))


def residual_cel(L: QuadraticLagrangian, sol: ContinuousSolution, t: float) -> np.ndarray:
    """Optimality ODE residual -P z'' + 2 J1 z' + Q z + J3 at t, using the
    analytic derivatives of the closed form."""
    P, Q, J1, J2, J3, _ = L.at(t)
    z = eval_z(sol, t)
    dz = sol.derivative(t, 1)
    ddz = sol.derivative(t, 2)
    return -P @ ddz + 2 * J1 @ dz + Q @ z + J3


def _mode_apply(Omega, fvals_fn, vec):
    dec = eig(np.asarray(Omega, dtype=complex))
    if dec.cond > 1e8:
        raise NotDiagonalizableError("Omega is defective")
    coef = np.linalg.solve(dec.vectors, np.asarray(vec, dtype=complex).reshape(-1))
    return dec, coef


def F_vector(tau: float, d_a, d_b, Omega) -> np.ndarray:
    """Boundary kernel F(tau) = (i/2) sin(tau Omega)^{-1} (exp(-i tau Omega) d_a - d_b)."""
    Omega = _as_square(Omega, "Omega")
    dec = eig(Omega)
    if dec.cond > 1e8:
        raise NotDiagonalizableError("Omega is defective")
    w, V = dec.values, dec.vectors
    s = np.sin(tau * w)
    if np.abs(s).min() <= _RES_TOL:
        raise SingularCoefficientError("sin(tau Omega) is singular")
    da = np.linalg.solve(V, np.asarray(d_a, dtype=complex).reshape(-1))
    db = np.linalg.solve(V, np.asarray(d_b, dtype=complex).reshape(-1))
    fhat = 0.5j * (np.exp(-1j * tau * w) * da - db) / s
    return V @ fhat


def Z_vector(tau1: float, tau2: float, d_a, d_b, Omega) -> np.ndarray:
    """Interpolation kernel sin(tau2 Omega)^{-1} [sin(tau1 Omega) d_b
    - sin((tau1 - tau2) Omega) d_a]."""
    Omega = _as_square(Omega, "Omega")
    dec = eig(Omega)
    if dec.cond > 1e8:
        raise NotDiagonalizableError("Omega is defective")
    w, V = dec.values, dec.vectors
    s2 = np.sin(tau2 * w)
    if np.abs(s2).min() <= _RES_TOL:
        raise SingularCoefficientError("sin(tau2 Omega) is singular")
    da = np.linalg.solve(V, np.asarray(d_a, dtype=complex).reshape(-1))
    db = np.linalg.solve(V, np.asarray(d_b, dtype=complex).reshape(-1))
    zhat = (np.sin(tau1 * w) * db - np.sin((tau1 - tau2) * w) * da) / s2
    return V @ zhat


def z_limit(r: float, Omega, d_a, d_b, a: float, b: float, t):
    """Rescaled limit profile z'(t) = Z((t-a)/(2r), (b-a)/(2r), d_a, d_b).

    t may be a scalar (returns a d-vector) or a 1-D array (returns (n, d)).
    Coincides with the plain two-point solution exactly when r = +/- 1/2.
    """
    r = float(r)
    if r == 0.0:
        raise InvalidArgumentError("r must be nonzero")
    Omega = _as_square(Omega, "Omega")
    dec = eig(Omega)
    if dec.cond > 1e8:
        raise NotDiagonalizableError("Omega is defective")
    w, V = dec.values, dec.vectors
    tau2 = (b - a) / (2 * r)
    s2 = np.sin(tau2 * w)
    if np.abs(s2).min() <= _RES_TOL:
        raise SingularCoefficientError("sin((b-a) Omega / (2r)) is singular")
    da = np.linalg.solve(V, np.asarray(d_a, dtype=complex).reshape(-1))
    db = np.linalg.solve(V, np.asarray(d_b, dtype=complex).reshape(-1))
    ts = np.asarray(t, dtype=float)
    scalar = ts.ndim == 0
    tau1 = (np.atleast_1d(ts) - a) / (2 * r)
    zhat = (np.sin(np.outer(tau1, w)) * db[None, :]
            - np.sin(np.outer(tau1 - tau2, w)) * da[None, :]) / s2[None, :]
    out = zhat @ V.T
    return out[0] if scalar else out


def modal_content(sol: ContinuousSolution):
    """Frequency readout of the closed form: list of (omega, amplitude)
    pairs such that z(t) = sum_j amp_j exp(i omega_j (t-a)) + offset."""
    modes = []
    for vals, V, coef in sol._modes:
        for j in range(len(vals)):
            modes.append((complex(vals[j]), V[:, j] * coef[j]))
    return modes, sol.offset.copy()
