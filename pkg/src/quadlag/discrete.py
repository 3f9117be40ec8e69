"""Discrete optimality systems on a grid: row assembly, block-companion
form, staged shooting for two-point data, free iteration, and the decoupled
oscillator path.

Conventions.  The optimality row tested at time t couples the samples
x(t + k*eps) for |k| <= 2N, with window truncation near the interval ends:
a sample is kept only if it lands inside [a, b].  Rows are written so that
the most advanced retained sample carries the leading coefficient; interior
rows (full support) rearrange into the length-4N vector recurrence

    x_{n+2N} = B_1 x_{n+2N-1} + ... + B_{4N} x_{n-2N} + J5.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    AlignmentError,
    InvalidArgumentError,
    NumericFailureError,
    ResonantDiscreteProblemError,
    SingularCoefficientError,
    UnsupportedConfigurationError,
)
from .kernels import iterate_recurrence
from .model import BoxOperator, Grid, GridFunction, QuadraticLagrangian, reverse_box

_WINDOW_TOL = 1e-9
_SPLIT_TOL = 1e-13
_SINGULAR_REL = 1e-12
_RESONANCE_TOL = 1e-10


def _solve(mat, rhs, what):
    try:
        return np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularCoefficientError(f"singular matrix while solving for {what}") from exc


# ---------------------------------------------------------------------------
# safety interval


@dataclass(frozen=True)
class SafetyInterval:
    """Grid-index range [lo, hi] on which the interior recurrence vector is
    fully inside the interval.  lo > hi encodes the empty range."""

    lo: int
    hi: int

    @property
    def empty(self) -> bool:
        return self.lo > self.hi

    def __len__(self) -> int:
        return 0 if self.empty else self.hi - self.lo + 1

    def contains(self, n: int) -> bool:
        return (not self.empty) and self.lo <= n <= self.hi

    def indices(self):
        return range(self.lo, self.hi + 1) if not self.empty else range(0)


def safety_interval(t0: float, epsilon: float, a: float, b: float, N: int) -> SafetyInterval:
    """Indices n (grid t0 + n*eps) such that all of t0+(n-j)*eps for
    j = 0..4N-1 lie in [a, b].  Empty ranges are a valid result."""
    if epsilon <= 0:
        raise InvalidArgumentError("epsilon must be positive")
    if N < 1:
        raise InvalidArgumentError("N must be >= 1")
    if not b > a:
        raise InvalidArgumentError("need b > a")
    tol = _WINDOW_TOL
    lo = int(np.ceil((a - t0) / epsilon - tol)) + (4 * N - 1)
    hi = int(np.floor((b - t0) / epsilon + tol))
    return SafetyInterval(lo, hi)


# ---------------------------------------------------------------------------
# row assembly


def optimality_row(L: QuadraticLagrangian, op: BoxOperator, t: float):
    """Coefficients of the window-truncated optimality row tested at t.

    Returns (coeff, const) where coeff maps sample offset k (meaning the
    sample x(t + k*eps)) to a d x d matrix and const is the d-vector of
    inhomogeneous terms.  Offsets whose coefficient vanished entirely by
    truncation are absent.
    """
    N, eps = op.N, op.epsilon
    a, b = op.interval
    tol = _WINDOW_TOL * eps

    def inside(u):
        return a - tol <= u <= b + tol

    if not inside(t):
        raise InvalidArgumentError(f"row time {t} outside [{a}, {b}]")
    d = L.dim
    coeff = {}
    const = np.zeros(d, dtype=complex)

    def add(k, mat):
        if k in coeff:
            coeff[k] = coeff[k] + mat
        else:
            coeff[k] = np.array(mat, dtype=complex)

    for i in range(-N, N + 1):
        ci = op.coeff(i)
        u = t - i * eps
        if not inside(u):
            continue
        Pu, _, J1u, J2u, _, _ = L.at(u)
        for j in range(-N, N + 1):
            if inside(u + j * eps):
                add(j - i, ci * op.coeff(j) * Pu)
        # mixed term, adjoint side
        add(-i, -ci * J1u)
        const += ci * J2u
    _, Qt, J1t, _, J3t, _ = L.at(t)
    for j in range(-N, N + 1):
        if inside(t + j * eps):
            add(j, op.coeff(j) * J1t)
    add(0, Qt)
    const += J3t
    return coeff, const


def residual_del(L: QuadraticLagrangian, op: BoxOperator, f, t: float):
    """Value of the optimality row at t against grid data f (a GridFunction
    whose grid is aligned with op, or a callable)."""
    coeff, const = optimality_row(L, op, t)
    out = const.copy()
    for k, mat in coeff.items():
        out += mat @ np.asarray(f(t + k * op.epsilon), dtype=complex).reshape(-1)
    return out


# ---------------------------------------------------------------------------
# interior blocks and block-companion form


def _stationary_row_data(L: QuadraticLagrangian, op: BoxOperator):
    """Interior-row coefficient per offset for a stationary Lagrangian,
    without window truncation.  Returns (coeffs dict k->matrix, const)."""
    N, eps = op.N, op.epsilon
    P, Q, J1, J2, J3, _ = L.at(op.a)
    d = L.dim
    c = [op.coeff(i) for i in range(-N, N + 1)]

    def cw(i):
        return c[i + N] if -N <= i <= N else 0.0

    coeff = {}
    for k in range(-2 * N, 2 * N + 1):
        gamma = sum(cw(i) * cw(i + k) for i in range(-N, N + 1))
        mat = gamma * P
        if abs(k) <= N:
            mat = mat + (cw(k) - cw(-k)) * J1
        if k == 0:
            mat = mat + Q
        coeff[k] = mat
    # sum_i c_i = 0 kills the J2 term on interior rows
    const = np.array(J3, dtype=complex)
    return coeff, const


def interior_blocks(L: QuadraticLagrangian, op: BoxOperator, n: int = 0):
    """Blocks B_1..B_4N of the interior vector recurrence at grid node n
    (time op.a + n*eps).  For a stationary Lagrangian the node is irrelevant.

    Returns (blocks, forcing) with blocks a list of d x d arrays and forcing
    the constant J5 term of the rearranged row.
    """
    N, eps = op.N, op.epsilon
    if L.stationary:
        coeff, const = _stationary_row_data(L, op)
    else:
        t = op.a + n * eps
        if not (op.a + 2 * N * eps - _WINDOW_TOL * eps <= t <= op.b - 2 * N * eps + _WINDOW_TOL * eps):
            raise InvalidArgumentError(
                f"node {n} has no fully supported interior row on [{op.a}, {op.b}]")
        coeff, const = optimality_row(L, op, t)
        if len(coeff) != 4 * N + 1:
            raise InvalidArgumentError(f"row at node {n} is truncated; not interior")
    lead = coeff[2 * N]
    blocks = [-_solve(lead, coeff[2 * N - m], "interior blocks") for m in range(1, 4 * N + 1)]
    forcing = -_solve(lead, const, "interior forcing")
    return blocks, forcing


@dataclass(frozen=True)
class CompanionSystem:
    """First-order form of the interior recurrence: v_{n+1} = A v_n + b with
    v_n stacking (x_{n+2N}, ..., x_{n-2N+1}) top-down."""

    n: int
    blocks: tuple
    A: np.ndarray
    b: np.ndarray
    J5: np.ndarray
    J6: Optional[np.ndarray]
    L: QuadraticLagrangian = field(repr=False, compare=False, default=None)
    op: BoxOperator = field(repr=False, compare=False, default=None)

    @property
    def dim(self) -> int:
        return self.blocks[0].shape[0]

    @property
    def order(self) -> int:
        return len(self.blocks)


def companion(L: QuadraticLagrangian, op: BoxOperator, n: int = 0) -> CompanionSystem:
    """Block-companion matrix of the interior recurrence at node n, plus the
    affine data: forcing J5 and, when 1 is not an eigenvalue of A, the fixed
    point J6 of the full affine map."""
    blocks, J5 = interior_blocks(L, op, n)
    m = len(blocks)
    d = blocks[0].shape[0]
    A = np.zeros((m * d, m * d), dtype=complex)
    for i, B in enumerate(blocks):
        A[:d, i * d:(i + 1) * d] = B
    for i in range(1, m):
        A[i * d:(i + 1) * d, (i - 1) * d:i * d] = np.eye(d)
    b = np.zeros(m * d, dtype=complex)
    b[:d] = J5
    S = np.eye(d, dtype=complex) - sum(blocks)
    J6 = None
    # 1 in Sp(A) iff I - sum(B_i) is singular
    if abs(np.linalg.det(S)) > 1e-13 * max(1.0, np.linalg.norm(S, np.inf) ** d):
        J6 = np.linalg.solve(S, J5)
    return CompanionSystem(n=n, blocks=tuple(blocks), A=A, b=b, J5=J5, J6=J6, L=L, op=op)


# ---------------------------------------------------------------------------
# split structure detection


def is_split(L: QuadraticLagrangian, op: BoxOperator) -> bool:
    """True when the optimality rows decouple into independent even/odd
    sub-chains of stride 2*eps: center coefficient zero, no mixed term, and
    stationary coefficients."""
    if op.N != 1 or not L.stationary:
        return False
    scale = max(abs(op.coeff(i)) for i in (-1, 0, 1))
    if abs(op.coeff(0)) > _SPLIT_TOL * scale:
        return False
    P, Q, J1, *_ = L.at(op.a)
    j1scale = max(np.abs(P).max(), np.abs(Q).max(), 1.0)
    return np.abs(J1).max() <= _SPLIT_TOL * j1scale


def _chain_eig(L: QuadraticLagrangian, op: BoxOperator):
    """Eigen-structure of the half-step transfer of a split operator.

    The decoupled sub-chain recurrence is u_{j+1} = 2C u_j - u_{j-1} + J5
    with C = B_2 / 2.  Returns (C, V, Vinv, theta) where C = V diag(cos
    theta) V^{-1}; theta may be complex.
    """
    blocks, _ = interior_blocks(L, op)
    C = blocks[1] / 2.0
    w, V = np.linalg.eig(C)
    if np.linalg.cond(V) > 1e10:
        raise NumericFailureError("half-step transfer is too far from diagonalizable")
    theta = np.arccos(w.astype(complex))
    return C, V, np.linalg.inv(V), theta


def _sin_ratio(theta, K):
    """sin(K*theta)/sin(theta) per mode (the degree K-1 Chebyshev U value)."""
    out = np.empty(len(theta), dtype=complex)
    for i, th in enumerate(theta):
        s = np.sin(th)
        if abs(s) < 1e-300:
            out[i] = complex(K)  # limit theta -> 0
        else:
            out[i] = np.sin(K * th) / s
    return out


# ---------------------------------------------------------------------------
# staged shooting


def _leading_solve(coeff, const, known, lead_offset, what):
    """Solve a row for its sample at lead_offset given the other samples.
    known maps offset -> value."""
    rhs = -const.astype(complex)
    for k, mat in coeff.items():
        if k == lead_offset:
            continue
        rhs = rhs - mat @ known[k]
    return _solve(coeff[lead_offset], rhs, what)


def _staged_sweep(L, op, a, b, M, d_a, want_orbit=True):
    """Affine forward sweep of the generation rows n = 0..M-2.

    Tracks x_k = S_k d_s + u_k with d_s the free value at node 1.  Returns
    (S, u) as (M+1, d, d) and (M+1, d) arrays when want_orbit, else just the
    final (S_M, u_M).  Stage matrices for the named boundary stages are
    returned alongside.
    """
    eps = op.epsilon
    d = L.dim
    Sx = np.zeros((M + 1, d, d), dtype=complex)
    ux = np.zeros((M + 1, d), dtype=complex)
    ux[0] = d_a
    Sx[1] = np.eye(d)

    def aug(k):
        return np.concatenate([Sx[k], ux[k][:, None]], axis=1)

    def put(k, X):
        Sx[k] = X[:, :d]
        ux[k] = X[:, d]

    stages = {}

    # row at node 0: supported offsets {0,1,2}
    coeff0, const0 = optimality_row(L, op, a)
    G = {k: -_solve(coeff0[2], coeff0[k], "stage 1") for k in (0, 1)}
    g = -_solve(coeff0[2], const0, "stage 1")
    put(2, G[1] @ aug(1) + G[0] @ aug(0) + np.concatenate([np.zeros((d, d)), g[:, None]], axis=1))
    I, Z = np.eye(d), np.zeros((d, d))
    stages["A1"] = np.block([[G[1], G[0]], [I, Z], [Z, I]])

    # row at node 1: supported offsets {-1,0,1,2}
    coeff1, const1 = optimality_row(L, op, a + eps)
    H = {k: -_solve(coeff1[2], coeff1[k], "stage 2") for k in (-1, 0, 1)}
    h = -_solve(coeff1[2], const1, "stage 2")
    put(3, H[1] @ aug(2) + H[0] @ aug(1) + H[-1] @ aug(0)
        + np.concatenate([np.zeros((d, d)), h[:, None]], axis=1))
    stages["A2"] = np.block([[H[1], H[0], H[-1]], [I, Z, Z], [Z, I, Z], [Z, Z, I]])

    # interior rows n = 2..M-2 generate x_4..x_M
    steps = M - 3
    if L.stationary:
        blocks, J5 = interior_blocks(L, op)
        seeds = np.stack([aug(k) for k in range(4)])
        forcing = np.concatenate([np.zeros((d, d)), J5[:, None]], axis=1)
        orbit = iterate_recurrence(np.stack(blocks), seeds, forcing, steps)
        for j in range(steps):
            put(4 + j, orbit[j])
        bl_a = bl_b = bl_c = blocks
    else:
        for n in range(2, M - 1):
            blocks, J5 = interior_blocks(L, op, n)
            X = sum(blocks[i] @ aug(n + 1 - i) for i in range(4))
            X = X + np.concatenate([np.zeros((d, d)), J5[:, None]], axis=1)
            put(n + 2, X)
        bl_a, _ = interior_blocks(L, op, M - 4)
        bl_b, _ = interior_blocks(L, op, M - 3)
        bl_c, _ = interior_blocks(L, op, M - 2)
    stages["A_Mm3"] = _full_stage(bl_a)
    stages["A_Mm2"] = _full_stage(bl_b)
    stages["A_Mm1"] = np.concatenate(bl_c, axis=1)
    if want_orbit:
        return Sx, ux, stages
    return Sx[M], ux[M], stages


def _full_stage(blocks):
    d = blocks[0].shape[0]
    top = np.concatenate(blocks, axis=1)
    body = np.zeros((3 * d, 4 * d), dtype=complex)
    for i in range(3):
        body[i * d:(i + 1) * d, i * d:(i + 1) * d] = np.eye(d)
    return np.concatenate([top, body], axis=0)


@dataclass(frozen=True)
class ShootingResult:
    """Result of a two-point solve: the grid solution, the recovered free
    value d_s at node 1, the shooting determinant, and the rectangular
    boundary stage matrices (keys A1, A2, A_Mm3, A_Mm2, A_Mm1)."""

    solution: GridFunction
    d_s: np.ndarray
    shoot_det: complex
    stage_matrices: dict
    method: str = "staged"
    split_data: Optional[dict] = None


def _validate_two_point(L, op, a, b, M):
    if op.N != 1:
        raise UnsupportedConfigurationError("two-point solves support window size N = 1 only")
    if not isinstance(M, (int, np.integer)) or M < 7:
        raise InvalidArgumentError("M must be an integer >= 7")
    eps = op.epsilon
    if abs((b - a) - M * eps) > _WINDOW_TOL * eps * M:
        raise InvalidArgumentError("grid does not fit: need b - a = M * epsilon")
    ia, ib = op.interval
    if abs(ia - a) > _WINDOW_TOL * eps or abs(ib - b) > _WINDOW_TOL * eps:
        raise InvalidArgumentError("operator interval must match [a, b]")


def shooting_determinant(L: QuadraticLagrangian, op: BoxOperator, a: float, b: float, M: int):
    """Determinant of the sensitivity of the final state x_M to the free
    value d_s under the forward generation sweep.

    Split operators are dispatched to the decoupled even sub-chain: for even
    M the determinant of the chain transfer polynomial, for odd M exactly
    zero (the sweep closes on the even chain and never consults d_s)."""
    _validate_two_point(L, op, a, b, M)
    if is_split(L, op):
        if M % 2 != 0:
            return 0.0 + 0.0j
        _, _, _, theta = _chain_eig(L, op)
        return complex(np.prod(_sin_ratio(theta, M // 2)))
    d = L.dim
    SM, _, _ = _staged_sweep(L, op, a, b, M, np.zeros(L.dim), want_orbit=False)
    return complex(np.linalg.det(SM))


def _det_scale(S):
    d = S.shape[0]
    return max(1.0, float(np.abs(S).max())) ** d


def solve_dirichlet(L: QuadraticLagrangian, op: BoxOperator, d_a, d_b,
                    a: float, b: float, M: int) -> ShootingResult:
    """Solve the discrete optimality system on the M+1 point grid over [a, b]
    with prescribed end values.

    Non-split operators use the staged forward sweep: rows n = 0..M-2
    generate the orbit affinely in the free value d_s, and d_s is fixed by
    matching x_M = d_b.  Split operators decouple into even/odd sub-chains
    solved in closed form; odd M leaves the system rank-deficient and raises
    ResonantDiscreteProblemError.
    """
    _validate_two_point(L, op, a, b, M)
    d = L.dim
    d_a = np.asarray(d_a, dtype=complex).reshape(-1)
    d_b = np.asarray(d_b, dtype=complex).reshape(-1)
    if d_a.shape != (d,) or d_b.shape != (d,):
        raise InvalidArgumentError(f"boundary data must be vectors of length {d}")
    if is_split(L, op):
        return _solve_split(L, op, d_a, d_b, a, b, M)

    Sx, ux, stages = _staged_sweep(L, op, a, b, M, d_a)
    SM = Sx[M]
    det = complex(np.linalg.det(SM))
    if abs(det) <= _SINGULAR_REL * _det_scale(SM):
        raise ResonantDiscreteProblemError(
            "shooting matrix is singular: end data does not determine the orbit",
            margin=abs(det))
    d_s = np.linalg.solve(SM, d_b - ux[M])
    vals = Sx @ d_s + ux
    vals[0] = d_a
    vals[M] = d_b
    grid = Grid.regular(a, b, M)
    sol = GridFunction(grid, vals, boundary=(d_a, d_b))
    return ShootingResult(solution=sol, d_s=d_s, shoot_det=det,
                          stage_matrices=stages, method="staged")


def _solve_split(L, op, d_a, d_b, a, b, M):
    if M % 2 != 0:
        raise ResonantDiscreteProblemError(
            "split operator with odd M: the sub-chains close without consulting "
            "the free value, leaving the two-point system rank-deficient",
            margin=0.0)
    d = L.dim
    eps = op.epsilon
    K = M // 2
    C, V, Vinv, theta = _chain_eig(L, op)
    sinK = np.sin(K * theta)
    margin = float(np.abs(np.prod(sinK)))
    if margin <= _RESONANCE_TOL:
        raise ResonantDiscreteProblemError(
            "resonant sub-chain: sin(K * theta) vanishes for some mode", margin=margin)
    system = companion(L, op)
    if system.J6 is None:
        raise ResonantDiscreteProblemError(
            "affine fixed point does not exist: 1 is an eigenvalue of the companion matrix",
            margin=0.0)
    J6 = system.J6
    # even sub-chain x_{2j}: end data sits on it directly
    w0 = Vinv @ (d_a - J6)
    wK = Vinv @ (d_b - J6)
    jj = np.arange(K + 1)
    sinKth = sinK
    # u_j = [sin((K-j)th) w0 + sin(j th) wK] / sin(K th) per mode
    num = (np.sin(np.outer(K - jj, theta)) * w0[None, :]
           + np.sin(np.outer(jj, theta)) * wK[None, :])
    even_modes = num / sinKth[None, :]
    even_vals = even_modes @ V.T + J6[None, :]
    # modal amplitudes of the even chain in the original basis; the pair
    # satisfies gt1 + gt2 = w0 at the left end
    gt1_modes = (np.exp(-1j * K * theta) * w0 - wK) * (0.5j / sinKth)
    gt2_modes = w0 - gt1_modes
    gt1 = V @ gt1_modes
    gt2 = V @ gt2_modes
    # odd sub-chain x_{2j+1}: closed square system from the two edge rows
    j6m = Vinv @ J6
    h1 = np.zeros(len(theta), dtype=complex)
    h2 = np.zeros(len(theta), dtype=complex)
    if np.abs(j6m).max() > 0:
        for i, th in enumerate(theta):
            A2 = np.array([[-np.exp(-1j * th), -np.exp(1j * th)],
                           [-np.exp(1j * K * th), -np.exp(-1j * K * th)]], dtype=complex)
            det2 = np.linalg.det(A2)
            if abs(det2) <= _RESONANCE_TOL:
                raise ResonantDiscreteProblemError(
                    "resonant odd sub-chain edge system", margin=abs(det2))
            h1[i], h2[i] = np.linalg.solve(A2, np.array([j6m[i], j6m[i]]))
    jo = np.arange(K)
    odd_modes = (np.exp(1j * np.outer(jo, theta)) * h1[None, :]
                 + np.exp(-1j * np.outer(jo, theta)) * h2[None, :])
    odd_vals = odd_modes @ V.T + J6[None, :]

    vals = np.zeros((M + 1, d), dtype=complex)
    vals[0::2] = even_vals
    vals[1::2] = odd_vals
    vals[0] = d_a
    vals[M] = d_b
    grid = Grid.regular(a, b, M)
    sol = GridFunction(grid, vals, boundary=(d_a, d_b))
    det = complex(np.prod(_sin_ratio(theta, K)))
    split_data = {
        "theta_eigs": theta,
        "modal_basis": V,
        "gt1": gt1,
        "gt2": gt2,
        "J6": J6,
        "margin": margin,
    }
    return ShootingResult(solution=sol, d_s=vals[1].copy(), shoot_det=det,
                          stage_matrices={}, method="split", split_data=split_data)


# ---------------------------------------------------------------------------
# oscillator path with explicit mode data


@dataclass(frozen=True)
class SplitOscillatorSolution:
    """Two-point solution of the decoupled oscillator path together with its
    phase matrix and the modal amplitude pairs.

    gt1/gt2 amplitudes reproduce the even sub-chain through the end data
    itself; g1/g2 are the variant fitted at the first interior chain nodes
    against the pulled-back data d_a_prime, d_b_prime."""

    solution: GridFunction
    Theta: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    gt1: np.ndarray
    gt2: np.ndarray
    d_a_prime: np.ndarray
    d_b_prime: np.ndarray
    shoot_det: complex


def split_solve_oscillator(L: QuadraticLagrangian, r: float, d_a, d_b,
                           a: float, b: float, M: int) -> SplitOscillatorSolution:
    """Oscillator two-point solve with the symmetric (r, r) operator.

    Requires a stationary Lagrangian with no mixed or linear terms, even M,
    and eps * max|omega| < 2|r| so that the phase matrix Theta is defined by
    cos(Theta) = I - (eps/r)^2 Omega^2 / 2 with real spectrum.
    """
    if not L.stationary:
        raise UnsupportedConfigurationError("oscillator path requires a stationary Lagrangian")
    P, Q, J1, J2, J3, _ = L.at(a)
    scale = max(np.abs(P).max(), np.abs(Q).max(), 1.0)
    if max(np.abs(J1).max(), np.abs(J2).max(), np.abs(J3).max()) > 1e-13 * scale:
        raise UnsupportedConfigurationError("oscillator path requires J1 = J2 = J3 = 0")
    if M % 2 != 0 or M < 8:
        raise InvalidArgumentError("M must be even and >= 8")
    r = complex(r)
    if abs(r.imag) > 0:
        raise InvalidArgumentError("r must be real for the oscillator path")
    r = r.real
    eps = (b - a) / M
    op = BoxOperator(N=1, epsilon=eps,
                     coeffs=np.array([-r / eps, 0.0, r / eps], dtype=complex),
                     interval=(a, b))
    d = L.dim
    d_a = np.asarray(d_a, dtype=complex).reshape(-1)
    d_b = np.asarray(d_b, dtype=complex).reshape(-1)
    Om2 = -_solve(P, Q, "Omega^2")
    w2, Vo = np.linalg.eig(Om2)
    if np.abs(w2.imag).max() > 1e-9 * max(1.0, np.abs(w2).max()) or w2.real.min() <= 0:
        raise UnsupportedConfigurationError("need positive real squared frequencies")
    omega = np.sqrt(w2.real)
    if eps * omega.max() >= 2 * abs(r):
        raise InvalidArgumentError(
            "phase matrix undefined: need eps * max|omega| < 2|r|")

    res = solve_dirichlet(L, op, d_a, d_b, a, b, M)
    sd = res.split_data
    theta = sd["theta_eigs"]
    V = sd["modal_basis"]
    Vinv = np.linalg.inv(V)
    Theta = (V * theta[None, :].astype(complex)) @ Vinv
    K = M // 2

    # variant amplitudes fitted at chain nodes 1 and K-1 against data pulled
    # back through the edge rows: d' = (I - (eps/r)^2 Omega^2) d
    D = np.eye(d) - (eps / r) ** 2 * Om2
    d_a_p = D @ d_a
    d_b_p = D @ d_b
    al = Vinv @ d_a_p
    be = Vinv @ d_b_p
    g1m = np.zeros(len(theta), dtype=complex)
    g2m = np.zeros(len(theta), dtype=complex)
    for i, th in enumerate(theta):
        den = np.sin((K - 2) * th)
        if abs(den) <= _RESONANCE_TOL:
            raise ResonantDiscreteProblemError(
                "edge-fitted amplitudes undefined: sin((K-2) theta) vanishes",
                margin=abs(den))
        M2 = np.array([[np.exp(1j * th), np.exp(-1j * th)],
                       [np.exp(1j * (K - 1) * th), np.exp(-1j * (K - 1) * th)]])
        g1m[i], g2m[i] = np.linalg.solve(M2, np.array([al[i], be[i]]))
    return SplitOscillatorSolution(
        solution=res.solution, Theta=Theta,
        g1=V @ g1m, g2=V @ g2m, gt1=sd["gt1"], gt2=sd["gt2"],
        d_a_prime=d_a_p, d_b_prime=d_b_p, shoot_det=res.shoot_det)


# ---------------------------------------------------------------------------
# free iteration


def solve_free(L: QuadraticLagrangian, op: BoxOperator, grid: Grid, seeds,
               d_a=None, d_b=None) -> GridFunction:
    """Generate the orbit of the optimality rows on a grid that misses one or
    both interval endpoints.

    With the grid hitting a only, pass d_a and one seed (the value at the
    first node past a); with neither endpoint on the grid, pass two seeds for
    the first two nodes.  The mirrored case (grid hits b only) runs the sweep
    backward from d_b and one seed.
    """
    if op.N != 1:
        raise UnsupportedConfigurationError("free iteration supports N = 1 only")
    eps = op.epsilon
    a, b = op.interval
    if abs(grid.epsilon - eps) > _WINDOW_TOL * eps:
        raise InvalidArgumentError("grid step must match the operator step")
    if grid.a != a or grid.b != b:
        raise InvalidArgumentError("grid interval must match the operator interval")
    hits_a, hits_b = grid.hits_a, grid.hits_b
    if hits_a and hits_b:
        raise InvalidArgumentError(
            "grid hits both endpoints: use solve_dirichlet for two-point data")
    seeds = [np.asarray(s, dtype=complex).reshape(-1) for s in np.atleast_2d(seeds)]
    d = L.dim
    n_nodes = len(grid)
    times = grid.times
    vals = np.zeros((n_nodes, d), dtype=complex)

    if hits_b and not hits_a:
        if d_b is None or len(seeds) != 1:
            raise InvalidArgumentError("grid hits b only: pass d_b and one seed")
        vals[n_nodes - 1] = np.asarray(d_b, dtype=complex).reshape(-1)
        vals[n_nodes - 2] = seeds[0]
        known = n_nodes - 2
        for m in range(n_nodes - 1, -1, -1):
            tgt = m - 2
            if tgt < 0:
                break
            coeff, const = optimality_row(L, op, times[m])
            if -2 not in coeff:
                raise InvalidArgumentError("row lost its trailing sample; grid too short")
            knownv = {k: vals[m + k] for k in coeff if k != -2}
            vals[tgt] = _leading_solve(coeff, const, knownv, -2, "free sweep")
        return GridFunction(grid, vals)

    if hits_a:
        if d_a is None or len(seeds) != 1:
            raise InvalidArgumentError("grid hits a only: pass d_a and one seed")
        vals[0] = np.asarray(d_a, dtype=complex).reshape(-1)
        vals[1] = seeds[0]
    else:
        if len(seeds) != 2:
            raise InvalidArgumentError("grid misses both endpoints: pass two seeds")
        vals[0] = seeds[0]
        vals[1] = seeds[1]
    for m in range(n_nodes):
        tgt = m + 2
        if tgt >= n_nodes:
            break
        coeff, const = optimality_row(L, op, times[m])
        if 2 not in coeff:
            raise InvalidArgumentError("row lost its leading sample; grid too short")
        knownv = {k: vals[m + k] for k in coeff if k != 2}
        vals[tgt] = _leading_solve(coeff, const, knownv, 2, "free sweep")
    return GridFunction(grid, vals)


def iterate_interior(L: QuadraticLagrangian, op: BoxOperator, start_values,
                     n_start: int, count: int) -> np.ndarray:
    """Iterate the pure interior recurrence forward, ignoring window
    truncation.  start_values holds x at nodes n_start-4N+1 .. n_start
    (oldest first, shape (4N, d)); returns count further values."""
    start = np.asarray(start_values, dtype=complex)
    if start.ndim != 2 or start.shape[0] != 4 * op.N:
        raise InvalidArgumentError(f"need {4 * op.N} consecutive start values")
    if count <= 0:
        return np.zeros((0, start.shape[1]), dtype=complex)
    if L.stationary:
        blocks, J5 = interior_blocks(L, op)
        orbit = iterate_recurrence(np.stack(blocks),
                                   start[:, :, None], J5[:, None], count)
        return orbit[:, :, 0]
    d = start.shape[1]
    hist = list(start)
    out = np.zeros((count, d), dtype=complex)
    for j in range(count):
        n_row = n_start + j + 1 - 2 * op.N  # row generating node n_start+j+1
        blocks, J5 = interior_blocks(L, op, n_row)
        x = J5.copy()
        for i in range(4 * op.N):
            x = x + blocks[i] @ hist[-1 - i]
        out[j] = x
        hist.pop(0)
        hist.append(x)
    return out


def box_one(op: BoxOperator, t: float) -> complex:
    """Value of the reversed operator applied to the constant 1 at t."""
    rev = reverse_box(op)
    return complex(sum((rev.coeff(i) for i, _ in rev.sample_offsets(t)), 0.0))
