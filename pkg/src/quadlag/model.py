"""Quadratic Lagrangians, delay-difference operators, grids and actions.

The Lagrangian is the quadratic form

    L(x, y, t) = 1/2 y^T P(t) y + 1/2 x^T Q(t) x + x^T J1(t) y
                 + J2(t)^T y + J3(t)^T x + J4(t),

with P, Q symmetric and J1 skew-symmetric, acting on complex d-vectors. The
time derivative is replaced by a windowed 2N+1 term delay-difference operator
on an interval [a, b]: samples falling outside the interval are dropped by
per-term window indicators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import AlignmentError, InvalidArgumentError

_SYM_TOL = 1e-12
_ALIGN_TOL = 1e-9


def _as_matrix(A, d, name):
    M = np.asarray(A, dtype=complex)
    if M.shape != (d, d):
        raise InvalidArgumentError(f"{name} must be {d}x{d}, got {M.shape}")
    return M


def _as_vector(v, d, name):
    w = np.asarray(v, dtype=complex).reshape(-1)
    if w.shape != (d,):
        raise InvalidArgumentError(f"{name} must have length {d}")
    return w


def _check_structure(P, Q, J1, where=""):
    scale_P = max(np.abs(P).max(), 1.0)
    scale_Q = max(np.abs(Q).max(), 1.0)
    scale_J = max(np.abs(J1).max(), 1.0)
    if np.abs(P - P.T).max() > _SYM_TOL * scale_P:
        raise InvalidArgumentError(f"P must be symmetric{where}")
    if np.abs(Q - Q.T).max() > _SYM_TOL * scale_Q:
        raise InvalidArgumentError(f"Q must be symmetric{where}")
    if np.abs(J1 + J1.T).max() > _SYM_TOL * scale_J:
        raise InvalidArgumentError(f"J1 must be skew-symmetric{where}")


@dataclass(frozen=True)
class QuadraticLagrangian:
    """Coefficients of the quadratic Lagrangian, constant or time-sampled.

    time_dependence, when given, maps a time t to a tuple
    (P, Q, J1, J2, J3, J4) and overrides the stored constant coefficients.
    Coefficients are sampled, never interpolated.
    """

    P: np.ndarray
    Q: np.ndarray
    J1: np.ndarray | None = None
    J2: np.ndarray | None = None
    J3: np.ndarray | None = None
    J4: complex = 0.0
    time_dependence: Callable | None = None

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=complex))
        d = P.shape[0]
        object.__setattr__(self, "P", _as_matrix(P, d, "P"))
        object.__setattr__(self, "Q", _as_matrix(np.atleast_2d(np.asarray(self.Q, dtype=complex)), d, "Q"))
        J1 = np.zeros((d, d), complex) if self.J1 is None else np.atleast_2d(np.asarray(self.J1, dtype=complex))
        object.__setattr__(self, "J1", _as_matrix(J1, d, "J1"))
        J2 = np.zeros(d, complex) if self.J2 is None else self.J2
        J3 = np.zeros(d, complex) if self.J3 is None else self.J3
        object.__setattr__(self, "J2", _as_vector(J2, d, "J2"))
        object.__setattr__(self, "J3", _as_vector(J3, d, "J3"))
        object.__setattr__(self, "J4", complex(self.J4))
        _check_structure(self.P, self.Q, self.J1)

    @property
    def dim(self) -> int:
        return self.P.shape[0]

    @property
    def stationary(self) -> bool:
        return self.time_dependence is None

    def at(self, t: float):
        """Coefficient tuple (P, Q, J1, J2, J3, J4) at time t."""
        if self.time_dependence is None:
            return self.P, self.Q, self.J1, self.J2, self.J3, self.J4
        d = self.dim
        P, Q, J1, J2, J3, J4 = self.time_dependence(t)
        P = _as_matrix(np.atleast_2d(np.asarray(P, dtype=complex)), d, "P")
        Q = _as_matrix(np.atleast_2d(np.asarray(Q, dtype=complex)), d, "Q")
        J1 = _as_matrix(np.atleast_2d(np.asarray(J1, dtype=complex)), d, "J1")
        _check_structure(P, Q, J1, where=f" at t={t}")
        return P, Q, J1, _as_vector(J2, d, "J2"), _as_vector(J3, d, "J3"), complex(J4)


@dataclass(frozen=True)
class BoxOperator:
    """Windowed 2N+1 term delay-difference operator on [a, b].

    Applied to f at time t it evaluates

        sum_i c_i f(t + sign * i * epsilon) * [sample in [a, b]],

    with i running over -N..N. orientation = -1 gives the adjoint-direction
    operator (samples mirrored, windows mirrored with them).
    """

    N: int
    epsilon: float
    coeffs: np.ndarray  # c_{-N}..c_N
    interval: tuple[float, float]
    orientation: int = +1

    def __post_init__(self):
        if self.N < 1:
            raise InvalidArgumentError("N must be a positive integer")
        if not (self.epsilon > 0):
            raise InvalidArgumentError("epsilon must be positive")
        if self.orientation not in (+1, -1):
            raise InvalidArgumentError("orientation must be +1 or -1")
        c = np.asarray(self.coeffs, dtype=complex).reshape(-1)
        if c.shape != (2 * self.N + 1,):
            raise InvalidArgumentError(
                f"need ({2 * self.N + 1}) coefficients, got {c.shape[0]}")
        object.__setattr__(self, "coeffs", c)
        a, b = self.interval
        if not (a < b):
            raise InvalidArgumentError("interval must satisfy a < b")
        object.__setattr__(self, "interval", (float(a), float(b)))

    def coeff(self, i: int) -> complex:
        """Coefficient c_i, i in -N..N."""
        return self.coeffs[i + self.N]

    @property
    def a(self) -> float:
        return self.interval[0]

    @property
    def b(self) -> float:
        return self.interval[1]

    def sample_offsets(self, t: float):
        """Pairs (i, t_i) of retained sample indices and times at t."""
        a, b = self.interval
        tol = _ALIGN_TOL * self.epsilon
        out = []
        for i in range(-self.N, self.N + 1):
            ti = t + self.orientation * i * self.epsilon
            if a - tol <= ti <= b + tol:
                out.append((i, ti))
        return out


def make_rs_box(r: complex, s: complex, epsilon: float,
                interval: tuple[float, float]) -> BoxOperator:
    """Three-term operator with c_1 = r/eps, c_0 = (s-r)/eps, c_-1 = -s/eps.

    The unique three-term shape annihilating constants away from the
    boundary (the coefficients sum to zero).
    """
    if not (epsilon > 0):
        raise InvalidArgumentError("epsilon must be positive")
    eps = float(epsilon)
    coeffs = np.array([-s / eps, (s - r) / eps, r / eps], dtype=complex)
    return BoxOperator(N=1, epsilon=eps, coeffs=coeffs, interval=interval)


def reverse_box(op: BoxOperator) -> BoxOperator:
    """The operator with the delay negated: orientation flipped, same
    coefficients, sample offsets and window tests mirrored. Involutive."""
    return BoxOperator(N=op.N, epsilon=op.epsilon, coeffs=op.coeffs,
                       interval=op.interval, orientation=-op.orientation)


def _sample(f, op: BoxOperator, t: float):
    if isinstance(f, GridFunction):
        return f.value_at_time(t)
    val = f(t)
    return np.atleast_1d(np.asarray(val, dtype=complex))


def apply_box(op: BoxOperator, f, t: float) -> np.ndarray:
    """Apply the operator to f at time t. f is a GridFunction or a callable
    defined on [a, b]; the result is a complex vector."""
    a, b = op.interval
    tol = _ALIGN_TOL * op.epsilon
    if not (a - tol <= t <= b + tol):
        raise InvalidArgumentError(f"t={t} outside [{a}, {b}]")
    acc = None
    for i, ti in op.sample_offsets(t):
        term = op.coeff(i) * _sample(f, op, ti)
        acc = term if acc is None else acc + term
    if acc is None:
        # every sample windowed out; value is zero of unknown width
        width = f.dim if isinstance(f, GridFunction) else np.atleast_1d(
            np.asarray(f(t), dtype=complex)).shape[0]
        acc = np.zeros(width, dtype=complex)
    return acc


@dataclass(frozen=True)
class Grid:
    """Arithmetic grid t0 + n*epsilon clipped to [a, b]."""

    t0: float
    epsilon: float
    a: float
    b: float

    def __post_init__(self):
        if not (self.epsilon > 0):
            raise InvalidArgumentError("epsilon must be positive")
        if not (self.a < self.b):
            raise InvalidArgumentError("need a < b")
        if not (self.a - _ALIGN_TOL * self.epsilon <= self.t0
                <= self.b + _ALIGN_TOL * self.epsilon):
            raise InvalidArgumentError("anchor t0 must lie in [a, b]")

    @classmethod
    def regular(cls, a: float, b: float, M: int) -> "Grid":
        """Grid anchored at a with M steps covering [a, b]."""
        if M < 1:
            raise InvalidArgumentError("M must be positive")
        return cls(t0=float(a), epsilon=(float(b) - float(a)) / M,
                   a=float(a), b=float(b))

    @property
    def n_lo(self) -> int:
        return math.ceil((self.a - self.t0) / self.epsilon - _ALIGN_TOL)

    @property
    def n_hi(self) -> int:
        return math.floor((self.b - self.t0) / self.epsilon + _ALIGN_TOL)

    @property
    def indices(self) -> range:
        return range(self.n_lo, self.n_hi + 1)

    def __len__(self) -> int:
        return max(self.n_hi - self.n_lo + 1, 0)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_lo, self.n_hi + 1) * self.epsilon

    def time_of(self, n: int) -> float:
        return self.t0 + n * self.epsilon

    def index_of(self, t: float) -> int:
        """Grid index of a time, or AlignmentError when off-grid."""
        x = (t - self.t0) / self.epsilon
        n = round(x)
        if abs(x - n) > _ALIGN_TOL * max(1.0, abs(x)):
            raise AlignmentError(f"t={t} is not a node of the grid")
        if not (self.n_lo <= n <= self.n_hi):
            raise AlignmentError(f"t={t} outside the grid range")
        return int(n)

    @property
    def hits_a(self) -> bool:
        return abs(self.t0 + self.n_lo * self.epsilon - self.a) \
            <= _ALIGN_TOL * self.epsilon

    @property
    def hits_b(self) -> bool:
        return abs(self.t0 + self.n_hi * self.epsilon - self.b) \
            <= _ALIGN_TOL * self.epsilon


class GridFunction:
    """Complex d-vector samples on a grid, with optional boundary data."""

    def __init__(self, grid: Grid, values, boundary=None):
        self.grid = grid
        vals = np.asarray(values, dtype=complex)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape[0] != len(grid):
            raise InvalidArgumentError(
                f"got {vals.shape[0]} values for a grid of {len(grid)} nodes")
        self.values = vals
        if boundary is not None:
            d_a = np.atleast_1d(np.asarray(boundary[0], dtype=complex))
            d_b = np.atleast_1d(np.asarray(boundary[1], dtype=complex))
            boundary = (d_a, d_b)
            if grid.hits_a and not np.array_equal(vals[0], d_a):
                raise InvalidArgumentError("stored value at a differs from d_a")
            if grid.hits_b and not np.array_equal(vals[-1], d_b):
                raise InvalidArgumentError("stored value at b differs from d_b")
        self.boundary = boundary

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def value_at_index(self, n: int) -> np.ndarray:
        return self.values[n - self.grid.n_lo]

    def value_at_time(self, t: float) -> np.ndarray:
        return self.value_at_index(self.grid.index_of(t))

    def __call__(self, t: float) -> np.ndarray:
        return self.value_at_time(t)


@dataclass
class ValidationReport:
    valid: bool
    sym_P: float
    sym_Q: float
    skew_J1: float
    cond_P: float
    cond_Q: float
    singular_P: bool
    singular_Q: bool
    messages: list = field(default_factory=list)


def validate_lagrangian(L: QuadraticLagrangian, times=()) -> ValidationReport:
    """Report symmetry/skew-symmetry deviations and conditioning of P, Q.

    Never raises: violations are reported with the max elementwise deviation.
    Extra sample times may be supplied for time-dependent coefficients.
    """
    devs = {"P": 0.0, "Q": 0.0, "J1": 0.0}
    conds = {"P": 0.0, "Q": 0.0}

    def scan(P, Q, J1):
        devs["P"] = max(devs["P"], float(np.abs(P - P.T).max()))
        devs["Q"] = max(devs["Q"], float(np.abs(Q - Q.T).max()))
        devs["J1"] = max(devs["J1"], float(np.abs(J1 + J1.T).max()))
        conds["P"] = max(conds["P"], float(np.linalg.cond(P)))
        conds["Q"] = max(conds["Q"], float(np.linalg.cond(Q)))

    if L.time_dependence is None:
        scan(L.P, L.Q, L.J1)
    else:
        sample_ts = times if len(times) else (0.0,)
        for t in sample_ts:
            P, Q, J1, *_ = L.time_dependence(t)
            scan(np.atleast_2d(np.asarray(P, complex)),
                 np.atleast_2d(np.asarray(Q, complex)),
                 np.atleast_2d(np.asarray(J1, complex)))

    msgs = []
    tolP = _SYM_TOL * max(1.0, float(np.abs(L.P).max()))
    tolQ = _SYM_TOL * max(1.0, float(np.abs(L.Q).max()))
    tolJ = _SYM_TOL * max(1.0, float(np.abs(L.J1).max()))
    if devs["P"] > tolP:
        msgs.append(f"P symmetry violated, max deviation {devs['P']:.3e}")
    if devs["Q"] > tolQ:
        msgs.append(f"Q symmetry violated, max deviation {devs['Q']:.3e}")
    if devs["J1"] > tolJ:
        msgs.append(f"J1 skew-symmetry violated, max deviation {devs['J1']:.3e}")
    sing_P = not np.isfinite(conds["P"]) or conds["P"] > 1e14
    sing_Q = not np.isfinite(conds["Q"]) or conds["Q"] > 1e14
    if sing_P:
        msgs.append(f"P near singular, cond ~ {conds['P']:.3e}")
    if sing_Q:
        msgs.append(f"Q near singular, cond ~ {conds['Q']:.3e}")
    return ValidationReport(valid=not msgs, sym_P=devs["P"], sym_Q=devs["Q"],
                            skew_J1=devs["J1"], cond_P=conds["P"],
                            cond_Q=conds["Q"], singular_P=sing_P,
                            singular_Q=sing_Q, messages=msgs)


def eval_lagrangian(L: QuadraticLagrangian, x, y, t: float) -> complex:
    """Value of the quadratic form at position x and difference-velocity y."""
    P, Q, J1, J2, J3, J4 = L.at(t)
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    return complex(0.5 * y @ (P @ y) + 0.5 * x @ (Q @ x) + x @ (J1 @ y)
                   + J2 @ y + J3 @ x + J4)


def _breakpoints(op: BoxOperator) -> np.ndarray:
    a, b = op.interval
    pts = {a, b}
    for i in range(-op.N, op.N + 1):
        for base in (a, b):
            p = base + i * op.epsilon
            if a < p < b:
                pts.add(p)
    return np.array(sorted(pts))


def discrete_action(L: QuadraticLagrangian, op: BoxOperator, f,
                    quad_step: float) -> complex:
    """Composite-midpoint quadrature of the action integral of L(f, box f).

    Cells never straddle a window breakpoint (a + i*eps or b + i*eps), where
    the integrand may jump because a sample enters or leaves [a, b].
    """
    if not (quad_step > 0):
        raise InvalidArgumentError("quad_step must be positive")
    pts = _breakpoints(op)
    total = 0.0 + 0.0j
    for lo, hi in zip(pts[:-1], pts[1:]):
        length = hi - lo
        if length <= 0:
            continue
        ncell = max(int(math.ceil(length / quad_step - 1e-12)), 1)
        h = length / ncell
        mids = lo + (np.arange(ncell) + 0.5) * h
        for t in mids:
            xv = _sample(f, op, t)
            yv = apply_box(op, f, t)
            total += h * eval_lagrangian(L, xv, yv, t)
    return complex(total)
