"""Spectral analysis of the interior recurrence and pseudo-periodic
reconstruction of grid solutions.

A stationary interior recurrence with unimodular simple companion spectrum
writes its orbits as finite sums of complex exponentials plus a constant.
Fitting the amplitudes on consecutive safe nodes turns a grid solution into
a function of continuous time; split operators get one expansion per
sub-chain, interleaved at evaluation time.
"""

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    AlignmentError,
    DegenerateSpectrumError,
    InvalidArgumentError,
    NumericFailureError,
    SchemeUnstableError,
)
from .linalg import eig, matfun, vandermonde_solve
from .model import Grid, GridFunction
from .discrete import CompanionSystem, is_split, _chain_eig, safety_interval

_UNIMOD_TOL = 1e-10
_GAP_TOL = 1e-9


# ---------------------------------------------------------------------------
# spectrum report


@dataclass(frozen=True)
class SpectrumReport:
    """Companion spectrum with unimodularity classification and the two
    structure residuals (eigenvector shape, characteristic-polynomial
    factorization through the blocks)."""

    eigenvalues: np.ndarray
    deviations: np.ndarray          # ||lambda| - 1| per eigenvalue
    unimodular: np.ndarray          # deviation <= 1e-10 per eigenvalue
    phases: np.ndarray              # principal arguments
    multiplicity_flags: np.ndarray  # True if clustered within 1e-9
    eigvec_residual: float
    charpoly_residual: float
    det_A: complex

    @property
    def all_unimodular(self) -> bool:
        return bool(self.unimodular.all())


def spectrum(system: CompanionSystem) -> SpectrumReport:
    """Eigenvalues of the companion matrix with structure checks.

    Verifies that each eigenvector stacks as (w lam^{m-1}, ..., w lam, w)
    and that det(A - mu I) factors through the block polynomial
    (-1)^{md} det(mu^m I - sum_i B_i mu^{m-i}) at 20 unimodular sample
    points; the max residuals are recorded on the report.
    """
    A = system.A
    d = system.dim
    m = system.order
    dec = eig(A)
    lam = dec.values
    deviations = np.abs(np.abs(lam) - 1.0)
    unimod = deviations <= _UNIMOD_TOL
    phases = np.angle(lam)
    gaps = np.abs(lam[:, None] - lam[None, :]) + 2 * np.eye(lam.size)
    mult = gaps.min(axis=1) <= _GAP_TOL

    vec_res = 0.0
    for j in range(lam.size):
        v = dec.vectors[:, j]
        w = v[(m - 1) * d:]
        pred = np.concatenate([w * lam[j] ** (m - 1 - k) for k in range(m)])
        num = np.abs(v - pred).max()
        vec_res = max(vec_res, float(num / max(np.abs(v).max(), 1e-300)))

    cp_res = 0.0
    sign = (-1) ** (m * d)
    for k in range(20):
        mu = np.exp(1j * 2 * np.pi * (k + 0.37) / 20)
        lhs = np.linalg.det(A - mu * np.eye(m * d))
        poly = mu ** m * np.eye(d, dtype=complex)
        for i, B in enumerate(system.blocks):
            poly = poly - B * mu ** (m - 1 - i)
        rhs = sign * np.linalg.det(poly)
        cp_res = max(cp_res, float(abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1.0)))

    return SpectrumReport(eigenvalues=lam, deviations=deviations,
                          unimodular=unimod, phases=phases,
                          multiplicity_flags=mult,
                          eigvec_residual=vec_res, charpoly_residual=cp_res,
                          det_A=complex(np.linalg.det(A)))


# ---------------------------------------------------------------------------
# closed-form spectra of the worked operator families


def rr_phases(p_eigs, q_eigs, epsilon: float, r: float) -> np.ndarray:
    """Phases theta_k = arccos(1 - eps^2 |q_k/p_k| / (2 r^2)) of the
    symmetric-operator sub-chain, one per matched (p, q) eigenvalue pair."""
    p = np.asarray(p_eigs, dtype=float).reshape(-1)
    q = np.asarray(q_eigs, dtype=float).reshape(-1)
    if p.shape != q.shape:
        raise InvalidArgumentError("p_eigs and q_eigs must match in length")
    if np.any(p == 0):
        raise InvalidArgumentError("p eigenvalues must be nonzero")
    arg = 1.0 - (epsilon ** 2 / (2.0 * r ** 2)) * np.abs(q / p)
    if np.any(arg < -1.0 - 1e-12):
        raise SchemeUnstableError(
            "eps^2 |q/p| / (2 r^2) > 2: sub-chain eigenvalue leaves the unit circle")
    return np.arccos(np.clip(arg, -1.0, 1.0))


def cresson_spectrum(omega_k, epsilon: float) -> np.ndarray:
    """Closed-form companion eigenvalues for the complex-coefficient
    operator with r = (1-i)/2, s = (1+i)/2: four values per frequency,

        lam = (1 + z1 u)/2 + i z2 (sqrt2/2) sqrt(1 + v^2 - z1 u),

    with v = eps*omega, u = sqrt(1 - 2 v^2), over signs z1, z2 in {+1, -1}.
    |lam| = 1 identically while 2 v^2 <= 1; larger v leaves the unit circle
    and a warning is emitted.
    """
    om = np.asarray(omega_k, dtype=float).reshape(-1)
    out = []
    for w in om:
        v = epsilon * w
        if 2 * v * v > 1.0:
            warnings.warn(f"eps*omega = {v:.6g} exceeds 1/sqrt(2); "
                          "eigenvalues leave the unit circle", RuntimeWarning,
                          stacklevel=2)
        u = np.sqrt(complex(1.0 - 2.0 * v * v))
        for z1 in (1.0, -1.0):
            inner = np.sqrt(complex(1.0 + v * v - z1 * u))
            for z2 in (1.0, -1.0):
                out.append((1.0 + z1 * u) / 2.0 + 1j * z2 * (np.sqrt(2.0) / 2.0) * inner)
    return np.asarray(out, dtype=complex)


def theta_matrix(Omega, epsilon: float, r: float) -> np.ndarray:
    """Phase matrix of the symmetric-operator sub-chain:

        Theta = B diag(arcsin((eps/r) w_i sqrt(1 - (eps/(2r))^2 w_i^2))) B^{-1}

    over the (real) eigenvalues w_i of Omega; satisfies
    cos(Theta) = I - (eps^2 / (2 r^2)) Omega^2, which is verified to 1e-10.
    """
    Omega = np.atleast_2d(np.asarray(Omega, dtype=complex))
    if abs(complex(r).imag) > 0:
        raise InvalidArgumentError("r must be real")
    r = float(np.real(r))
    if r == 0.0 or epsilon <= 0:
        raise InvalidArgumentError("need nonzero r and positive epsilon")
    dec = eig(Omega)
    scale = max(float(np.abs(dec.values).max()), 1.0)
    if np.abs(dec.values.imag).max() > 1e-9 * scale:
        raise InvalidArgumentError("Omega must have real spectrum")
    if not np.isfinite(dec.cond) or dec.cond > 1e8:
        raise NumericFailureError("Omega eigenbasis is too ill-conditioned")
    w = dec.values.real
    if epsilon * np.abs(w).max() >= 2.0 * abs(r):
        raise InvalidArgumentError(
            "phase undefined: need eps * max|omega| < 2 |r|")
    x = (epsilon / r) * w * np.sqrt(1.0 - (epsilon / (2 * r)) ** 2 * w ** 2)
    theta = np.arcsin(x)
    V = dec.vectors
    Theta = V @ (theta[:, None].astype(complex) * np.linalg.inv(V))
    lhs = matfun(Theta, np.cos)
    rhs = np.eye(Omega.shape[0]) - (epsilon ** 2 / (2 * r ** 2)) * (Omega @ Omega)
    if np.abs(lhs - rhs).max() > 1e-10 * max(1.0, float(np.abs(rhs).max())):
        raise NumericFailureError("cos(Theta) identity failed verification")
    if np.abs(Theta.imag).max() <= 1e-12 * max(1.0, np.abs(Theta.real).max()):
        Theta = Theta.real
    return Theta


def chain_companion(C) -> np.ndarray:
    """First-order form [[2C, -I], [I, 0]] of the three-term sub-chain
    recurrence u_{j+1} = 2C u_j - u_{j-1}."""
    C = np.atleast_2d(np.asarray(C, dtype=complex))
    d = C.shape[0]
    top = np.concatenate([2 * C, -np.eye(d)], axis=1)
    bot = np.concatenate([np.eye(d), np.zeros((d, d))], axis=1)
    return np.concatenate([top, bot], axis=0)


def chain_phases(L, op) -> np.ndarray:
    """Positive phases of the split sub-chain companion spectrum, sorted."""
    if not is_split(L, op):
        raise InvalidArgumentError("operator does not split; no sub-chain spectrum")
    C, _, _, _ = _chain_eig(L, op)
    lam = eig(chain_companion(C)).values
    ph = np.angle(lam)
    pos = np.sort(ph[ph > 0])
    return pos


# ---------------------------------------------------------------------------
# modal expansion


@dataclass(frozen=True)
class ModalBank:
    """One exponential sum: values sum_j amp_j exp(i theta_j (t-anchor)/step)
    + offset, stepping over one (sub-)sequence of grid nodes."""

    anchor: float
    step: float
    thetas: np.ndarray        # real phases, principal
    amplitudes: np.ndarray    # (n_modes, d)
    offset: np.ndarray        # (d,)

    def __call__(self, t):
        ts = np.asarray(t, dtype=float)
        scalar = ts.ndim == 0
        ph = np.exp(1j * np.outer(np.atleast_1d(ts) - self.anchor,
                                  self.thetas) / self.step)
        out = ph @ self.amplitudes + self.offset[None, :]
        return out[0] if scalar else out

    @property
    def mode_count(self) -> int:
        return self.thetas.size


class ModalExpansion:
    """Pseudo-periodic closed form fitted to a grid solution.

    banks holds one ModalBank for a plain recurrence and two (even-node,
    odd-node) for split operators.  Calling the expansion evaluates the
    first bank's closed form, the continuous-time limit object; node-exact
    evaluation (parity-aware for split) goes through at_time/at_node.
    """

    def __init__(self, banks, grid: Grid, split: bool):
        self.banks = tuple(banks)
        self.grid = grid
        self.split = split

    @property
    def modes(self):
        b = self.banks[0]
        return [(float(b.thetas[j]), b.amplitudes[j].copy())
                for j in range(b.mode_count)]

    @property
    def offset(self) -> np.ndarray:
        return self.banks[0].offset

    @property
    def anchor(self) -> float:
        return self.banks[0].anchor

    @property
    def epsilon(self) -> float:
        return self.banks[0].step

    def __call__(self, t):
        return self.banks[0](t)

    def at_node(self, n: int) -> np.ndarray:
        t = self.grid.time_of(n)
        if self.split:
            return self.banks[n % 2](t)
        return self.banks[0](t)

    def at_time(self, t: float) -> np.ndarray:
        try:
            n = self.grid.index_of(t)
        except AlignmentError:
            return self.banks[0](float(t))
        return self.at_node(n)


def _expansion_offset(system: CompanionSystem):
    if system.J6 is not None:
        return np.asarray(system.J6, dtype=complex)
    if np.abs(system.J5).max() <= 1e-14:
        return np.zeros(system.dim, dtype=complex)
    raise DegenerateSpectrumError(
        "affine offset undefined: 1 is a companion eigenvalue with nonzero forcing")


def _check_modes(lam):
    dev = np.abs(np.abs(lam) - 1.0)
    if dev.max() > _UNIMOD_TOL:
        raise SchemeUnstableError(
            f"companion spectrum off the unit circle by {dev.max():.3e}")
    gaps = np.abs(lam[:, None] - lam[None, :]) + 2 * np.eye(lam.size)
    if gaps.min() <= _GAP_TOL:
        raise DegenerateSpectrumError(
            "companion spectrum has a near-multiple eigenvalue; modal fit is ill-posed")


def _fit_bank(lam, values, first_index, anchor, step, offset):
    """Fit amplitudes so sum_j amp_j lam_j^n matches values row-wise at
    consecutive (sub-)sequence indices starting at first_index."""
    m = lam.size
    rhs = values - offset[None, :]
    v = vandermonde_solve(lam, rhs)  # powers 1..m
    shift = lam[:, None] ** (1 - first_index)
    amps = v * shift
    return ModalBank(anchor=anchor, step=step, thetas=np.angle(lam),
                     amplitudes=amps, offset=offset)


def modal_expansion(system: CompanionSystem, gridsol: GridFunction) -> ModalExpansion:
    """Fit the pseudo-periodic closed form to a grid solution.

    Requires a unimodular simple companion spectrum and enough safe nodes
    to pin every mode (mode count consecutive nodes per sub-chain inside
    the safety range).
    """
    L, op = system.L, system.op
    if L is None or op is None:
        raise InvalidArgumentError("companion system lacks its Lagrangian/operator context")
    grid = gridsol.grid
    if abs(grid.epsilon - op.epsilon) > 1e-9 * op.epsilon:
        raise InvalidArgumentError("grid step does not match the operator step")
    a, b = op.interval
    safe = safety_interval(grid.t0, grid.epsilon, a, b, op.N)
    if safe.empty:
        raise InvalidArgumentError("empty safety range: no usable samples")
    offset = _expansion_offset(system)
    d = system.dim

    if not is_split(L, op):
        lam = eig(system.A).values
        _check_modes(lam)
        m = lam.size
        if len(safe) < m:
            raise InvalidArgumentError(
                f"need {m} consecutive safe nodes, range has {len(safe)}")
        n0 = safe.lo
        vals = np.stack([gridsol.value_at_index(n0 + r) for r in range(m)])
        bank = _fit_bank(lam, vals, n0, grid.t0, grid.epsilon, offset)
        return ModalExpansion([bank], grid, split=False)

    C, _, _, _ = _chain_eig(L, op)
    lam = eig(chain_companion(C)).values
    _check_modes(lam)
    m = lam.size  # 2d modes per sub-chain
    banks = []
    for parity in (0, 1):
        n_first = safe.lo + ((parity - safe.lo) % 2)
        idx = [n_first + 2 * r for r in range(m)]
        if idx[-1] > safe.hi:
            raise InvalidArgumentError(
                f"need {m} consecutive parity-{parity} safe nodes")
        vals = np.stack([gridsol.value_at_index(n) for n in idx])
        j0 = (idx[0] - parity) // 2
        anchor = grid.t0 + parity * grid.epsilon
        banks.append(_fit_bank(lam, vals, j0, anchor, 2 * grid.epsilon, offset))
    return ModalExpansion(banks, grid, split=True)


def extend_pseudo_periodic(exp: ModalExpansion, t: float) -> np.ndarray:
    """Evaluate the fitted closed form at arbitrary time t in [a, b];
    grid-aligned times dispatch to the bank owning that node so the
    extension restricts to the source solution on the safe window."""
    a, b = exp.grid.a, exp.grid.b
    tol = 1e-9 * exp.grid.epsilon
    if not (a - tol <= t <= b + tol):
        raise InvalidArgumentError(f"t={t} outside [{a}, {b}]")
    return exp.at_time(float(t))
