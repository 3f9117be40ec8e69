"""Convergence studies: grid solutions against their continuous limits.

A scenario fixes a Lagrangian, an (r, s) operator family with step
eps = (b - a) / M, boundary data, and a list of even M values.  For each M
the two-point grid problem is solved, expanded into its pseudo-periodic
closed form, and compared in sup norm against the continuous solution z and
against the rescaled limit profile z'.  The per-mode phase and amplitude
gaps quantify which part of the error comes from phases drifting off the
continuous frequencies, which from amplitude mismatch, and which from modes
with no continuous counterpart.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DegenerateSpectrumError,
    InvalidArgumentError,
    ResonantDiscreteProblemError,
    SchemeUnstableError,
    SingularCoefficientError,
    UnsupportedConfigurationError,
)
from .linalg import matfun
from .model import BoxOperator, QuadraticLagrangian, make_rs_box
from .continuous import (
    ContinuousSolution,
    modal_content,
    sin_margin,
    solve_cel,
    solve_omega,
    z_limit,
)
from .discrete import box_one, is_split, companion, shooting_determinant, solve_dirichlet
from .spectral import modal_expansion, theta_matrix

_REAL_TOL = 1e-13


# ---------------------------------------------------------------------------
# scenario and report types


@dataclass(frozen=True)
class ConvergenceScenario:
    """One convergence experiment: a Lagrangian, an (r, s) family with
    eps = (b - a) / M, boundary data, and the list of grid resolutions."""

    lagrangian: QuadraticLagrangian
    r: complex
    s: complex
    a: float
    b: float
    d_a: np.ndarray
    d_b: np.ndarray
    M_list: tuple
    delta: float = 1.0
    samples: int = 2048

    def __post_init__(self):
        if not self.b > self.a:
            raise InvalidArgumentError("need b > a")
        Ms = tuple(int(M) for M in self.M_list)
        if not Ms:
            raise InvalidArgumentError("M_list must be nonempty")
        for M in Ms:
            if M < 8 or M % 2 != 0:
                raise InvalidArgumentError("all M must be even and >= 8")
        if not self.delta > 0:
            raise InvalidArgumentError("delta must be positive")
        if self.delta >= (self.b - self.a) / 2:
            raise InvalidArgumentError("delta must leave a nonempty window")
        if self.samples < 100:
            raise InvalidArgumentError("need at least 100 samples")
        d = self.lagrangian.dim
        da = np.asarray(self.d_a, dtype=complex).reshape(-1)
        db = np.asarray(self.d_b, dtype=complex).reshape(-1)
        if da.shape != (d,) or db.shape != (d,):
            raise InvalidArgumentError(f"boundary data must be vectors of length {d}")
        object.__setattr__(self, "M_list", Ms)
        object.__setattr__(self, "d_a", da)
        object.__setattr__(self, "d_b", db)

    def operator(self, M: int) -> BoxOperator:
        eps = (self.b - self.a) / M
        return make_rs_box(self.r, self.s, eps, (self.a, self.b))

    @property
    def data_scale(self) -> float:
        return max(float(np.abs(self.d_a).max()), float(np.abs(self.d_b).max()))


@dataclass(frozen=True)
class ConvergenceRow:
    """Per-M measurements.  phase_gaps holds |theta/eps_eff - omega| per
    matched mode, amplitude_gaps the per-frequency |g - f| norms, and
    residual_group_mass the summed amplitude of unmatched modes."""

    M: int
    epsilon: float
    sup_err_to_z: float
    sup_err_to_zprime: float
    shoot_margin: float
    phase_gaps: np.ndarray
    amplitude_gaps: np.ndarray
    residual_group_mass: float
    singular: bool = False


@dataclass(frozen=True)
class ConvergenceReport:
    scenario: ConvergenceScenario
    rows: tuple
    verdict: str
    continuous_margin: float
    limit_gap: float  # sup |z' - z| over the sample window; NaN when z' undefined


# ---------------------------------------------------------------------------
# sampling helpers


def _eval_many(f, ts: np.ndarray) -> np.ndarray:
    """Evaluate a closed-form object on a time array, returning (len(ts), d)."""
    if hasattr(f, "sample"):
        return np.asarray(f.sample(ts), dtype=complex)
    try:
        vals = np.asarray(f(ts), dtype=complex)
        if vals.ndim == 2 and vals.shape[0] == ts.size:
            return vals
    except (TypeError, ValueError):
        pass
    return np.stack([np.atleast_1d(np.asarray(f(float(t)), dtype=complex))
                     for t in ts])


def sup_error(f, g, a: float, b: float, delta: float, samples: int) -> float:
    """Max over equispaced t in [a+delta, b-delta] of the max-norm |f(t)-g(t)|."""
    if not delta < (b - a) / 2:
        raise InvalidArgumentError("delta must be smaller than half the interval")
    ts = np.linspace(a + delta, b - delta, int(samples))
    return float(np.abs(_eval_many(f, ts) - _eval_many(g, ts)).max())


# ---------------------------------------------------------------------------
# mode grouping against the continuous frequencies


def _continuous_modes(csol: ContinuousSolution):
    modes, _ = modal_content(csol)
    freqs = np.array([m[0] for m in modes], dtype=complex)
    amps = np.stack([m[1] for m in modes])
    return freqs, amps


def _group_modes(bank, freqs, amps):
    """Match bank modes to continuous frequencies.

    A mode with phase theta and node spacing step carries the effective
    frequency theta/step; it joins the group of the nearest omega provided
    |theta/step - omega| <= |omega|/2, otherwise it counts as residual.
    Returns per-mode gaps, per-frequency amplitude gaps, and the residual
    amplitude mass.
    """
    eff = bank.thetas / bank.step
    nf = freqs.size
    g_sum = np.zeros((nf, bank.amplitudes.shape[1]), dtype=complex)
    gaps = []
    mode_gap = {}
    residual = 0.0
    for j in range(bank.mode_count):
        dist = np.abs(eff[j] - freqs)
        k = int(np.argmin(dist))
        if dist[k] <= abs(freqs[k]) / 2:
            g_sum[k] += bank.amplitudes[j]
            gaps.append(float(dist[k]))
            mode_gap.setdefault(k, 0.0)
            mode_gap[k] = max(mode_gap[k], float(dist[k]))
        else:
            residual += float(np.abs(bank.amplitudes[j]).max())
    amp_gaps = np.abs(g_sum - amps).max(axis=1)
    return np.asarray(gaps, dtype=float), amp_gaps, residual, mode_gap


def bound_terms(row: ConvergenceRow, expansion, csol: ContinuousSolution):
    """The three error-budget sums for one resolution.

    residual_mass collects the amplitudes of modes with no continuous
    counterpart, amplitude_term the per-frequency amplitude mismatch, and
    phase_term the accumulated phase drift M*eps*sum_omega |f_omega| * gap.
    Their total dominates the measured sup error up to sampling tolerance.
    """
    freqs, amps = _continuous_modes(csol)
    bank = expansion.banks[0]
    _, amp_gaps, residual, mode_gap = _group_modes(bank, freqs, amps)
    amplitude_term = float(amp_gaps.sum())
    horizon = row.M * row.epsilon
    phase_term = 0.0
    for k, gap in mode_gap.items():
        phase_term += horizon * float(np.abs(amps[k]).max()) * gap
    return residual, amplitude_term, phase_term


# ---------------------------------------------------------------------------
# scenario driver


def _nan_row(M, eps, margin):
    empty = np.zeros(0, dtype=float)
    return ConvergenceRow(M=M, epsilon=eps, sup_err_to_z=math.nan,
                          sup_err_to_zprime=math.nan, shoot_margin=margin,
                          phase_gaps=empty, amplitude_gaps=empty,
                          residual_group_mass=math.nan, singular=True)


def _node_sup(sol, other, a, b, delta):
    """Fallback sup over grid nodes inside the window, for grid solutions
    whose modal expansion is unavailable."""
    grid = sol.grid
    vals = []
    for n in grid.indices:
        t = grid.time_of(n)
        if a + delta <= t <= b - delta:
            vals.append(np.abs(sol.value_at_index(n) - other(t)).max())
    return float(max(vals)) if vals else math.nan


def run_scenario(scenario: ConvergenceScenario) -> ConvergenceReport:
    """Solve every resolution of the scenario and assemble the verdict.

    The continuous problem must be solvable (a resonant continuous problem
    aborts the scenario); a singular grid solve only marks its own row and
    the sweep continues.
    """
    L = scenario.lagrangian
    a, b = scenario.a, scenario.b
    csol = solve_cel(L, scenario.d_a, scenario.d_b, a, b)
    E_gap = np.abs(np.linalg.det(
        matfun(csol.Omega2, lambda w: np.exp(1j * (b - a) * w))
        - matfun(csol.Omega1, lambda w: np.exp(1j * (b - a) * w))))
    continuous_margin = float(E_gap)

    r, s = complex(scenario.r), complex(scenario.s)
    zp = None
    limit_gap = math.nan
    if (abs(r - s) <= _REAL_TOL and abs(r.imag) <= _REAL_TOL
            and abs(r.real) > _REAL_TOL):
        try:
            def zp(ts, _r=r.real):
                return z_limit(_r, csol.Omega1, scenario.d_a, scenario.d_b,
                               a, b, ts)
            limit_gap = sup_error(zp, csol, a, b, scenario.delta,
                                  scenario.samples)
        except SingularCoefficientError:
            zp = None
            limit_gap = math.nan

    rows = []
    for M in scenario.M_list:
        eps = (b - a) / M
        op = scenario.operator(M)
        try:
            shot = solve_dirichlet(L, op, scenario.d_a, scenario.d_b, a, b, M)
        except ResonantDiscreteProblemError as exc:
            margin = math.nan if exc.margin is None else float(exc.margin)
            rows.append(_nan_row(M, eps, margin))
            continue
        margin = float(abs(shot.shoot_det))
        sol = shot.solution
        try:
            exp = modal_expansion(companion(L, op), sol)
        except (SchemeUnstableError, DegenerateSpectrumError):
            # complex-coefficient or degenerate spectra have no pseudo-periodic
            # closed form; fall back to node-sampled comparison
            sup_z = _node_sup(sol, csol, a, b, scenario.delta)
            sup_zp = (_node_sup(sol, lambda t: zp(np.array([t]))[0], a, b,
                                scenario.delta) if zp is not None else math.nan)
            empty = np.zeros(0, dtype=float)
            rows.append(ConvergenceRow(M=M, epsilon=eps, sup_err_to_z=sup_z,
                                       sup_err_to_zprime=sup_zp,
                                       shoot_margin=margin, phase_gaps=empty,
                                       amplitude_gaps=empty,
                                       residual_group_mass=math.nan))
            continue
        y = exp.banks[0]
        sup_z = sup_error(y, csol, a, b, scenario.delta, scenario.samples)
        sup_zp = (sup_error(y, zp, a, b, scenario.delta, scenario.samples)
                  if zp is not None else math.nan)
        freqs, amps = _continuous_modes(csol)
        gaps, amp_gaps, residual, _ = _group_modes(y, freqs, amps)
        rows.append(ConvergenceRow(M=M, epsilon=eps, sup_err_to_z=sup_z,
                                   sup_err_to_zprime=sup_zp,
                                   shoot_margin=margin, phase_gaps=gaps,
                                   amplitude_gaps=amp_gaps,
                                   residual_group_mass=residual))

    verdict = _verdict(rows, limit_gap, scenario.data_scale)
    return ConvergenceReport(scenario=scenario, rows=tuple(rows),
                             verdict=verdict,
                             continuous_margin=continuous_margin,
                             limit_gap=limit_gap)


def _decreasing_to(vals, floor):
    if any(not math.isfinite(v) for v in vals):
        return False
    if any(v2 >= v1 for v1, v2 in zip(vals, vals[1:])):
        return False
    return vals[-1] <= floor


def _verdict(rows, limit_gap, data_scale):
    if any(r.singular for r in rows):
        return "singular"
    floor = 0.05 * data_scale
    if _decreasing_to([r.sup_err_to_z for r in rows], floor):
        return "converges-to-z"
    zp = [r.sup_err_to_zprime for r in rows]
    if (_decreasing_to(zp, floor) and math.isfinite(limit_gap)
            and limit_gap > 10 * zp[-1]):
        return "converges-to-zprime"
    return "diverges"


# ---------------------------------------------------------------------------
# diagnostics


def resonance_scan(L: QuadraticLagrangian, a: float, b_values,
                   M_list=(), r: float = 0.5):
    """Solvability margins along a sweep of right endpoints.

    For each b the continuous margin |det sin((b-a) Omega)| is reported and,
    per even M, the sub-chain margins |det sin(k Theta)| at k = M/2 - 2 and
    k = M/2.  Small margins flag quasi-resonant intervals where convergence
    slows down.
    """
    if not L.stationary:
        raise InvalidArgumentError("resonance scan requires a stationary Lagrangian")
    P, Q, J1, _, _, _ = L.at(a)
    if np.abs(J1).max() != 0:
        raise InvalidArgumentError("resonance scan requires J1 = 0")
    Om1, _ = solve_omega(P, Q)
    Om = np.real_if_close(Om1, tol=1000)
    rows = []
    for b in b_values:
        entry = {"b": float(b),
                 "continuous_margin": sin_margin(Om1, a, float(b)),
                 "discrete": {}}
        for M in M_list:
            M = int(M)
            if M % 2 != 0:
                raise InvalidArgumentError("discrete margins need even M")
            eps = (float(b) - a) / M
            Theta = theta_matrix(Om, eps, r)
            ks = {}
            for k in (M // 2 - 2, M // 2):
                S = matfun(np.asarray(Theta, dtype=complex),
                           lambda w, _k=k: np.sin(_k * w))
                ks[k] = float(abs(np.linalg.det(S)))
            entry["discrete"][M] = ks
        rows.append(entry)
    return rows


def odd_M_check(L: QuadraticLagrangian, r: float, a: float, b: float, M: int) -> float:
    """|shooting determinant| for a symmetric (r, r) operator with odd M;
    the sub-chain closure makes it structurally zero."""
    if M % 2 == 0:
        raise InvalidArgumentError("odd_M_check expects odd M")
    eps = (b - a) / M
    op = make_rs_box(r, r, eps, (a, b))
    return float(abs(shooting_determinant(L, op, a, b, M)))


def j_reduction_check(L_full: QuadraticLagrangian, L0: QuadraticLagrangian,
                      op: BoxOperator, d_a, d_b, M: int) -> float:
    """Max interior-node norm of (y - y0) + Q^{-1}(box J2 + J3).

    y solves the full problem, y0 the J-free problem with boundary data
    shifted by Q^{-1} J3; the constant-shift identity makes the expression
    vanish identically when both solves share their interior rows.
    """
    a, b = op.interval
    P, Q, J1, J2, J3, _ = L_full.at(a)
    P0, Q0, J10, J20, J30, _ = L0.at(a)
    if np.abs(J20).max() != 0 or np.abs(J30).max() != 0:
        raise InvalidArgumentError("L0 must have no inhomogeneous terms")
    if (np.abs(P - P0).max() != 0 or np.abs(Q - Q0).max() != 0
            or np.abs(J1 - J10).max() != 0):
        raise InvalidArgumentError("L0 must share P, Q, J1 with L_full")
    try:
        q = np.linalg.solve(Q, J3)
    except np.linalg.LinAlgError as exc:
        raise SingularCoefficientError("Q must be nonsingular") from exc
    y = solve_dirichlet(L_full, op, d_a, d_b, a, b, M).solution
    da = np.asarray(d_a, dtype=complex).reshape(-1)
    db = np.asarray(d_b, dtype=complex).reshape(-1)
    y0 = solve_dirichlet(L0, op, da + q, db + q, a, b, M).solution
    Qinv = np.linalg.inv(Q)
    worst = 0.0
    grid = y.grid
    for n in range(1, M):
        t = grid.time_of(grid.n_lo + n)
        w = box_one(op, t)
        gap = (y.value_at_index(grid.n_lo + n) - y0.value_at_index(grid.n_lo + n)
               + Qinv @ (w * J2 + J3))
        worst = max(worst, float(np.abs(gap).max()))
    return worst


def limit_phase_gap(Omega, a: float, b: float, r: float, epsilon: float) -> float:
    """Distance between the composed finite-step phase map and its limit:
    max-norm of cos(((b-a)/(2 eps)) Theta(eps)) - cos(((b-a)/(2r)) Omega)."""
    Om = np.atleast_2d(np.asarray(Omega, dtype=complex))
    Theta = np.asarray(theta_matrix(Om, epsilon, r), dtype=complex)
    lhs = matfun(((b - a) / (2 * epsilon)) * Theta, np.cos)
    rhs = matfun(((b - a) / (2 * r)) * Om, np.cos)
    return float(np.abs(lhs - rhs).max())
