"""Command-line front end: JSON config in, CSV data and a text report out.

Commands
    solve-del   grid two-point solve; nodes with grid and continuous values
    solve-cel   continuous two-point solve sampled on a fine time grid
    spectrum    companion spectrum with unimodularity classification
    extend      pseudo-periodic closed form sampled on a fine time grid
    converge    sweep of resolutions with sup-error rows and a verdict
    repro       canned experiment presets (figure1 | figure2 | figure3)

Exit status: 0 success, 2 resonant or singular problem, 3 invalid config or
arguments, 1 internal numeric failure.
"""

import argparse
import json
import math
import sys

import numpy as np

from .errors import (
    ConfigError,
    InvalidArgumentError,
    NumericFailureError,
    QuadlagError,
    ResonantProblemError,
)
from .model import QuadraticLagrangian, make_rs_box
from .continuous import residual_cel, solve_cel, z_limit
from .discrete import companion, residual_del, safety_interval, solve_dirichlet
from .spectral import extend_pseudo_periodic, modal_expansion, spectrum
from .converge import ConvergenceScenario, run_scenario

_COMMANDS = ("solve-del", "solve-cel", "spectrum", "extend", "converge", "repro")
_FIGURES = ("figure1", "figure2", "figure3")
_PRESETS = {
    "half-half": (0.5 + 0.0j, 0.5 + 0.0j),
    "cresson": (0.5 - 0.5j, 0.5 + 0.5j),
}
_REAL_TOL = 1e-13


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# config parsing


def _take(d: dict, where: str, allowed: dict):
    """Destructure a JSON object, rejecting unknown keys. allowed maps
    key -> required flag."""
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    missing = sorted(k for k, req in allowed.items() if req and k not in d)
    if missing:
        raise ConfigError(f"{where}: missing required key(s) {', '.join(missing)}")
    return d


def _scalar(x, where: str) -> complex:
    if isinstance(x, bool):
        raise ConfigError(f"{where}: expected a number")
    if isinstance(x, (int, float)):
        return complex(x)
    if (isinstance(x, list) and len(x) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x)):
        return complex(x[0], x[1])
    raise ConfigError(f"{where}: expected a number or [re, im]")


def _real(x, where: str) -> float:
    z = _scalar(x, where)
    if z.imag != 0:
        raise ConfigError(f"{where}: must be real")
    return z.real


def _vector(x, where: str) -> np.ndarray:
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return np.array([complex(x)])
    if not isinstance(x, list) or not x:
        raise ConfigError(f"{where}: expected a nonempty list")
    return np.array([_scalar(v, f"{where}[{i}]") for i, v in enumerate(x)])


def _matrix(x, where: str) -> np.ndarray:
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return np.array([[complex(x)]])
    if not isinstance(x, list) or not x:
        raise ConfigError(f"{where}: expected a nonempty nested list (row-major)")
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        if len(x) == 2:
            return np.array([[complex(x[0], x[1])]])
        raise ConfigError(f"{where}: rows must be lists")
    rows = [_vector(row, f"{where}[{i}]") for i, row in enumerate(x)]
    n = len(rows)
    if any(r.size != n for r in rows):
        raise ConfigError(f"{where}: must be square, row-major")
    return np.stack(rows)


class RunConfig:
    """Validated run description: what to solve, on which interval, with
    which operator, and where to write the outputs."""

    def __init__(self, command, lagrangian, r, s, N, a, b, d_a, d_b,
                 M=None, M_list=None, delta=1.0, samples=2048, out=None,
                 figure=None, preset=None):
        self.command = command
        self.lagrangian = lagrangian
        self.r = complex(r)
        self.s = complex(s)
        self.N = int(N)
        self.a = float(a)
        self.b = float(b)
        self.d_a = np.asarray(d_a, dtype=complex).reshape(-1)
        self.d_b = np.asarray(d_b, dtype=complex).reshape(-1)
        self.M = None if M is None else int(M)
        self.M_list = None if M_list is None else tuple(int(m) for m in M_list)
        self.delta = float(delta)
        self.samples = int(samples)
        self.out = out
        self.figure = figure
        self.preset = preset
        self._validate()

    def _validate(self):
        if self.command not in _COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.N != 1:
            raise ConfigError("only N = 1 operators are supported")
        if not self.b > self.a:
            raise ConfigError("interval: need b > a")
        d = self.lagrangian.dim
        if self.d_a.shape != (d,) or self.d_b.shape != (d,):
            raise ConfigError(f"boundary: d_a and d_b must have length {d}")
        if self.command in ("solve-del", "spectrum", "extend") and self.M is None:
            raise ConfigError(f"{self.command} requires M")
        if self.command == "converge" and not self.M_list:
            raise ConfigError("converge requires M_list")
        if self.command == "repro" and self.figure not in _FIGURES:
            raise ConfigError("repro requires a figure among " + ", ".join(_FIGURES))
        if self.samples < 2:
            raise ConfigError("samples must be at least 2")

    def epsilon(self, M: int) -> float:
        return (self.b - self.a) / M

    def operator(self, M: int):
        return make_rs_box(self.r, self.s, self.epsilon(M), (self.a, self.b))

    @property
    def rr_real(self) -> bool:
        return (abs(self.r - self.s) <= _REAL_TOL
                and abs(self.r.imag) <= _REAL_TOL
                and abs(self.r.real) > _REAL_TOL)

    def to_json(self) -> dict:
        def num(z):
            z = complex(z)
            return z.real if z.imag == 0 else [z.real, z.imag]

        def vec(v):
            return [num(x) for x in np.asarray(v).reshape(-1)]

        def mat(A):
            return [vec(row) for row in np.asarray(A)]

        L = self.lagrangian
        lag = {"P": mat(L.P), "Q": mat(L.Q)}
        if np.abs(L.J1).max() != 0:
            lag["J1"] = mat(L.J1)
        if np.abs(L.J2).max() != 0:
            lag["J2"] = vec(L.J2)
        if np.abs(L.J3).max() != 0:
            lag["J3"] = vec(L.J3)
        if L.J4 != 0:
            lag["J4"] = num(L.J4)
        if self.preset is not None:
            operator = {"preset": self.preset}
        else:
            operator = {"r": num(self.r), "s": num(self.s), "N": self.N}
        cfg = {
            "command": self.command,
            "lagrangian": lag,
            "operator": operator,
            "interval": {"a": self.a, "b": self.b},
            "boundary": {"d_a": vec(self.d_a), "d_b": vec(self.d_b)},
        }
        if self.figure is not None:
            cfg["figure"] = self.figure
        if self.M is not None:
            cfg["M"] = self.M
        if self.M_list is not None:
            cfg["M_list"] = list(self.M_list)
        cfg["delta"] = self.delta
        cfg["samples"] = self.samples
        if self.out is not None:
            cfg["out"] = self.out
        return cfg


def parse_config(doc: dict, command: str, figure=None) -> RunConfig:
    """Build a RunConfig from a decoded JSON document.  The command given on
    the command line wins; a command key in the file must agree with it."""
    _take(doc, "config", {
        "command": False, "figure": False, "lagrangian": True,
        "operator": True, "interval": True, "boundary": True,
        "M": False, "M_list": False, "delta": False, "samples": False,
        "out": False,
    })
    if "command" in doc and doc["command"] != command:
        raise ConfigError(
            f"config command {doc['command']!r} does not match {command!r}")
    if "figure" in doc:
        if figure is not None and doc["figure"] != figure:
            raise ConfigError("config figure does not match the command line")
        figure = doc["figure"]

    lag = _take(doc["lagrangian"], "lagrangian", {
        "P": True, "Q": True, "J1": False, "J2": False, "J3": False,
        "J4": False,
    })
    P = _matrix(lag["P"], "lagrangian.P")
    d = P.shape[0]
    kw = {"P": P, "Q": _matrix(lag["Q"], "lagrangian.Q")}
    if "J1" in lag:
        kw["J1"] = _matrix(lag["J1"], "lagrangian.J1")
    if "J2" in lag:
        kw["J2"] = _vector(lag["J2"], "lagrangian.J2")
    if "J3" in lag:
        kw["J3"] = _vector(lag["J3"], "lagrangian.J3")
    if "J4" in lag:
        kw["J4"] = _scalar(lag["J4"], "lagrangian.J4")
    try:
        L = QuadraticLagrangian(**kw)
    except InvalidArgumentError as exc:
        raise ConfigError(f"lagrangian: {exc}") from exc

    opdoc = doc["operator"]
    preset = None
    if isinstance(opdoc, dict) and "preset" in opdoc:
        _take(opdoc, "operator", {"preset": True})
        preset = opdoc["preset"]
        if preset not in _PRESETS:
            raise ConfigError(
                f"operator.preset must be one of {', '.join(sorted(_PRESETS))}")
        r, s = _PRESETS[preset]
        N = 1
    else:
        op = _take(opdoc, "operator", {"r": True, "s": True, "N": False})
        r = _scalar(op["r"], "operator.r")
        s = _scalar(op["s"], "operator.s")
        N = op.get("N", 1)
        if not isinstance(N, int) or isinstance(N, bool):
            raise ConfigError("operator.N must be an integer")

    iv = _take(doc["interval"], "interval", {"a": True, "b": True})
    bd = _take(doc["boundary"], "boundary", {"d_a": True, "d_b": True})

    M = doc.get("M")
    if M is not None and (not isinstance(M, int) or isinstance(M, bool)):
        raise ConfigError("M must be an integer")
    M_list = doc.get("M_list")
    if M_list is not None:
        if (not isinstance(M_list, list) or not M_list
                or not all(isinstance(m, int) and not isinstance(m, bool)
                           for m in M_list)):
            raise ConfigError("M_list must be a nonempty list of integers")
    out = doc.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigError("out must be a string path prefix")

    try:
        return RunConfig(
            command=command, lagrangian=L, r=r, s=s, N=N,
            a=_real(iv["a"], "interval.a"), b=_real(iv["b"], "interval.b"),
            d_a=_vector(bd["d_a"], "boundary.d_a"),
            d_b=_vector(bd["d_b"], "boundary.d_b"),
            M=M, M_list=M_list,
            delta=_real(doc.get("delta", 1.0), "delta"),
            samples=doc.get("samples", 2048),
            out=out, figure=figure, preset=preset)
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# output helpers


def _write_csv(path: str, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _series_rows(ts, columns):
    """Rows of t plus interleaved re/im of each (len(ts), d) column block."""
    out = []
    for i, t in enumerate(ts):
        cells = [_fmt(t)]
        for vals in columns:
            for x in vals[i]:
                cells.append(_fmt(x.real))
                cells.append(_fmt(x.imag))
        out.append(cells)
    return out


def _series_header(d, names):
    head = ["t"]
    for name in names:
        for k in range(d):
            head.append(f"re_{name}_{k}")
            head.append(f"im_{name}_{k}")
    return head


def _maybe_zprime(cfg, csol, ts):
    if not cfg.rr_real:
        return None
    try:
        return z_limit(cfg.r.real, csol.Omega1, cfg.d_a, cfg.d_b,
                       cfg.a, cfg.b, ts)
    except QuadlagError:
        return None


# ---------------------------------------------------------------------------
# command implementations


def _cmd_solve_del(cfg: RunConfig, prefix: str, report):
    M = cfg.M
    op = cfg.operator(M)
    shot = solve_dirichlet(cfg.lagrangian, op, cfg.d_a, cfg.d_b,
                           cfg.a, cfg.b, M)
    sol = shot.solution
    grid = sol.grid
    ts = grid.times
    yvals = np.stack([sol.value_at_index(n) for n in grid.indices])
    names = ["y"]
    columns = [yvals]
    try:
        csol = solve_cel(cfg.lagrangian, cfg.d_a, cfg.d_b, cfg.a, cfg.b)
        columns.append(csol.sample(ts))
        names.append("z")
        zp = _maybe_zprime(cfg, csol, ts)
        if zp is not None:
            columns.append(zp)
            names.append("zp")
    except QuadlagError:
        pass

    d = cfg.lagrangian.dim
    _write_csv(prefix + ".csv", _series_header(d, names),
               _series_rows(ts, columns))

    worst = 0.0
    for n in range(2, M - 1):
        res = residual_del(cfg.lagrangian, op, sol, grid.time_of(grid.n_lo + n))
        worst = max(worst, float(np.abs(res).max()))
    scale = float(np.abs(yvals).max())
    report.append(f"command: solve-del  M={M}  epsilon={_fmt(cfg.epsilon(M))}")
    report.append(f"shooting margin |det| = {_fmt(abs(shot.shoot_det))}")
    report.append(f"max interior residual = {_fmt(worst)}  (solution scale {_fmt(scale)})")
    report.append(f"files: {prefix}.csv")


def _cmd_solve_cel(cfg: RunConfig, prefix: str, report):
    csol = solve_cel(cfg.lagrangian, cfg.d_a, cfg.d_b, cfg.a, cfg.b)
    ts = np.linspace(cfg.a, cfg.b, cfg.samples)
    zvals = csol.sample(ts)
    d = cfg.lagrangian.dim
    _write_csv(prefix + ".csv", _series_header(d, ["z"]),
               _series_rows(ts, [zvals]))
    res = max(float(np.abs(residual_cel(cfg.lagrangian, csol, t)).max())
              for t in np.linspace(cfg.a, cfg.b, 7)[1:-1])
    report.append("command: solve-cel")
    report.append(f"max sampled optimality residual = {_fmt(res)}")
    report.append(f"files: {prefix}.csv")


def _cmd_spectrum(cfg: RunConfig, prefix: str, report):
    op = cfg.operator(cfg.M)
    rep = spectrum(companion(cfg.lagrangian, op))
    head = ["index", "re_lambda", "im_lambda", "deviation", "phase",
            "unimodular", "multiple"]
    rows = []
    for j, lam in enumerate(rep.eigenvalues):
        rows.append([str(j), _fmt(lam.real), _fmt(lam.imag),
                     _fmt(rep.deviations[j]), _fmt(rep.phases[j]),
                     str(int(rep.unimodular[j])),
                     str(int(rep.multiplicity_flags[j]))])
    _write_csv(prefix + ".spectrum.csv", head, rows)
    n_uni = int(rep.unimodular.sum())
    report.append(f"command: spectrum  M={cfg.M}  epsilon={_fmt(cfg.epsilon(cfg.M))}")
    report.append(f"eigenvalues: {rep.eigenvalues.size}  unimodular: {n_uni}")
    report.append(f"max |.|-1 deviation = {_fmt(rep.deviations.max())}")
    report.append(f"eigenvector shape residual = {_fmt(rep.eigvec_residual)}")
    report.append(f"char-poly residual = {_fmt(rep.charpoly_residual)}")
    report.append(f"det(A) = {_fmt(rep.det_A.real)} + {_fmt(rep.det_A.imag)}i")
    report.append(f"files: {prefix}.spectrum.csv")


def _cmd_extend(cfg: RunConfig, prefix: str, report):
    M = cfg.M
    op = cfg.operator(M)
    shot = solve_dirichlet(cfg.lagrangian, op, cfg.d_a, cfg.d_b,
                           cfg.a, cfg.b, M)
    exp = modal_expansion(companion(cfg.lagrangian, op), shot.solution)
    ts = np.linspace(cfg.a, cfg.b, cfg.samples)
    yvals = np.stack([extend_pseudo_periodic(exp, float(t)) for t in ts])
    d = cfg.lagrangian.dim
    _write_csv(prefix + ".csv", _series_header(d, ["y"]),
               _series_rows(ts, [yvals]))

    grid = shot.solution.grid
    safe = safety_interval(grid.t0, grid.epsilon, cfg.a, cfg.b, op.N)
    worst = 0.0
    for n in safe.indices():
        gap = exp.at_node(n) - shot.solution.value_at_index(n)
        worst = max(worst, float(np.abs(gap).max()))
    report.append(f"command: extend  M={M}  epsilon={_fmt(cfg.epsilon(M))}")
    report.append(f"modes per bank: {exp.banks[0].mode_count}  banks: {len(exp.banks)}")
    report.append(f"max node mismatch on safe window = {_fmt(worst)}")
    report.append(f"files: {prefix}.csv")


def _report_converge(report, rep):
    report.append(f"verdict: {rep.verdict}")
    report.append(f"continuous margin = {_fmt(rep.continuous_margin)}")
    if math.isfinite(rep.limit_gap):
        report.append(f"sup |z' - z| = {_fmt(rep.limit_gap)}")
    for row in rep.rows:
        if row.singular:
            report.append(f"M={row.M}: singular shooting (margin "
                          f"{_fmt(row.shoot_margin)})")
            continue
        report.append(
            f"M={row.M}: sup|y-z| = {_fmt(row.sup_err_to_z)}  "
            f"sup|y-z'| = {_fmt(row.sup_err_to_zprime)}  "
            f"margin = {_fmt(row.shoot_margin)}")


def _converge_rows(rep):
    head = ["M", "epsilon", "sup_err_to_z", "sup_err_to_zprime",
            "shoot_margin", "max_phase_gap", "max_amplitude_gap",
            "residual_group_mass", "singular"]
    rows = []
    for row in rep.rows:
        rows.append([
            str(row.M), _fmt(row.epsilon), _fmt(row.sup_err_to_z),
            _fmt(row.sup_err_to_zprime), _fmt(row.shoot_margin),
            _fmt(row.phase_gaps.max() if row.phase_gaps.size else math.nan),
            _fmt(row.amplitude_gaps.max() if row.amplitude_gaps.size else math.nan),
            _fmt(row.residual_group_mass), str(int(row.singular)),
        ])
    return head, rows


def _cmd_converge(cfg: RunConfig, prefix: str, report):
    scenario = ConvergenceScenario(
        lagrangian=cfg.lagrangian, r=cfg.r, s=cfg.s, a=cfg.a, b=cfg.b,
        d_a=cfg.d_a, d_b=cfg.d_b, M_list=cfg.M_list, delta=cfg.delta,
        samples=cfg.samples)
    rep = run_scenario(scenario)
    head, rows = _converge_rows(rep)
    _write_csv(prefix + ".converge.csv", head, rows)
    report.append("command: converge")
    _report_converge(report, rep)
    report.append(f"files: {prefix}.converge.csv")
    return 2 if rep.verdict == "singular" else 0


# ---------------------------------------------------------------------------
# repro presets


def _repro_config(figure: str, out) -> RunConfig:
    L = QuadraticLagrangian(P=[[1.0]], Q=[[-0.23]])
    omega = math.sqrt(0.23)
    a = 0.0
    if figure == "figure2":
        rho = 1e-3
        K = round((30.0 - a) * omega / (2 * math.pi))
        b = a + (math.asin(rho) + 2 * K * math.pi) / omega
        r = s = 0.5
        M_list = [1000, 50000]
        preset = "half-half"
    elif figure == "figure3":
        b = 30.0
        r = s = 0.6
        M_list = [30, 120]
        preset = None
    else:
        b = 30.0
        r = s = 0.5
        M_list = [30, 120]
        preset = "half-half"
    return RunConfig(command="repro", lagrangian=L, r=r, s=s, N=1, a=a, b=b,
                     d_a=[12.0], d_b=[-14.0], M_list=M_list, delta=1.0,
                     samples=2048, out=out, figure=figure, preset=preset)


def _cmd_repro(cfg: RunConfig, prefix: str, report):
    L = cfg.lagrangian
    csol = solve_cel(L, cfg.d_a, cfg.d_b, cfg.a, cfg.b)
    ts = np.linspace(cfg.a, cfg.b, 1001)
    zvals = csol.sample(ts)
    with_zp = cfg.figure == "figure3"
    zpvals = _maybe_zprime(cfg, csol, ts) if with_zp else None
    d = L.dim
    files = []
    for M in cfg.M_list:
        op = cfg.operator(M)
        shot = solve_dirichlet(L, op, cfg.d_a, cfg.d_b, cfg.a, cfg.b, M)
        exp = modal_expansion(companion(L, op), shot.solution)
        yvals = exp.banks[0](ts)
        names = ["y", "z"]
        columns = [yvals, zvals]
        if zpvals is not None:
            names.append("zp")
            columns.append(zpvals)
        path = f"{prefix}.{cfg.figure}.M{M}.csv"
        _write_csv(path, _series_header(d, names), _series_rows(ts, columns))
        files.append(path)

    scenario = ConvergenceScenario(
        lagrangian=L, r=cfg.r, s=cfg.s, a=cfg.a, b=cfg.b, d_a=cfg.d_a,
        d_b=cfg.d_b, M_list=cfg.M_list, delta=cfg.delta, samples=cfg.samples)
    rep = run_scenario(scenario)
    report.append(f"command: repro {cfg.figure}")
    report.append(f"interval: [{_fmt(cfg.a)}, {_fmt(cfg.b)}]")
    _report_converge(report, rep)
    report.append("files: " + " ".join(files))
    return 2 if rep.verdict == "singular" else 0


# ---------------------------------------------------------------------------
# driver


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="quadlag",
        description="solve and analyze discrete/continuous quadratic "
                    "two-point problems")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        if name == "repro":
            p.add_argument("figure", choices=_FIGURES)
            p.add_argument("--config")
        else:
            p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--dump-config", action="store_true")
    return ap


_DISPATCH = {
    "solve-del": _cmd_solve_del,
    "solve-cel": _cmd_solve_cel,
    "spectrum": _cmd_spectrum,
    "extend": _cmd_extend,
    "converge": _cmd_converge,
    "repro": _cmd_repro,
}


def main(argv=None) -> int:
    try:
        ns = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return 3 if exc.code not in (0, None) else 0

    try:
        if ns.command == "repro" and ns.config is None:
            cfg = _repro_config(ns.figure, ns.out)
        else:
            try:
                with open(ns.config) as fh:
                    doc = json.load(fh)
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
            cfg = parse_config(doc, ns.command,
                               getattr(ns, "figure", None))
        if ns.out is not None:
            cfg.out = ns.out

        if ns.dump_config:
            print(json.dumps(cfg.to_json(), indent=2, sort_keys=True))
            return 0

        prefix = cfg.out if cfg.out is not None else "quadlag_out"
        report = []
        status = _DISPATCH[ns.command](cfg, prefix, report) or 0
        with open(prefix + ".report.txt", "w", newline="\n") as fh:
            fh.write("\n".join(report) + "\n")
        return status
    except ConfigError as exc:
        print(f"quadlag: config error: {exc}", file=sys.stderr)
        return 3
    except InvalidArgumentError as exc:
        print(f"quadlag: invalid request: {exc}", file=sys.stderr)
        return 3
    except ResonantProblemError as exc:
        print(f"quadlag: unsolvable problem: {exc}", file=sys.stderr)
        return 2
    except NumericFailureError as exc:
        print(f"quadlag: numeric failure: {exc}", file=sys.stderr)
        return 1
    except QuadlagError as exc:
        print(f"quadlag: error: {exc}", file=sys.stderr)
        return 1
    except np.linalg.LinAlgError as exc:
        print(f"quadlag: linear algebra failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
