"""Command-line experiment runner: config parsing, campaigns and CSV output."""

from __future__ import annotations

import argparse
import ast
import configparser
import math
import operator
import sys
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .averaging import OperatorConfig, consistency_residual
from .barrier import (choose_constants, verify_lemmas, verify_bounds, verify_key_inequality,
                      verify_phi, verify_polar_signs, verify_supersolution)
from .domains import DomainSpec, make_domain
from .fixed_point import SolveConfig, solve_dirichlet
from .grid import BoundaryData, build_lattice
from .radius import RadiusProfile, default_profile, validate_constants
from .reference import SmoothFunction

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_VIOLATION = 0, 2, 3, 4
MODES = ("solve", "eps_study", "verify_barrier", "verify_lemmas", "consistency")


class ConfigError(ValueError):
    pass


# -- boundary-data expressions ------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "sqrt": np.sqrt,
          "log": np.log, "abs": np.abs}
_CONSTS = {"pi": math.pi, "e": math.e}


def _variables(pts: np.ndarray) -> dict[str, np.ndarray]:
    env = {f"x{i + 1}": pts[:, i] for i in range(pts.shape[1])}
    env["r"] = np.linalg.norm(pts, axis=1)
    env["theta"] = np.arctan2(pts[:, 1], pts[:, 0])
    return env


def compile_expression(text: str) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized function of points from an arithmetic expression.

    Allowed: numbers, ``+ - * / ** ^``, parentheses, ``sin cos tan exp sqrt log abs``,
    the constants ``pi e``, coordinates ``x1 x2 x3``, ``r = |x|`` and the polar angle ``theta``.
    """
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None

    def check(node):
        if isinstance(node, ast.Expression):
            return check(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            check(node.left)
            check(node.right)
            return
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return check(node.operand)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS \
                and len(node.args) == 1 and not node.keywords:
            return check(node.args[0])
        if isinstance(node, ast.Name) and (node.id in _CONSTS or node.id in ("r", "theta", "x1", "x2", "x3")):
            return
        raise ConfigError(f"unsupported element {ast.dump(node)[:40]!r} in expression {text!r}")

    check(tree)

    def ev(node, env):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](ev(node.left, env), ev(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](ev(node.operand, env))
        if isinstance(node, ast.Call):
            return _FUNCS[node.func.id](ev(node.args[0], env))
        if node.id in _CONSTS:
            return _CONSTS[node.id]
        if node.id not in env:
            raise ConfigError(f"{node.id} is not defined in this dimension")
        return env[node.id]

    def func(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        with np.errstate(all="ignore"):
            out = ev(tree.body, _variables(pts))
        return np.broadcast_to(np.asarray(out, dtype=float), (len(pts),)).copy()

    func.expression = text
    return func


# -- configuration ------------------------------------------------------------

def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "solve"
    domain: str = "disk"
    dimension: int = 2
    radius: float = 1.0
    inner: float = 0.25
    outer: float = 1.0
    lower: tuple[float, ...] = ()
    upper: tuple[float, ...] = ()
    size: float = 1.0
    p: float = 2.0
    beta: float = 1.0
    lambda_: float | None = None
    lambda_cap: float | None = None
    epsilon: float = 1.0
    h: float = 1 / 32
    eps_list: tuple[float, ...] = (0.4, 0.2, 0.1)
    f: str = "1"
    reference: str = ""
    quad_points: int | None = None
    tol: float | None = None
    max_iter: int = 10 ** 6
    record_every: int = 0
    seed: int = 0
    output_dir: str = "out"
    warm_start: bool = True
    timing: bool = False
    points: str = "0.3 0.2; -0.2 0.45; 0.1 -0.5"
    y0: tuple[float, ...] = (1.5, 0.5)
    tests: str = "saddle, squared_distance"

    @property
    def profile(self) -> RadiusProfile:
        base = default_profile(self.dimension, self.p, self.epsilon)
        lam = base.lambda_ if self.lambda_ is None else self.lambda_
        cap = base.lambda_cap if self.lambda_cap is None else self.lambda_cap
        return RadiusProfile(self.beta, lam, cap, self.epsilon)

    @property
    def operator(self) -> OperatorConfig:
        return OperatorConfig(self.dimension, self.p, self.quad_points)

    @property
    def solve_config(self) -> SolveConfig:
        return SolveConfig(self.tol, self.max_iter, self.record_every)

    def make_domain(self) -> DomainSpec:
        n = self.dimension
        kw = {}
        if self.domain in ("disk", "ball"):
            kw = {"radius": self.radius}
        elif self.domain in ("annulus", "shell"):
            kw = {"inner": self.inner, "outer": self.outer}
        elif self.domain in ("square", "box"):
            kw = {"lower": self.lower or (0.0,) * n, "upper": self.upper or (1.0,) * n}
        elif self.domain == "l_shape":
            kw = {"size": self.size}
        return make_domain(self.domain, n, **kw)


_KEYS = {f.name.rstrip("_"): f for f in fields(ExperimentConfig)}


def _convert(key: str, text: str):
    f = _KEYS[key]
    kind = str(f.type)
    text = text.strip()
    if key == "mode":
        text = text.replace("-", "_")
        if text not in MODES:
            raise ValueError(f"mode must be one of {', '.join(MODES)}")
        return text
    if key in ("lambda", "lambda_cap", "quad_points", "tol"):
        if text.lower() in ("", "none", "default"):
            return None
        return int(text) if key == "quad_points" else float(text)
    if "tuple" in kind:
        return _floats(text)
    if kind in ("bool",):
        low = text.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError("expected a boolean")
        return low in ("true", "1", "yes")
    if kind == "int":
        v = float(text)
        if v != int(v):
            raise ValueError("expected an integer")
        return int(v)
    if kind == "float":
        return float(text)
    return text


def _line_numbers(text: str) -> dict[str, int]:
    out = {}
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        for sep in ("=", ":"):
            if sep in s and not s.startswith(("#", ";", "[")):
                out.setdefault(s.split(sep, 1)[0].strip().lower(), i)
                break
    return out


def load_config(path: str | None, overrides: list[str] = ()) -> ExperimentConfig:
    """Flat ``key = value`` file (a section header is optional) plus ``key=value`` overrides."""
    values: dict[str, object] = {}
    where: dict[str, str] = {}
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        lines = _line_numbers(text)
        if not text.lstrip().startswith("["):
            text = "[experiment]\n" + text
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for section in parser.sections():
            for key, raw in parser.items(section):
                where[key] = f"{path}:{lines.get(key, '?')}"
                values[key] = raw
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        key = key.strip().lower()
        where[key] = f"--set {item}"
        values[key] = raw
    kwargs = {}
    for key, raw in values.items():
        if key not in _KEYS:
            raise ConfigError(f"{where[key]}: unknown key {key!r}")
        try:
            kwargs[_KEYS[key].name] = _convert(key, str(raw))
        except ValueError as exc:
            raise ConfigError(f"{where[key]}: bad value for {key!r}: {exc}") from None
    try:
        cfg = ExperimentConfig(**kwargs)
        validate_config(cfg)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    """Constant checks run before any computation."""
    if cfg.mode not in MODES:
        raise ConfigError(f"unknown mode {cfg.mode!r}")
    dom = cfg.make_domain()
    cfg.operator
    prof = cfg.profile
    if cfg.mode in ("solve", "eps_study", "consistency"):
        rep = validate_constants(cfg.dimension, cfg.p, prof.beta, prof.lambda_, prof.lambda_cap, dom)
        if not rep.ok:
            raise ConfigError("constants rejected: " + "; ".join(rep.violations))
    if cfg.mode == "eps_study":
        e = cfg.eps_list
        if not e or any(b >= a for a, b in zip(e, e[1:])) or not 0 < e[-1] <= e[0] <= 1:
            raise ConfigError("eps_list must be strictly decreasing within (0, 1]")
    if cfg.mode in ("solve", "eps_study"):
        if not 0 < cfg.h < dom.diameter / 4:
            raise ConfigError("h must lie in (0, diam/4)")
        compile_expression(cfg.f)
        if cfg.reference:
            compile_expression(cfg.reference)


# -- campaigns ----------------------------------------------------------------

@dataclass(frozen=True)
class StudyRow:
    epsilon: float
    iterations: int
    d_final: float
    converged: bool
    sup_error: float
    rms_error: float
    wall_time: float


@dataclass(frozen=True)
class StudyResult:
    rows: tuple[StudyRow, ...]
    solutions: tuple = field(default=(), repr=False)

    def to_csv(self, path, timing: bool = False) -> None:
        with open(path, "w") as fh:
            cols = ["epsilon", "iterations", "d_final", "converged", "sup_error", "rms_error"]
            fh.write(",".join(cols + (["wall_time"] if timing else [])) + "\n")
            for r in self.rows:
                vals = [f"{r.epsilon:.17g}", str(r.iterations), f"{r.d_final:.17g}", str(int(r.converged)),
                        f"{r.sup_error:.17g}", f"{r.rms_error:.17g}"]
                if timing:
                    vals.append(f"{r.wall_time:.6f}")
                fh.write(",".join(vals) + "\n")

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.rows)


def eps_study(f: BoundaryData, lattice, profile: RadiusProfile, eps_list, cfg: OperatorConfig,
              scfg: SolveConfig, reference: Callable | None = None, warm_start: bool = True) -> StudyResult:
    """Solve along a decreasing epsilon ladder.

    With ``warm_start`` each solve starts from the previous limit, which is a
    valid sup-norm preserving extension of the same data.
    """
    rows, sols = [], []
    prev = None
    for eps in eps_list:
        t0 = time.perf_counter()
        rep = solve_dirichlet(f, lattice, profile.with_epsilon(eps), cfg, scfg,
                              initial=prev if warm_start else None)
        wall = time.perf_counter() - t0
        if reference is not None:
            diff = rep.solution.values - np.asarray(reference(lattice.nodes), dtype=float)
            sup, rms = float(np.max(np.abs(diff))), float(np.sqrt(np.mean(diff ** 2)))
        else:
            sup = rms = float("nan")
        rows.append(StudyRow(float(eps), rep.iterations, float(rep.increments[-1]), rep.converged, sup, rms, wall))
        sols.append(rep)
        prev = rep.solution
    return StudyResult(tuple(rows), tuple(sols))


def _write_manifest(out: Path, cfg: ExperimentConfig) -> None:
    with open(out / "manifest.csv", "w") as fh:
        fh.write("key,value\n")
        fh.write(f"library_version,{__version__}\n")
        for f in fields(cfg):
            v = getattr(cfg, f.name)
            if isinstance(v, tuple):
                v = " ".join(f"{x:.17g}" for x in v)
            elif isinstance(v, float):
                v = f"{v:.17g}"
            text = str(v)
            if any(c in text for c in ',"\n'):
                text = '"' + text.replace('"', '""') + '"'
            fh.write(f"{f.name.rstrip('_')},{text}\n")


def _summary(out: Path, reports) -> bool:
    ok = True
    with open(out / "summary.csv", "w") as fh:
        fh.write("check,worst_margin,tolerance,count,skipped,ok\n")
        for r in reports:
            fh.write(f"{r.name},{r.worst:.17g},{r.tol:.17g},{r.count},{r.skipped},{int(r.ok)}\n")
            r.to_csv(out / f"margins_{r.name}.csv")
            ok &= r.ok
    return ok


def _print(msg: str) -> None:
    print(msg, flush=True)


def run(cfg: ExperimentConfig) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out, cfg)
    dom = cfg.make_domain()
    if cfg.mode in ("solve", "eps_study"):
        lat = build_lattice(dom, cfg.h)
        f = BoundaryData(compile_expression(cfg.f))
        ref = compile_expression(cfg.reference) if cfg.reference else None
        if cfg.mode == "solve":
            rep = solve_dirichlet(f, lat, cfg.profile, cfg.operator, cfg.solve_config)
            rep.solution.to_csv(out / "solution.csv")
            rep.increments_to_csv(out / "increments.csv")
            _print(f"solve: {rep.iterations} iterations, last increment {rep.increments[-1]:.3e}, "
                   f"converged={rep.converged}")
            return EXIT_OK if rep.converged else EXIT_NONCONVERGED
        res = eps_study(f, lat, cfg.profile, cfg.eps_list, cfg.operator, cfg.solve_config, ref, cfg.warm_start)
        res.to_csv(out / "study.csv", cfg.timing)
        for k, rep in enumerate(res.solutions):
            rep.solution.to_csv(out / f"solution_{k}.csv")
            rep.increments_to_csv(out / f"increments_{k}.csv")
        for r in res.rows:
            _print(f"eps={r.epsilon:g}: iterations={r.iterations} sup_error={r.sup_error:.4e}")
        return EXIT_OK if res.converged else EXIT_NONCONVERGED
    if cfg.mode == "verify_barrier":
        fam = choose_constants(cfg.dimension, dom.cone_alpha, dom.cone_r)
        reports = [verify_key_inequality(fam)]
        reports += verify_polar_signs(fam)
        reports += verify_phi(cfg.dimension, alphas=(dom.cone_alpha,))
        reports += verify_bounds(fam, seed=cfg.seed, domain=dom)
        reports += verify_supersolution(fam, which="U") + verify_supersolution(fam, which="w")
        ok = _summary(out, reports)
        _print(f"verify_barrier: {sum(not r.ok for r in reports)} violated checks of {len(reports)}")
        return EXIT_OK if ok else EXIT_VIOLATION
    if cfg.mode == "verify_lemmas":
        reports = verify_lemmas()
        ok = _summary(out, reports)
        _print(f"verify_lemmas: {sum(not r.ok for r in reports)} violated checks of {len(reports)}")
        return EXIT_OK if ok else EXIT_VIOLATION
    return _run_consistency(cfg, dom, out)


def _test_function(name: str, cfg: ExperimentConfig) -> SmoothFunction:
    from .reference import saddle, squared_distance
    if name == "saddle":
        return saddle()
    if name == "squared_distance":
        return squared_distance(np.asarray(cfg.y0[: cfg.dimension], dtype=float))
    return SmoothFunction(compile_expression(name))


def _run_consistency(cfg: ExperimentConfig, dom: DomainSpec, out: Path) -> int:
    pts = [np.array(_floats(chunk)) for chunk in cfg.points.split(";") if chunk.strip()]
    with open(out / "consistency.csv", "w") as fh:
        fh.write("function," + ",".join(f"x{i + 1}" for i in range(cfg.dimension))
                 + ",epsilon,rho,residual,scaled_residual\n")
        for name in (t.strip() for t in cfg.tests.split(",") if t.strip()):
            phi = _test_function(name, cfg)
            for x in pts:
                for eps in cfg.eps_list:
                    prof = cfg.profile.with_epsilon(eps)
                    res = consistency_residual(phi, x, prof, cfg.operator, dom)
                    rho = float(prof.from_distance(dom.distance(x[None, :]))[0])
                    fh.write(f"{name}," + ",".join(f"{c:.17g}" for c in x)
                             + f",{eps:.17g},{rho:.17g},{res:.17g},{res / eps ** 2:.17g}\n")
    _print(f"consistency: wrote {out / 'consistency.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pharmonious", description="p-harmonious averaging experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("solve", "eps-study", "verify-barrier", "verify-lemmas", "consistency"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="INI-style key = value file")
        sp.add_argument("--threads", type=int, default=None, help="cap on worker threads")
        sp.add_argument("--output", help="output directory (overrides output_dir)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    mode = args.command.replace("-", "_")
    overrides = list(args.set) + [f"mode={mode}"]
    if args.output:
        overrides.append(f"output_dir={args.output}")
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads:
        import numba
        numba.set_num_threads(max(1, min(args.threads, numba.config.NUMBA_NUM_THREADS)))
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
