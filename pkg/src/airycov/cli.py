"""Command-line front end.

Subcommands write CSV (header row, ``%.17g`` numbers, LF endings) and, for
``figure``, an SVG plot. Every run prints one JSON manifest line to stderr
with the parameters, seed, version, wall-clock time, and output paths.

Exit codes: 0 success, 1 numerical or self-test failure, 2 bad arguments.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from . import __version__, airy, covariance, fredholm, kernels, quadrature, rmt
from .fredholm import FredholmError, JointProblem
from .kernels import Process
from .processes import TwoPointQuery, two_point_cdf

CONFIG_ENV = "AIRYCOV_CONFIG"

# desk and paper scale Monte Carlo settings for the figures
FIGURE_SCALES = {
    "desk": {"sizes": (64,), "K": 100_000, "R": 10},
    "paper": {"sizes": (64, 256), "K": 1_000_000, "R": 20},
}
FIGURE_UMAX = {1: 2.5, 2: 4.0, 3: 10.0}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- output


def fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return "%.17g" % x


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(c if isinstance(c, str) else fmt(c) for c in row) + "\n")


def _manifest(args: argparse.Namespace, outputs: list[str], start: float) -> None:
    params = {k: v for k, v in vars(args).items() if k not in ("func",) and not k.startswith("_")}
    line = {
        "subcommand": args.command,
        "params": params,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "wall_clock_s": round(time.time() - start, 3),
        "outputs": outputs,
    }
    print(json.dumps(line, sort_keys=True, default=str), file=sys.stderr)


# ---------------------------------------------------------------- SVG


class Axes:
    """Maps data to an 800 x 600 canvas, linear or log-log."""

    width, height = 800, 600
    left, right, top, bottom = 90, 30, 40, 70

    def __init__(self, xlim, ylim, log=False):
        self.log = log
        self.xlim = tuple(map(self._t, xlim))
        self.ylim = tuple(map(self._t, ylim))

    def _t(self, v):
        return math.log10(v) if self.log else float(v)

    def x(self, v):
        a, b = self.xlim
        return self.left + (self._t(v) - a) / (b - a) * (self.width - self.left - self.right)

    def y(self, v):
        a, b = self.ylim
        return self.height - self.bottom - (self._t(v) - a) / (b - a) * (
            self.height - self.top - self.bottom
        )

    def ticks(self, lim):
        a, b = lim
        if self.log:
            return [10.0**k for k in range(math.ceil(a - 1e-9), math.floor(b + 1e-9) + 1)]
        step = 10 ** math.floor(math.log10((b - a) / 2))
        for mult in (1, 2, 5, 10):
            if (b - a) / (step * mult) <= 8:
                step *= mult
                break
        first = math.ceil(a / step - 1e-9) * step
        return list(np.arange(first, b + 1e-9 * step, step))


def _limits(values, log, pad=0.05):
    v = np.asarray([x for x in values if math.isfinite(x) and (x > 0 or not log)])
    if log:
        lo, hi = math.floor(np.log10(v.min())), math.ceil(np.log10(v.max()))
        return 10.0**lo, 10.0 ** max(hi, lo + 1)
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        hi = lo + 1.0
    span = hi - lo
    return lo - pad * span, hi + pad * span


COLOURS = ("#1f4e9c", "#c0392b", "#2e8b57", "#7d3c98", "#555555")


def render_svg(title: str, xlabel: str, ylabel: str, curves, scatters, log=False) -> str:
    """``curves``: ``(label, x, y)``; ``scatters``: ``(label, x, y, err)``."""
    xs, ys = [], []
    for _, x, y in curves:
        xs += list(x)
        ys += list(y)
    for _, x, y, err in scatters:
        xs += list(x)
        e = np.zeros(len(y)) if err is None else np.nan_to_num(np.asarray(err))
        ys += list(np.asarray(y) + e) + list(np.asarray(y) - e)
    ax = Axes(_limits(xs, log), _limits(ys, log), log)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="800" height="600" '
        'viewBox="0 0 800 600">',
        '<rect x="0" y="0" width="800" height="600" fill="white"/>',
        f'<text x="400" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>',
    ]
    x0, x1 = ax.left, ax.width - ax.right
    y0, y1 = ax.height - ax.bottom, ax.top
    out.append(f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
               'fill="none" stroke="black"/>')
    for t in ax.ticks(ax.xlim):
        px = ax.x(t)
        out.append(f'<line x1="{px:.2f}" y1="{y0}" x2="{px:.2f}" y2="{y0 + 6}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{y0 + 22}" text-anchor="middle" font-size="12">'
                   f"{t:g}</text>")
    for t in ax.ticks(ax.ylim):
        py = ax.y(t)
        out.append(f'<line x1="{x0 - 6}" y1="{py:.2f}" x2="{x0}" y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{x0 - 10}" y="{py + 4:.2f}" text-anchor="end" font-size="12">'
                   f"{t:g}</text>")
    out.append(f'<text x="{(x0 + x1) / 2}" y="{ax.height - 25}" text-anchor="middle" '
               f'font-size="14">{escape(xlabel)}</text>')
    out.append(f'<text x="25" y="{(y0 + y1) / 2}" text-anchor="middle" font-size="14" '
               f'transform="rotate(-90 25 {(y0 + y1) / 2})">{escape(ylabel)}</text>')

    def visible(x, y):
        return math.isfinite(y) and (not log or (x > 0 and y > 0))

    legend = []
    for k, (label, x, y) in enumerate(curves):
        colour = COLOURS[k % len(COLOURS)]
        pts = " ".join(f"{ax.x(a):.2f},{ax.y(b):.2f}" for a, b in zip(x, y) if visible(a, b))
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="2" points="{pts}"/>')
        legend.append((label, colour, "line"))
    for k, (label, x, y, err) in enumerate(scatters, start=len(curves)):
        colour = COLOURS[k % len(COLOURS)]
        out.append(f'<g fill="none" stroke="{colour}">')
        for i, (a, b) in enumerate(zip(x, y)):
            if not visible(a, b):
                continue
            px, py = ax.x(a), ax.y(b)
            if err is not None and math.isfinite(err[i]) and err[i] > 0:
                lo = b - err[i]
                top = ax.y(b + err[i])
                bot = ax.y(lo) if (lo > 0 or not log) else y0
                out.append(f'<line x1="{px:.2f}" y1="{top:.2f}" x2="{px:.2f}" y2="{bot:.2f}"/>')
            out.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="3"/>')
        out.append("</g>")
        legend.append((label, colour, "dot"))
    for k, (label, colour, kind) in enumerate(legend):
        ly = y1 + 20 + 20 * k
        if kind == "line":
            out.append(f'<line x1="{x1 - 190}" y1="{ly}" x2="{x1 - 160}" y2="{ly}" '
                       f'stroke="{colour}" stroke-width="2"/>')
        else:
            out.append(f'<circle cx="{x1 - 175}" cy="{ly}" r="3" fill="none" stroke="{colour}"/>')
        out.append(f'<text x="{x1 - 150}" y="{ly + 4}" font-size="12">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- subcommands


def cmd_cov(args) -> list[str]:
    curve = covariance.covariance_curve(args.process, args.umax, args.du, tol=args.tol)
    if curve.failed:
        raise FredholmError(f"covariance failed at u = {list(curve.failed)}")
    write_csv(args.out, ["u", "cov"], zip(curve.grid, curve.values))
    return [str(args.out)]


def cmd_joint(args) -> list[str]:
    q = TwoPointQuery(args.process, args.u, args.s1, args.s2, args.tol)
    value = two_point_cdf(q)
    row = [args.process, args.u, args.s1, args.s2, value]
    header = ["process", "u", "s1", "s2", "value"]
    if args.out is None:
        print(",".join(header))
        print(",".join(c if isinstance(c, str) else fmt(c) for c in row))
        return []
    write_csv(args.out, header, [row])
    return [str(args.out)]


def _dyson(ensemble, n, k, r, seed, dt, gamma, maxlag):
    cfg = rmt.EnsembleConfig(ensemble, n, k, seed=seed, gamma=gamma, dt=dt, realizations=r)
    series = rmt.run_realizations(cfg)
    return rmt.autocovariance(series, maxlag)


def cmd_dyson(args) -> list[str]:
    est = _dyson(args.ensemble, args.N, args.K, args.R, args.seed, args.dt, args.gamma, args.maxlag)
    stderr = est.stderr if est.has_stderr else [None] * len(est.lags)
    write_csv(args.out, ["u", "cov", "stderr"], zip(est.lags, est.cov, stderr))
    return [str(args.out)]


def _figure_data(which: int, scale: dict, du: float, seed: int):
    umax = FIGURE_UMAX[which]
    rows, curves, scatters = [], [], []
    if which in (1, 2):
        process = Process.AIRY1 if which == 1 else Process.AIRY2
        ens = rmt.Ensemble.GOE if which == 1 else rmt.Ensemble.GUE
        curve = covariance.covariance_curve(process, umax, du)
        if curve.failed:
            raise FredholmError(f"covariance failed at u = {list(curve.failed)}")
        name = "g1" if which == 1 else "g2"
        curves.append((name, curve.grid, curve.values))
        rows += [(name, u, v, None) for u, v in zip(curve.grid, curve.values)]
        for n in scale["sizes"]:
            cfg = rmt.EnsembleConfig(ens, n, scale["K"], seed=seed, realizations=scale["R"])
            maxlag = int(math.floor(umax / cfg.du + 1e-9))
            est = rmt.autocovariance(rmt.run_realizations(cfg), maxlag)
            label = f"f_{ens.value}_N{n}"
            scatters.append((label, est.lags, est.cov, est.stderr))
            err = est.stderr if est.has_stderr else [None] * len(est.lags)
            rows += [(label, u, v, e) for u, v, e in zip(est.lags, est.cov, err)]
        title = ("Airy1 covariance vs GOE largest eigenvalue" if which == 1
                 else "Airy2 covariance vs GUE largest eigenvalue")
        return title, rows, curves, scatters, False
    for n in scale["sizes"]:
        goe = rmt.EnsembleConfig("goe", n, scale["K"], seed=seed, realizations=scale["R"])
        gue = rmt.EnsembleConfig("gue", n, scale["K"], seed=seed, realizations=scale["R"])
        lag_goe = int(math.floor(umax / goe.du + 1e-9))
        lag_gue = int(math.floor(2 * umax / gue.du + 1e-9))
        f_goe = rmt.autocovariance(rmt.run_realizations(goe), lag_goe)
        f_gue = rmt.autocovariance(rmt.run_realizations(gue), lag_gue)
        label = f"f_goe_N{n}"
        scatters.append((label, f_goe.lags, f_goe.cov, f_goe.stderr))
        rows += [(label, u, v, e) for u, v, e in zip(
            f_goe.lags, f_goe.cov, f_goe.stderr if f_goe.has_stderr else [None] * len(f_goe.lags))]
        # half the GUE covariance at twice the time, plotted against u
        half_u = 0.5 * f_gue.lags
        half_cov = 0.5 * f_gue.cov
        half_err = 0.5 * f_gue.stderr if f_gue.has_stderr else None
        label = f"half_f_gue_2u_N{n}"
        scatters.append((label, half_u, half_cov, half_err))
        rows += [(label, u, v, e) for u, v, e in zip(
            half_u, half_cov, half_err if half_err is not None else [None] * len(half_u))]
    guide_u = np.geomspace(0.5, umax, 40)
    curves.append(("u^-2", guide_u, guide_u**-2))
    rows += [("u^-2", u, u**-2, None) for u in guide_u]
    return "Rescaled correlation functions, GOE and GUE", rows, curves, scatters, True


def cmd_figure(args) -> list[str]:
    scale = dict(FIGURE_SCALES[args.scale])
    if args.K is not None:
        scale["K"] = args.K
    if args.R is not None:
        scale["R"] = args.R
    if args.N is not None:
        scale["sizes"] = tuple(args.N)
    svg_path = Path(str(args.out) + ".svg")
    csv_path = Path(str(args.out) + ".csv")
    try:
        title, rows, curves, scatters, log = _figure_data(args.which, scale, args.du, args.seed)
        write_csv(csv_path, ["series", "u", "value", "stderr"], rows)
        svg = render_svg(title, "u", "covariance", curves, scatters, log=log)
        with open(svg_path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(svg)
    except BaseException:
        for p in (svg_path, csv_path):
            if p.exists():
                p.unlink()
        raise
    return [str(csv_path), str(svg_path)]


# ---------------------------------------------------------------- self-test


def _brute_force_lambda_integral(t: float, s: float, s2: float, lo: float, hi: float) -> float:
    # panel Gauss-Legendre over [lo, hi] with scipy's Airy function
    from scipy import special

    width = 0.25
    panels = max(1, math.ceil((hi - lo) / width))
    ref = quadrature.gauss_legendre(16, 0.0, (hi - lo) / panels)
    lam = (lo + np.arange(panels)[:, None] * (hi - lo) / panels + ref.nodes[None, :]).ravel()
    w = np.tile(ref.weights, panels)
    a1 = special.airy(s + lam)[0]
    a2 = special.airy(s2 + lam)[0]
    return float(np.sum(w * np.exp(t * lam) * a1 * a2))


KERNEL_CHECK_POINTS = ((0.0, 0.5, 0.5, 0.1), (0.0, -1.0, 1.0, 0.3), (0.2, 1.0, 1.7, -0.5))


def kernel_identity_errors() -> list[tuple[float, float]]:
    """For each check point: (closed-form error, kernel error) against brute force."""
    errs = []
    for u, s, u2, s2 in KERNEL_CHECK_POINTS:
        t = u2 - u
        neg = _brute_force_lambda_integral(t, s, s2, -40.0 / t - 20.0, 0.0)
        pos = _brute_force_lambda_integral(t, s, s2, 0.0, 40.0)
        full = float(kernels.full_line_integral(t, s, s2))
        errs.append((abs(full - (neg + pos)), abs(kernels.airy2_kernel(u, s, u2, s2) + neg)))
    return errs


def selftest_checks() -> list[tuple[str, bool, str]]:
    results = []

    def check(name, fn):
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))

    def rank_one():
        prob = JointProblem("airy2", [0.0], [0.0], n=40)
        value = fredholm.evaluate(prob, kernel=lambda u, x, u2, y: np.exp(-(x[:, None] + y[None, :])))
        return abs(value - 0.5) <= 1e-12, f"det = {value:.15f}"

    def zero_kernel():
        prob = JointProblem("airy2", [0.0], [0.0], n=20)
        value = fredholm.evaluate(prob, kernel=lambda u, x, u2, y: np.zeros((len(x), len(y))))
        return value == 1.0, f"det = {value!r}"

    def airy_values():
        v0 = airy.airy_ai(0.0)
        v1 = airy.airy_ai(1.0)
        err = max(
            abs(v0.ai - 0.35502805388781724),
            abs(v0.ai_prime + 0.25881940379280680),
            abs(v1.ai - 0.13529241631288141),
        )
        return err <= 1e-13, f"max error {err:.2e}"

    def gauss_exactness():
        rule = quadrature.gauss_legendre(2, 0.0, 1.0)
        err = abs(rule.integrate(lambda x: x**3) - 0.25)
        return err <= 1e-15, f"error {err:.2e}"

    def cc_exp():
        rule = quadrature.clenshaw_curtis(100, -1.0, 1.0)
        err = abs(rule.integrate(np.exp) - (math.e - 1.0 / math.e))
        return err <= 1e-12, f"error {err:.2e}"

    def semi_infinite():
        err = abs(quadrature.semi_infinite_rule(0.0, 40).integrate(lambda x: np.exp(-x)) - 1.0)
        return err <= 1e-10, f"error {err:.2e}"

    def kernel_identity():
        errs = kernel_identity_errors()
        worst = max(max(e) for e in errs)
        return worst <= 1e-8, f"max error {worst:.2e}"

    check("rank-one determinant", rank_one)
    check("zero kernel determinant", zero_kernel)
    check("Airy values", airy_values)
    check("Gauss-Legendre exactness", gauss_exactness)
    check("Clenshaw-Curtis exp", cc_exp)
    check("semi-infinite rule", semi_infinite)
    check("Airy2 kernel identity", kernel_identity)
    return results


def cmd_selftest(args) -> list[str]:
    results = selftest_checks()
    width = max(len(name) for name, _, _ in results)
    for name, ok, detail in results:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
    if not all(ok for _, ok, _ in results):
        raise SelfTestFailure("self-test failed")
    return []


class SelfTestFailure(Exception):
    pass


# ---------------------------------------------------------------- parsing


def read_config(path) -> dict[str, str]:
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (p.strip() for p in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_float(text):
    v = float(text)
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _nonneg_float(text):
    v = float(text)
    if not (math.isfinite(v) and v >= 0):
        raise argparse.ArgumentTypeError(f"expected a number >= 0, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="airycov", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value file; flags take precedence")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("cov", help="covariance curve g(u) as CSV")
    p.add_argument("--process", choices=[e.value for e in Process])
    p.add_argument("--umax", type=_nonneg_float)
    p.add_argument("--du", type=_positive_float)
    p.add_argument("--tol", type=_positive_float)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_cov, _required=("process", "umax", "du", "out"), _defaults={"tol": 1e-14})

    p = sub.add_parser("joint", help="single two-point distribution value")
    p.add_argument("--process", choices=[e.value for e in Process])
    p.add_argument("--u", type=_nonneg_float)
    p.add_argument("--s1", type=float)
    p.add_argument("--s2", type=float)
    p.add_argument("--tol", type=_positive_float)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_joint, _required=("process", "u", "s1", "s2"), _defaults={"tol": 1e-12})

    p = sub.add_parser("dyson", help="largest-eigenvalue autocovariance by Monte Carlo")
    p.add_argument("--ensemble", choices=[e.value for e in rmt.Ensemble])
    p.add_argument("--N", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--R", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--dt", type=_positive_float)
    p.add_argument("--gamma", type=_positive_float)
    p.add_argument("--maxlag", type=int)
    p.add_argument("--out", type=Path)
    p.set_defaults(
        func=cmd_dyson,
        _required=("ensemble", "N", "K", "out"),
        _defaults={"R": 1, "seed": 0, "dt": None, "gamma": 0.5, "maxlag": 40},
    )

    p = sub.add_parser("figure", help="SVG + CSV for one of the three comparison plots")
    p.add_argument("--which", type=int, choices=(1, 2, 3))
    p.add_argument("--scale", choices=tuple(FIGURE_SCALES))
    p.add_argument("--out", help="output path prefix; .svg and .csv are appended")
    p.add_argument("--seed", type=int)
    p.add_argument("--du", type=_positive_float, help="u spacing of the covariance line")
    p.add_argument("--K", type=int, help="override the Monte Carlo chain length")
    p.add_argument("--R", type=int, help="override the number of realizations")
    p.add_argument("--N", type=int, nargs="+", help="override the matrix sizes")
    p.set_defaults(
        func=cmd_figure,
        _required=("which", "out"),
        _defaults={"scale": "desk", "seed": 0, "du": 0.1, "K": None, "R": None, "N": None},
    )

    p = sub.add_parser("selftest", help="run built-in oracle checks")
    p.set_defaults(func=cmd_selftest, _required=(), _defaults={})
    return parser


def _apply_config(args, parser) -> None:
    path = args.config or os.environ.get(CONFIG_ENV)
    config = read_config(path) if path else {}
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions if a.dest != "help"}
    for key, raw in config.items():
        if key not in actions:
            continue
        if getattr(args, key) is None:
            conv = actions[key].type or str
            try:
                value = [conv(v) for v in raw.split()] if actions[key].nargs == "+" else conv(raw)
            except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config {key}={raw!r}: {exc}") from None
            setattr(args, key, value)
    for key, value in args._defaults.items():
        if getattr(args, key) is None:
            setattr(args, key, value)
    missing = [k for k in args._required if getattr(args, k) is None]
    if missing:
        raise UsageError(f"{args.command}: missing " + ", ".join("--" + k for k in missing))
    if args.command == "figure":
        args.out = Path(args.out)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    start = time.time()
    try:
        args = parser.parse_args(argv)
        _apply_config(args, parser)
        outputs = args.func(args)
    except UsageError as exc:
        print(f"airycov: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"airycov: error: {exc}", file=sys.stderr)
        return 2
    except SelfTestFailure as exc:
        print(f"airycov: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"airycov: numerical failure: {exc}", file=sys.stderr)
        return 1
    _manifest(args, outputs, start)
    return 0


if __name__ == "__main__":
    sys.exit(main())
