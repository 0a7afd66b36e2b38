"""Command-line interface: ``simulate``, ``fit``, ``realdata`` and ``plot``.

Exit codes are 0 on success, 1 when a computation fails and 2 for usage or
input errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from swtle.adjust import (
    BandwidthPair,
    BasisSpec,
    GuardPolicy,
    basis_adjust_fixed,
    basis_adjust_random,
    sw_tle_fixed,
    sw_tle_random,
    sw_tle_semiparam,
)
from swtle.bandwidth import (
    BandwidthGrid,
    FitRecipe,
    log_grid,
    select_bandwidths,
    select_nw_bandwidth,
)
from swtle.baselines import f_nw, q_nw, sa_estimate, sa_weights, wa_estimate
from swtle.errors import ConvergenceError, ParameterError, SelectionError
from swtle.experiments import (
    ESTIMATORS,
    NOISE_SD,
    Scenario,
    ScenarioConfig,
    ScenarioFailure,
    run_scenario,
)
from swtle.kernel_core import (
    EPANECHNIKOV,
    GAUSSIAN,
    FixedDesignSample,
    RandomDesignSample,
    pooled,
)
from swtle.nls import ParametricModel

EXIT_OK = 0
EXIT_COMPUTE = 1
EXIT_USAGE = 2

KERNELS = {"gaussian": GAUSSIAN, "epanechnikov": EPANECHNIKOV}
FIT_METHODS = (
    "sw-tle-fixed", "sw-tle-random", "basis-fixed", "basis-random", "semiparametric",
    "q-nw", "f-nw", "sa", "wa",
)


class InputError(Exception):
    """Malformed flags or input files (exit code 2)."""


def _exponential(x, theta):
    return theta[0] * np.exp(theta[1] * x)


def _exponential_jac(x, theta):
    e = np.exp(theta[1] * x)
    return np.column_stack([e, theta[0] * x * e])


MODELS = {
    "exponential": ParametricModel(_exponential, 2, _exponential_jac, "exponential"),
}


# ---------------------------------------------------------------------------
# CSV helpers


def _fmt(value: float) -> str:
    return repr(float(value))


def _read_rows(path: str | Path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            rows = [r for r in csv.reader(fh) if any(cell.strip() for cell in r)]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    if not rows:
        raise InputError(f"{path}: empty file (a header row is required)")
    return [h.strip() for h in rows[0]], rows[1:]


def _find_column(header: Sequence[str], aliases: Sequence[str]) -> int | None:
    """Index of the first header starting with one of ``aliases`` (case-insensitive)."""
    norm = [h.strip().lower() for h in header]
    for alias in aliases:
        for i, h in enumerate(norm):
            if h == alias:
                return i
    for alias in aliases:
        for i, h in enumerate(norm):
            if h.startswith(alias):
                return i
    return None


def read_columns(path: str | Path, wanted: dict[str, Sequence[str]]) -> dict[str, np.ndarray]:
    """Numeric columns of a CSV, looked up by header aliases.

    Raises:
        InputError: naming missing columns, or the row numbers of cells that
            are not finite numbers.
    """
    header, rows = _read_rows(path)
    index = {name: _find_column(header, aliases) for name, aliases in wanted.items()}
    missing = [name for name, i in index.items() if i is None]
    if missing:
        raise InputError(f"{path}: missing column(s) {', '.join(missing)}; found {header}")
    if not rows:
        raise InputError(f"{path}: no data rows")
    out: dict[str, np.ndarray] = {}
    for name, i in index.items():
        values = np.empty(len(rows))
        bad = []
        for r, row in enumerate(rows):
            try:
                values[r] = float(row[i])
            except (IndexError, ValueError):
                values[r] = math.nan
            if not math.isfinite(values[r]):
                bad.append(r + 2)  # 1-based, after the header
        if bad:
            shown = ", ".join(map(str, bad[:10])) + (" ..." if len(bad) > 10 else "")
            raise InputError(f"{path}: column {name!r} has non-numeric cells on rows {shown}")
        out[name] = values
    return out


def read_xy(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    cols = read_columns(path, {"x": ("x",), "y": ("y",)})
    return cols["x"], cols["y"]


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def output_path(prefix: str, suffix: str) -> Path:
    """``prefix`` with ``suffix`` appended unless it already ends with it."""
    return Path(prefix if prefix.endswith(suffix) else prefix + suffix)


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _parse_list(text: str, kind=float) -> list:
    try:
        return [kind(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise InputError(f"cannot parse list {text!r}") from exc


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = Scenario(args.scenario)
    if scenario is Scenario.SIMILAR and (args.a is None or args.b is None):
        raise InputError("--scenario similar requires both --a and --b")
    sizes = _parse_list(args.np, int)
    estimators = tuple(_parse_list(args.estimators, str)) if args.estimators else None
    try:
        config = ScenarioConfig(
            scenario,
            n_p=tuple(sizes) if len(sizes) != 1 else sizes[0],
            n_q=args.nq,
            a=args.a,
            b=args.b,
            sigma_p=args.sigma_p,
            sigma_q=args.sigma_q,
            reps=args.reps,
            seed=args.seed,
            estimators=estimators,
            eval_points=args.eval_points,
            trim=args.trim,
        )
    except ParameterError as exc:
        raise InputError(str(exc)) from exc

    status = EXIT_OK
    try:
        report = run_scenario(config, workers=args.threads)
    except ScenarioFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        report, status = exc.report, EXIT_COMPUTE

    n_p = ";".join(str(s) for s in config.source_sizes)
    rows = [
        [config.n_q, n_p, config.n_q, r["estimator"], _fmt(r["mise"]), _fmt(r["mc_se"]),
         r["reps"], r["failures"]]
        for r in report.rows()
    ]
    write_csv(output_path(args.out, ".csv"),
              ["n", "n_p", "n_q", "estimator", "mise", "mc_se", "reps", "failures"], rows)
    write_json(output_path(args.out, ".json"), report.to_json())
    for r in report.rows():
        print(f"{r['estimator']:>8}  mise={r['mise']:.4f}  se={r['mc_se']:.4f}  "
              f"failures={r['failures']}")
    return status


# ---------------------------------------------------------------------------
# fit


def _random_sample(path: str) -> RandomDesignSample:
    x, y = read_xy(path)
    try:
        return RandomDesignSample(x, y)
    except ParameterError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _fixed_sample(path: str) -> FixedDesignSample:
    x, y = read_xy(path)
    try:
        return FixedDesignSample(x, y)
    except ParameterError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _pair(args, recipe: FitRecipe, source, target) -> tuple[BandwidthPair, float | None]:
    """Bandwidths from the flags, with CV over whatever was left unset."""
    needs_hp = recipe.uses_source_bandwidth
    if args.hq is not None and (args.hp is not None or not needs_hp):
        return BandwidthPair(args.hp if needs_hp else None, args.hq), None
    hs = log_grid(target.domain, args.grid_count)
    grid = BandwidthGrid((args.hp,) if args.hp is not None else hs,
                         (args.hq,) if args.hq is not None else hs)
    sel = select_bandwidths(recipe, source, target, grid)
    return sel.bandwidths, sel.score


def _nw_h(flag: float | None, sample: RandomDesignSample, kernel, count: int) -> float:
    if flag is not None:
        return flag
    return select_nw_bandwidth(sample, kernel, log_grid(sample.domain, count))


def run_fit(args: argparse.Namespace) -> tuple[np.ndarray, np.ndarray, dict]:
    kernel = KERNELS[args.kernel]
    guard = GuardPolicy(shift_a=args.shift)
    method = args.method
    fixed = method.endswith("fixed")
    target = _fixed_sample(args.target) if fixed else _random_sample(args.target)
    needs_source = method != "q-nw"
    if needs_source and args.source is None:
        raise InputError(f"--method {method} needs --source")
    source = None
    if needs_source:
        source = _fixed_sample(args.source) if fixed else _random_sample(args.source)
    info: dict = {"method": method, "kernel": args.kernel, "n_target": target.n,
                  "n_source": source.n if source is not None else 0, "shift_a": args.shift}

    if method in ("q-nw", "f-nw", "sa", "wa"):
        h_q = _nw_h(args.hq, target, kernel, args.grid_count)
        if method == "q-nw":
            curve = q_nw(target, kernel, h_q)
            info["bandwidths"] = {"h": h_q}
        elif method == "f-nw":
            both = pooled(source, target)
            h = args.hq if args.hq is not None else _nw_h(None, both, kernel, args.grid_count)
            curve = f_nw(source, target, kernel, h)
            info["bandwidths"] = {"h": h}
        else:
            pair = BandwidthPair(_nw_h(args.hp, source, kernel, args.grid_count), h_q)
            info["bandwidths"] = {"h_p": pair.h_p, "h_q": pair.h_q}
            if method == "sa":
                curve = sa_estimate(source, target, kernel, pair)
                info["weights"] = list(sa_weights(source.n, target.n, pair))
            else:
                curve, weights = wa_estimate(source, target, kernel, pair)
                info["weights"] = weights.w.tolist()
    else:
        basis = BasisSpec(args.k) if method.startswith("basis") else None
        model = MODELS[args.model] if method == "semiparametric" else None
        recipe = FitRecipe(method, kernel, guard, basis, model)
        pair, score = _pair(args, recipe, source, target)
        info["bandwidths"] = {"h_p": pair.h_p, "h_q": pair.h_q}
        info["cv_score"] = score
        if method == "sw-tle-fixed":
            est = sw_tle_fixed(source, target, kernel, pair, guard)
        elif method == "sw-tle-random":
            est = sw_tle_random(source, target, kernel, pair, guard)
        elif method == "basis-fixed":
            est = basis_adjust_fixed(source, target, kernel, pair, basis, guard)
        elif method == "basis-random":
            est = basis_adjust_random(source, target, kernel, pair, basis, guard)
        else:
            est = sw_tle_semiparam(source, model, target, kernel, pair.h_q, guard)
            info["theta_hat"] = est.extras["fit"].theta_hat.tolist()
        if basis is not None:
            info["basis_k"] = basis.k
        curve = est.final

    lo, hi = target.domain
    xs = np.linspace(lo, hi, args.grid_points)
    return xs, np.asarray(curve.value(xs), dtype=float), info


def cmd_fit(args: argparse.Namespace) -> int:
    xs, values, info = run_fit(args)
    write_csv(output_path(args.out, ".csv"), ["x", "estimate"],
              [[_fmt(x), _fmt(v)] for x, v in zip(xs, values)])
    write_json(output_path(args.out, ".json"), info)
    print(json.dumps(info["bandwidths"], sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# realdata

SLUMP_COLUMNS = {
    "cement": ("cement",),
    "water": ("water",),
    "SLUMP": ("slump",),
    "FLOW": ("flow",),
    "CS": ("compressive strength", "strength", "cs"),
}
STRENGTH_COLUMNS = {
    "cement": ("cement",),
    "water": ("water",),
    "age": ("age",),
    "strength": ("strength", "concrete compressive strength", "csmpa", "cs"),
}
RESPONSES = ("CS", "FLOW", "SLUMP")


@dataclass(frozen=True)
class RealDataProtocol:
    """Split rule, responses and artificial-source parameters for the slump study."""

    train: int = 78
    responses: tuple[str, ...] = RESPONSES
    artificial_n: int = 200
    artificial_range: tuple[float, float] = (0.48, 1.79)

    def __post_init__(self):
        if self.train < 2:
            raise ParameterError("--train must be at least 2")
        if self.artificial_n < 2:
            raise ParameterError("artificial source size must be >= 2")
        lo, hi = self.artificial_range
        if not lo < hi:
            raise ParameterError("artificial covariate range must satisfy low < high")
        unknown = set(self.responses) - set(RESPONSES)
        if unknown:
            raise ParameterError(f"unknown responses {sorted(unknown)}")


def _ratio(cols: dict[str, np.ndarray], path: str) -> np.ndarray:
    if np.any(cols["cement"] <= 0):
        raise InputError(f"{path}: cement must be positive to form the water-cement ratio")
    return cols["water"] / cols["cement"]


def _sw_fit(source: RandomDesignSample, target: RandomDesignSample, count: int):
    recipe = FitRecipe("sw-tle-random", GAUSSIAN)
    hs = log_grid(target.domain, count)
    sel = select_bandwidths(recipe, source, target, BandwidthGrid(hs, hs))
    return sw_tle_random(source, target, GAUSSIAN, sel.bandwidths).final, sel.bandwidths


def run_realdata(args: argparse.Namespace) -> dict:
    try:
        protocol = RealDataProtocol(args.train, tuple(_parse_list(args.responses, str)),
                                    args.artificial_n, (args.artificial_low, args.artificial_high))
    except ParameterError as exc:
        raise InputError(str(exc)) from exc
    slump = read_columns(args.slump, SLUMP_COLUMNS)
    ratio = _ratio(slump, args.slump)
    n = ratio.size
    if protocol.train >= n:
        raise InputError(f"--train {protocol.train} leaves no test rows in {n}-row file")

    real_source = None
    if args.strength:
        strength = read_columns(args.strength, STRENGTH_COLUMNS)
        keep = strength["age"] == 28
        if keep.sum() < 2:
            raise InputError(f"{args.strength}: fewer than 2 rows with age = 28")
        sub = {k: v[keep] for k, v in strength.items()}
        real_source = RandomDesignSample(_ratio(sub, args.strength), sub["strength"])

    rng = np.random.default_rng(args.seed)
    train, test = slice(0, protocol.train), slice(protocol.train, n)
    table, curves = [], {}
    for response in protocol.responses:
        y = slump[response]
        target = RandomDesignSample(ratio[train], y[train])
        fits = {}
        if real_source is not None:
            fits["R-sw-TLE"] = _sw_fit(real_source, target, args.grid_count)
        lo, hi = protocol.artificial_range
        art_x = rng.uniform(lo, hi, protocol.artificial_n)
        art_y = rng.normal(target.y.mean(), target.y.std(), protocol.artificial_n)
        fits["A-sw-TLE"] = _sw_fit(RandomDesignSample(art_x, art_y), target, args.grid_count)
        h = select_nw_bandwidth(target, GAUSSIAN, log_grid(target.domain, args.grid_count))
        fits["Q-NW"] = (q_nw(target, GAUSSIAN, h), BandwidthPair(None, h))

        xs = np.linspace(ratio.min(), ratio.max(), args.grid_points)
        curves[response] = {"x": xs}
        for name, (curve, bw) in fits.items():
            msrr = float(np.mean((y[train] - curve.value(ratio[train])) ** 2))
            mspe = float(np.mean((y[test] - curve.value(ratio[test])) ** 2))
            table.append({"response": response, "method": name, "msrr": msrr, "mspe": mspe,
                          "h_p": bw.h_p, "h_q": bw.h_q})
            curves[response][name] = curve.value(xs)
    return {"table": table, "curves": curves, "train": protocol.train, "test": n - protocol.train}


def cmd_realdata(args: argparse.Namespace) -> int:
    result = run_realdata(args)
    write_csv(output_path(args.out, ".csv"), ["response", "method", "msrr", "mspe"],
              [[r["response"], r["method"], _fmt(r["msrr"]), _fmt(r["mspe"])]
               for r in result["table"]])
    write_json(output_path(args.out, ".json"),
               {"table": result["table"], "train": result["train"], "test": result["test"],
                "seed": args.seed})
    for response, cols in result["curves"].items():
        names = list(cols)
        rows = zip(*(cols[k] for k in names))
        write_csv(Path(f"{args.out}_{response}_curves.csv"), names,
                  [[_fmt(v) for v in row] for row in rows])
    for r in result["table"]:
        print(f"{r['response']:>6} {r['method']:>9}  msrr={r['msrr']:.4f}  mspe={r['mspe']:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# plot

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def read_long(paths: Sequence[str], x_column: str = "n") -> dict[str, list[tuple[float, float]]]:
    """Series ``estimator -> [(n, mise), ...]`` from long-format CSVs."""
    series: dict[str, list[tuple[float, float]]] = {}
    for path in paths:
        header, rows = _read_rows(path)
        idx = {name: _find_column(header, (name,)) for name in (x_column, "estimator", "mise")}
        missing = [k for k, v in idx.items() if v is None]
        if missing:
            raise InputError(f"{path}: missing column(s) {', '.join(missing)}")
        for r, row in enumerate(rows, start=2):
            try:
                n = float(row[idx[x_column]])
                mise = float(row[idx["mise"]])
                name = row[idx["estimator"]].strip()
            except (IndexError, ValueError) as exc:
                raise InputError(f"{path}: malformed row {r}") from exc
            if not (math.isfinite(n) and math.isfinite(mise)) or not name:
                raise InputError(f"{path}: malformed row {r}")
            series.setdefault(name, []).append((n, mise))
    if not series:
        raise InputError("no data rows to plot")
    return {k: sorted(v) for k, v in series.items()}


def render_svg(series: dict[str, list[tuple[float, float]]], log_y: bool = False,
               log_x: bool = False, title: str = "", x_label: str = "n", width: int = 640,
               height: int = 400) -> str:
    """Line chart with one polyline per series, circle markers and a legend."""
    left, right, top, bottom = 70, 150, 40, 50
    pts = [p for values in series.values() for p in values]
    if (log_y and any(y <= 0 for _, y in pts)) or (log_x and any(x <= 0 for x, _ in pts)):
        raise InputError("log scale needs positive values")
    tx = np.log10 if log_x else (lambda v: v)
    ty = np.log10 if log_y else (lambda v: v)
    xs = np.array([tx(x) for x, _ in pts], dtype=float)
    ys = np.array([ty(y) for _, y in pts], dtype=float)
    x0, x1 = xs.min(), xs.max()
    y0, y1 = ys.min(), ys.max()
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = width - left - right, height - top - bottom

    def px(v):
        return left + (tx(v) - x0) / (x1 - x0) * pw

    def py(v):
        return top + ph - (ty(v) - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{left + pw / 2:.2f}" y="20" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="14">{_escape(title)}</text>')
    for k in range(5):
        fx = x0 + (x1 - x0) * k / 4
        fy = y0 + (y1 - y0) * k / 4
        vx = 10 ** fx if log_x else fx
        vy = 10 ** fy if log_y else fy
        gx = left + pw * k / 4
        gy = top + ph - ph * k / 4
        out.append(f'<text x="{gx:.2f}" y="{top + ph + 18}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{vx:.4g}</text>')
        out.append(f'<text x="{left - 6}" y="{gy + 4:.2f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">{vy:.4g}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 10}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12">{_escape(x_label)}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.2f})" '
               'font-family="sans-serif" font-size="12">MISE</text>')
    for i, (name, values) in enumerate(sorted(series.items())):
        colour = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in values)
        out.append(f'<polyline class="series" points="{coords}" fill="none" '
                   f'stroke="{colour}" stroke-width="2"/>')
        for x, y in values:
            out.append(f'<circle class="marker" cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" '
                       f'fill="{colour}"/>')
        ly = top + 14 + 18 * i
        out.append(f'<line x1="{left + pw + 15}" y1="{ly}" x2="{left + pw + 35}" y2="{ly}" '
                   f'stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 40}" y="{ly + 4}" font-family="sans-serif" '
                   f'font-size="12">{_escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def cmd_plot(args: argparse.Namespace) -> int:
    series = read_long(args.inputs, args.x_column)
    svg = render_svg(series, log_y=args.log_y, log_x=args.log_x, title=args.title,
                     x_label=args.x_column)
    output_path(args.out, ".svg").write_text(svg, encoding="utf-8")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swtle", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=out_default, help="output path prefix")
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes (SWTLE_THREADS overrides)")

    p = sub.add_parser("simulate", help="run a Monte Carlo scenario")
    common(p, "simulate")
    p.add_argument("--scenario", required=True, choices=[s.value for s in Scenario])
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--np", default="500", help="source size, comma list for multi_source")
    p.add_argument("--nq", type=int, default=50)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--sigma-p", type=float, default=NOISE_SD)
    p.add_argument("--sigma-q", type=float, default=NOISE_SD)
    p.add_argument("--estimators", help=f"comma list from {', '.join(ESTIMATORS)}")
    p.add_argument("--eval-points", type=int, default=201)
    p.add_argument("--trim", type=float, default=0.0)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("fit", help="fit an estimator on CSV data (columns x, y)")
    common(p, "fit")
    p.add_argument("--method", required=True, choices=FIT_METHODS)
    p.add_argument("--source")
    p.add_argument("--target", required=True)
    p.add_argument("--hp", type=_positive)
    p.add_argument("--hq", type=_positive)
    p.add_argument("--kernel", choices=sorted(KERNELS), default="gaussian")
    p.add_argument("--k", type=int, default=2, help="basis size for basis methods")
    p.add_argument("--model", choices=sorted(MODELS), default="exponential")
    p.add_argument("--shift", type=float, default=0.0, help="constant added to the source")
    p.add_argument("--grid-points", type=int, default=201)
    p.add_argument("--grid-count", type=int, default=20, help="bandwidth candidates for CV")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("realdata", help="concrete slump study")
    common(p, "realdata")
    p.add_argument("--slump", required=True)
    p.add_argument("--strength", help="compressive-strength CSV for the real source")
    p.add_argument("--train", type=int, default=78)
    p.add_argument("--responses", default=",".join(RESPONSES))
    p.add_argument("--artificial-n", type=int, default=200)
    p.add_argument("--artificial-low", type=float, default=0.48)
    p.add_argument("--artificial-high", type=float, default=1.79)
    p.add_argument("--grid-points", type=int, default=201)
    p.add_argument("--grid-count", type=int, default=20)
    p.set_defaults(handler=cmd_realdata)

    p = sub.add_parser("plot", help="SVG chart of MISE against n")
    common(p, "plot")
    p.add_argument("inputs", nargs="+", help="long-format CSVs (n, estimator, mise)")
    p.add_argument("--x-column", default="n")
    p.add_argument("--log-y", action="store_true")
    p.add_argument("--log-x", action="store_true")
    p.add_argument("--title", default="")
    p.set_defaults(handler=cmd_plot)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except InputError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SelectionError, ConvergenceError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except ParameterError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
