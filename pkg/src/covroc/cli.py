"""Command-line interface: ``covroc test | curves | simulate | replay``.

Every command writes its outputs and a ``manifest.json`` into ``--out``.
The manifest holds the fully resolved configuration and the SHA-256 of the
input file; ``covroc replay manifest.json --out DIR`` re-runs it and
reproduces the outputs byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from covroc import __version__
from covroc import io as cio
from covroc.errors import CovrocError, InvalidInputError
from covroc.estimators import (
    KernelSpec,
    auc,
    conditional_roc,
    default_grid,
    nw_fit,
    pooled_roc,
    aroc_estimate,
    standardized_residuals,
)
from covroc.simulation import STUDY_SIZES, WORKERS_ENV, MonteCarloPlan, resolve_workers, run_monte_carlo
from covroc.testing import (
    BandwidthPolicy,
    DistanceKind,
    SplitConfig,
    TestConfig,
    normalize_distances,
    resolve_bandwidths,
    run_test,
)

log = logging.getLogger("covroc")

DEFAULT_PERCENTILES = (10, 25, 50, 75, 90)


class UsageError(Exception):
    """Bad command-line value (exit code 2)."""


# ---------------------------------------------------------------------------
# Argument parsing helpers
# ---------------------------------------------------------------------------

def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _distances(text: str) -> list[str]:
    try:
        return [d.value for d in normalize_distances(t.strip().upper() for t in text.split(",") if t.strip())]
    except (ValueError, InvalidInputError):
        raise argparse.ArgumentTypeError(f"distances must be drawn from L1,L2,KS, got {text!r}") from None


def _bandwidth(text: str) -> str:
    if text == "auto":
        return text
    if text.startswith("fixed:"):
        vals = _float_list(text[len("fixed:"):])
        if len(vals) == 2 and all(v > 0 for v in vals):
            return text
    raise argparse.ArgumentTypeError(f"bandwidth must be 'auto' or 'fixed:<g_F>,<g_G>', got {text!r}")


def _size_pairs(values: Sequence[str] | None) -> list[list[int]]:
    if not values:
        return [list(s) for s in STUDY_SIZES]
    out = []
    for v in values:
        for chunk in v.split(";"):
            parts = [p for p in chunk.split(",") if p.strip()]
            if len(parts) != 2:
                raise UsageError(f"--sizes expects pairs like 100,100; got {chunk!r}")
            try:
                out.append([int(parts[0]), int(parts[1])])
            except ValueError:
                raise UsageError(f"--sizes expects integers, got {chunk!r}") from None
    return out


def _bandwidth_policy(spec: str, reselect: bool) -> BandwidthPolicy:
    if spec == "auto":
        return BandwidthPolicy(reselect_in_bootstrap=reselect)
    g_f, g_g = _float_list(spec[len("fixed:"):])
    return BandwidthPolicy(fixed=(g_f, g_g), reselect_in_bootstrap=reselect)


def _add_data_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("input data")
    g.add_argument("--csv", required=True, help="input CSV (header row, UTF-8)")
    g.add_argument("--status-col", required=True, help="column holding disease status")
    g.add_argument("--marker-col", required=True, help="diagnostic marker column")
    g.add_argument("--covariate-col", required=True, help="continuous covariate column")
    g.add_argument("--negate-marker", action="store_true",
                   help="use minus the marker (for markers that are lower when diseased)")
    g.add_argument("--positive-label", default="1", help="status value of diseased rows [1]")
    g.add_argument("--negative-label", default="0", help="status value of healthy rows [0]")
    g.add_argument("--delimiter", default=",", help="field delimiter [,]")


def _add_common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True, help="output directory (created if missing)")
    p.add_argument("--seed", type=int, default=0, help="master seed [0]")
    p.add_argument("--figures", action="store_true", help="also render PNG figures")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covroc",
        description="Pooled, conditional and covariate-adjusted ROC curves; bootstrap test of ROC = AROC.",
    )
    parser.add_argument("--version", action="version", version=f"covroc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="bootstrap test of H0: AROC = ROC")
    _add_data_args(p)
    p.add_argument("--rho", type=float, default=0.5, help="fraction used for the pooled ROC [0.5]")
    p.add_argument("--B", type=_positive_int, default=500, help="bootstrap iterations [500]")
    p.add_argument("--distances", type=_distances, default=["L1", "L2", "KS"],
                   help="comma list from L1,L2,KS [all]")
    p.add_argument("--grid", type=int, default=500, help="number of grid points in (0,1) [500]")
    p.add_argument("--bandwidth", type=_bandwidth, default="auto", help="auto | fixed:<g_F>,<g_G> [auto]")
    p.add_argument("--reselect-bandwidth", action="store_true",
                   help="re-select the healthy bandwidth on every bootstrap sample")
    p.add_argument("--format", choices=["json", "csv"], default="json", help="result format [json]")
    p.add_argument("--workers", type=_positive_int, default=None,
                   help=f"threads for bootstrap replicates [${WORKERS_ENV} or 1]")
    _add_common_args(p)

    p = sub.add_parser("curves", help="pooled, adjusted and conditional ROC curves with AUCs")
    _add_data_args(p)
    p.add_argument("--at-covariate", type=_float_list, action="append", default=None,
                   help="covariate value(s) for conditional curves (comma list, repeatable) "
                        "[10/25/50/75/90th percentiles]")
    p.add_argument("--grid", type=int, default=500, help="number of grid points in (0,1) [500]")
    p.add_argument("--bandwidth", type=_bandwidth, default="auto", help="auto | fixed:<g_F>,<g_G> [auto]")
    p.add_argument("--format", choices=["json", "csv"], default="json", help="output format [json]")
    _add_common_args(p)

    p = sub.add_parser("simulate", help="Monte Carlo level/power study on scenarios A-D")
    p.add_argument("--scenario", default="A", help="scenario id(s), comma list from A,B,C,D [A]")
    p.add_argument("--sizes", action="append", default=None,
                   help="n_F,n_G pair (repeatable, or ';'-separated) [100,100;250,350;500,500]")
    p.add_argument("--rho-list", type=_float_list, default=[0.5], help="split fractions [0.5]")
    p.add_argument("--ns", type=_positive_int, default=None, help="datasets per cell [200]")
    p.add_argument("--full", action="store_true", help="use n_s = 1000 as in the published study")
    p.add_argument("--B", type=_positive_int, default=200, help="bootstrap iterations [200]")
    p.add_argument("--alphas", type=_float_list, default=[0.025, 0.05, 0.1], help="levels [0.025,0.05,0.1]")
    p.add_argument("--distances", type=_distances, default=["L1", "L2", "KS"], help="comma list [all]")
    p.add_argument("--grid", type=int, default=500, help="grid points [500]")
    p.add_argument("--format", choices=["csv", "json", "both"], default="both", help="table format [both]")
    p.add_argument("--workers", type=_positive_int, default=None,
                   help=f"worker processes [${WORKERS_ENV} or 1]")
    _add_common_args(p)

    p = sub.add_parser("replay", help="re-run a command from its manifest.json")
    p.add_argument("manifest", help="manifest.json written by a previous run")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# keys that never affect results
_VOLATILE = {"out", "verbose", "workers", "command", "func", "manifest"}


def _resolved_config(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _VOLATILE}


def _manifest(args: argparse.Namespace) -> dict:
    doc = {
        "schema_version": cio.SCHEMA_VERSION,
        "kind": "run_manifest",
        "tool": "covroc",
        "version": __version__,
        "command": args.command,
        "seed": args.seed,
        "config": _resolved_config(args),
    }
    if getattr(args, "csv", None):
        doc["input"] = {"path": args.csv, "sha256": _sha256(args.csv)}
    return doc


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _load(args) -> cio.StudyDataset:
    return cio.read_csv(
        args.csv, args.status_col, args.marker_col, args.covariate_col, args.negate_marker,
        positive_label=args.positive_label, negative_label=args.negative_label,
        delimiter=args.delimiter,
    )


def _prepare_out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_test(args) -> int:
    data = _load(args)
    cfg = TestConfig(
        B=args.B,
        split=SplitConfig(rho=args.rho, seed=args.seed),
        distances=tuple(DistanceKind.parse(d) for d in args.distances),
        grid_size=args.grid,
        bandwidth=_bandwidth_policy(args.bandwidth, args.reselect_bandwidth),
        seed=args.seed,
        workers=resolve_workers(args.workers),
    )
    result = run_test(data, cfg)
    print(result.summary())

    out = _prepare_out(args)
    manifest = _manifest(args)
    cio.write_result(result, out / f"result.{args.format}", args.format)
    if args.figures:
        from covroc import plotting

        plotting.plot_bootstrap(result, out / "bootstrap.png")
        plotting.plot_curves(
            {"grid": result.roc_curve.grid, "roc": result.roc_curve.values,
             "aroc": result.aroc_curve.values, "auc": result.auc, "aauc": result.aauc,
             "covariate": data.covariate_name, "conditional": []},
            out / "curves.png",
        )
    cio.atomic_write_text(out / "manifest.json", cio.dumps_json(manifest))
    return 0


def curves_payload(data: cio.StudyDataset, at: Sequence[float] | None, grid_size: int,
                   bandwidth: BandwidthPolicy, kernel: KernelSpec | None = None) -> dict:
    """Pooled ROC, AROC and conditional ROC curves on the full data."""
    kernel = kernel or KernelSpec()
    grid = default_grid(grid_size)
    cfg = TestConfig(B=1, grid_size=grid_size, kernel=kernel, bandwidth=bandwidth)
    g_f, g_g = resolve_bandwidths(data.diseased, data.healthy, cfg)
    fit_f = nw_fit(data.diseased, g_f, kernel)
    fit_g = nw_fit(data.healthy, g_g, kernel)
    res_f, res_g = standardized_residuals(fit_f), standardized_residuals(fit_g)

    roc = pooled_roc(data.diseased.markers(), data.healthy.markers(), grid)
    aroc = aroc_estimate(data.diseased, data.healthy, g_g, kernel, grid, healthy_fit=fit_g)

    pooled_x = data.pooled_covariate()
    if at is None:
        at = np.percentile(pooled_x, DEFAULT_PERCENTILES).tolist()
    lo, hi = float(pooled_x.min()), float(pooled_x.max())
    conditional = []
    for x in at:
        if not lo <= x <= hi:
            warnings.warn(f"covariate value {x:g} lies outside the observed range [{lo:g}, {hi:g}]",
                          stacklevel=2)
        c = conditional_roc(float(x), fit_f, fit_g, res_f, res_g, grid)
        conditional.append({"x": float(x), "values": c.values.tolist(), "auc": auc(c)})

    return {
        "schema_version": cio.SCHEMA_VERSION,
        "kind": "curves",
        "marker": data.marker_name,
        "covariate": data.covariate_name,
        "sizes": {"diseased": len(data.diseased), "healthy": len(data.healthy)},
        "bandwidths": {"diseased": g_f, "healthy": g_g},
        "auc": auc(roc),
        "aauc": auc(aroc),
        "grid": grid.tolist(),
        "roc": roc.values.tolist(),
        "aroc": aroc.values.tolist(),
        "conditional": conditional,
    }


def cmd_curves(args) -> int:
    data = _load(args)
    at = None
    if args.at_covariate:
        at = [v for chunk in args.at_covariate for v in chunk]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        payload = curves_payload(data, at, args.grid, _bandwidth_policy(args.bandwidth, False))
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)

    print(f"AUC  = {payload['auc']:.4f}")
    print(f"AAUC = {payload['aauc']:.4f}")
    for c in payload["conditional"]:
        print(f"AUC^x at x={c['x']:.4g}: {c['auc']:.4f}")

    out = _prepare_out(args)
    manifest = _manifest(args)
    text = cio.dumps_json(payload) if args.format == "json" else cio.curves_to_csv(payload)
    cio.atomic_write_text(out / f"curves.{args.format}", text)
    if args.figures:
        from covroc import plotting

        plotting.plot_curves(payload, out / "curves.png")
    cio.atomic_write_text(out / "manifest.json", cio.dumps_json(manifest))
    return 0


def cmd_simulate(args) -> int:
    scenarios = [s.strip().upper() for s in args.scenario.split(",") if s.strip()]
    unknown = [s for s in scenarios if s not in "ABCD" or len(s) != 1]
    if not scenarios or unknown:
        raise UsageError(f"unknown scenario(s) {unknown or args.scenario!r}; choose from A,B,C,D")
    sizes = _size_pairs(args.sizes)
    args.sizes = [f"{a},{b}" for a, b in sizes]
    if args.ns is None:
        args.ns = 1000 if args.full else 200
    if any(not 0 < a < 1 for a in args.alphas):
        raise UsageError(f"--alphas must lie in (0,1), got {args.alphas}")
    if any(not 0 < r < 1 for r in args.rho_list):
        raise UsageError(f"--rho-list must lie in (0,1), got {args.rho_list}")
    template = TestConfig(B=args.B, distances=tuple(DistanceKind.parse(d) for d in args.distances),
                          grid_size=args.grid)
    workers = resolve_workers(args.workers)

    tables = []
    for sc in scenarios:
        plan = MonteCarloPlan(scenario=sc, sample_sizes=[tuple(s) for s in sizes], n_s=args.ns,
                              alphas=args.alphas, rhos=args.rho_list, test=template,
                              seed=args.seed, workers=workers)
        log.info("scenario %s: %d datasets x %d rho(s), B=%d", sc, len(sizes) * args.ns,
                 len(args.rho_list), args.B)
        tables.append(run_monte_carlo(plan))

    out = _prepare_out(args)
    manifest = _manifest(args)
    formats = ["csv", "json"] if args.format == "both" else [args.format]
    for sc, table in zip(scenarios, tables):
        for r in table.rows:
            print(f"{sc} ({r.n_f},{r.n_g}) rho={r.rho:.3g} {r.distance:<2} alpha={r.alpha:g}: "
                  f"{r.proportion:.3f} [{r.lo:.3f}, {r.hi:.3f}]")
        for fmt in formats:
            cio.write_rejection_table(table, out / f"rejections_{sc}.{fmt}", fmt)
        if args.figures:
            from covroc import plotting

            plotting.plot_rejections(table, out / f"rejections_{sc}.png")
    cio.atomic_write_text(out / "manifest.json", cio.dumps_json(manifest))
    return 0


def cmd_replay(args) -> int:
    import json

    with open(args.manifest, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("kind") != "run_manifest":
        raise InvalidInputError(f"{args.manifest} is not a covroc run manifest")
    if doc.get("version") != __version__:
        log.warning("manifest was written by covroc %s, running %s", doc.get("version"), __version__)
    if "input" in doc:
        digest = _sha256(doc["input"]["path"])
        if digest != doc["input"]["sha256"]:
            raise InvalidInputError(f"input file {doc['input']['path']} changed since the manifest was written")
    ns = argparse.Namespace(**doc["config"])
    ns.command = doc["command"]
    ns.out = args.out
    ns.verbose = args.verbose
    ns.workers = None
    return COMMANDS[ns.command](ns)


COMMANDS = {"test": cmd_test, "curves": cmd_curves, "simulate": cmd_simulate, "replay": cmd_replay}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if args.command in ("test", "curves") and args.grid < 10:
        parser.error("--grid must be at least 10")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.error(str(exc))
    except CovrocError as exc:
        print(f"covroc {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"covroc {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
