"""Command-line driver: BER curves, law sweeps, Wigner grids and self-validation.

Data files start with a one-line ``#`` manifest (JSON) and carry no timing, so
reruns with the same flags are byte-identical.  The full manifest, including
wall time, goes to ``<out>.manifest.json``.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numba

from . import __version__
from .ber import (
    DEFAULT_WINDOW,
    PHOTON_NUMBER_AMPLIFIER_BER,
    PUBLISHED_LAW,
    ber_curve,
    fit_coefficient_law,
    sweep,
)
from .fock import DomainError
from .regen import chain_output_components
from .wigner import CONVENTION, default_extent, wigner_of_mixture

EXIT_OK, EXIT_VALIDATION, EXIT_USAGE, EXIT_TRUNCATION = 0, 1, 2, 3
FMT = "{:.16e}"

log = logging.getLogger("nolmregen")


class UsageError(Exception):
    pass


def _fmt(x: float) -> str:
    return FMT.format(x)


def _pair(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}")
    if not 1 <= lo <= hi:
        raise argparse.ArgumentTypeError(f"bad window {text!r}")
    return lo, hi


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _grid(text: str) -> tuple[tuple[float, ...] | None, int]:
    """RES or RE_LO,RE_HI,IM_LO,IM_HI,RES."""
    parts = text.split(",")
    try:
        if len(parts) == 1:
            extent, res = None, int(parts[0])
        elif len(parts) == 5:
            extent, res = tuple(float(v) for v in parts[:4]), int(parts[4])
        else:
            raise ValueError
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed grid spec {text!r}")
    if res < 16 or (extent and not (extent[1] > extent[0] and extent[3] > extent[2])):
        raise argparse.ArgumentTypeError(f"malformed grid spec {text!r}")
    return extent, res


def _eta(text: str) -> float:
    v = float(text)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError("eta must lie in (0, 1]")
    return v


def read_config(path: str) -> dict:
    """Parse a simple key=value file; keys are flag names without the leading dashes."""
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override it")
    common.add_argument("--dim", type=int, help="truncation dimension override")
    common.add_argument("--eta", type=_eta, default=0.5, help="per-segment transmissivity")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--allow-truncation-risk", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="nolmregen", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("ber-curve", parents=[common], help="B(N) for one input level")
    c.add_argument("--beta", type=float, required=True)
    c.add_argument("--n-max", type=int, default=100)

    s = sub.add_parser("sweep-fit", parents=[common], help="fit B = C N and log10 C = a + b|beta|^2")
    s.add_argument("--betas", type=_float_list, default=[17, 18, 19, 20, 21, 22])
    s.add_argument("--n-max", type=int, default=200)
    s.add_argument("--window", type=_pair, default=DEFAULT_WINDOW)
    s.add_argument("--self-test", action="store_true", help="fit exact synthetic law pairs instead")

    w = sub.add_parser("wigner", parents=[common], help="Wigner grid of the regenerated state")
    w.add_argument("--beta", type=float, required=True)
    w.add_argument("--steps", type=int, default=1)
    w.add_argument("--grid", type=_grid, default=(None, 200))

    v = sub.add_parser("validate", parents=[common], help="run the reference property suites")
    v.add_argument("--seed", type=int, default=1234)
    return p


def config_tokens(cfg: dict) -> list[str]:
    """Turn key=value pairs into flag tokens; true/false toggles switches."""
    tokens = []
    for key, value in cfg.items():
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "yes"):
            tokens.append(flag)
        elif value.lower() not in ("false", "no"):
            tokens += [flag, value]
    return tokens


def parse_args(argv):
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    early, _ = pre.parse_known_args(argv)
    if early.config and early.command in COMMANDS:
        try:
            cfg = read_config(early.config)
        except OSError as exc:
            parser.error(str(exc))
        # Later flags win in argparse, so config tokens go right after the command.
        i = argv.index(early.command) + 1
        argv = argv[:i] + config_tokens(cfg) + argv[i:]
    return parser.parse_args(argv)


def _params(args) -> dict:
    skip = {"config", "out", "verbose", "threads"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


def manifest(args, **extra) -> dict:
    return {"command": args.command, "version": __version__, "params": _params(args), **extra}


def _emit(args, text: str, full_manifest: dict) -> None:
    if args.out:
        Path(args.out).write_text(text)
        Path(args.out + ".manifest.json").write_text(json.dumps(full_manifest, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text)


def _csv(header: dict, columns: list[str], rows) -> str:
    lines = ["# " + json.dumps(header, sort_keys=True), ",".join(columns)]
    lines += [",".join(_fmt(x) if isinstance(x, float) else str(x) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


def _json(header: dict, body: dict) -> str:
    return json.dumps({"manifest": header, **body}, indent=2, sort_keys=True) + "\n"


def cmd_ber_curve(args, t0: float) -> int:
    if args.n_max < 1:
        raise UsageError("--n-max must be at least 1")
    if args.beta == 0:
        raise UsageError("--beta must be nonzero (no switching value at zero level)")
    series = ber_curve(args.beta, args.n_max, args.dim, args.eta)
    head = manifest(args, dim=series.dim, max_deficit=_fmt(float(series.deficit.max())),
                    truncation_flagged_steps=len(series.flagged))
    if args.format == "csv":
        text = _csv(head, ["N", "ber", "deficit"], series.points())
    else:
        pts = [{"N": n, "ber": _fmt(b), "deficit": _fmt(d)} for n, b, d in series.points()]
        text = _json(head, {"points": pts})
    _emit(args, text, {**head, "wall_time_s": time.perf_counter() - t0})
    if series.truncation_flag and not args.allow_truncation_risk:
        log.error("truncation deficit exceeds the error budget at N=%d; raise --dim", series.flagged[0])
        return EXIT_TRUNCATION
    return EXIT_OK


def _synthetic_pairs(betas):
    a, b = PUBLISHED_LAW["intercept"], PUBLISHED_LAW["slope"]
    return [(x * x, 10.0 ** (a + b * x * x)) for x in betas]


def cmd_sweep_fit(args, t0: float) -> int:
    betas = args.betas
    if len(set(betas)) < 4:
        raise UsageError("sweep-fit needs at least 4 distinct betas")
    if any(b == 0 for b in betas):
        raise UsageError("betas must be nonzero")
    if args.window[1] > args.n_max:
        raise UsageError("--window must lie inside 1..n-max")
    flagged = False
    if args.self_test:
        law = fit_coefficient_law(_synthetic_pairs(betas))
        per_beta = []
        max_deficit = 0.0
    else:
        with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
            curves, fits, law = sweep(betas, args.n_max, args.window, args.eta, map_fn=pool.map)
        per_beta = [
            {"beta": float(abs(s.beta_level)), "dim": s.dim, "C": _fmt(f.coefficient),
             "log10_C": _fmt(math.log10(f.coefficient)), "max_relative_residual": _fmt(f.max_relative_residual),
             "ber_at_n_max": _fmt(float(s.ber[-1])), "deficit_at_n_max": _fmt(float(s.deficit[-1]))}
            for s, f in zip(curves, fits)
        ]
        max_deficit = max(float(s.deficit.max()) for s in curves)
        flagged = any(s.truncation_flag for s in curves)
    head = manifest(args, max_deficit=_fmt(max_deficit))
    body = {
        "per_beta": per_beta,
        "law": {"intercept": _fmt(law.intercept), "slope": _fmt(law.slope),
                "residuals": [_fmt(r) for r in law.residuals]},
        "published": {**PUBLISHED_LAW, "photon_number_amplifier_ber": PHOTON_NUMBER_AMPLIFIER_BER},
        "comparison": {"intercept_diff": _fmt(law.intercept - PUBLISHED_LAW["intercept"]),
                       "slope_diff": _fmt(law.slope - PUBLISHED_LAW["slope"])},
    }
    _emit(args, _json(head, body), {**head, "wall_time_s": time.perf_counter() - t0})
    if flagged and not args.allow_truncation_risk:
        return EXIT_TRUNCATION
    return EXIT_OK


def cmd_wigner(args, t0: float) -> int:
    if args.steps < 1:
        raise UsageError("--steps must be at least 1")
    if args.beta == 0:
        raise UsageError("--beta must be nonzero (no switching value at zero level)")
    mix = chain_output_components(args.beta, args.steps, args.eta, args.dim)
    extent, res = args.grid
    extent = extent or default_extent(mix)
    grid = wigner_of_mixture(mix, extent, res)
    head = manifest(args, convention=CONVENTION, extent=[_fmt(e) for e in extent],
                    integral=_fmt(grid.integral()), max_deficit=_fmt(mix.deficit))
    rows = [(float(grid.re_axis[j]), float(grid.im_axis[i]), float(grid.values[i, j]))
            for i in range(grid.im_axis.size) for j in range(grid.re_axis.size)]
    if args.format == "csv":
        text = _csv(head, ["re", "im", "w"], rows)
    else:
        text = _json(head, {"re": [_fmt(x) for x in grid.re_axis], "im": [_fmt(x) for x in grid.im_axis],
                            "w": [[_fmt(x) for x in row] for row in grid.values]})
    _emit(args, text, {**head, "wall_time_s": time.perf_counter() - t0})
    return EXIT_OK


def cmd_validate(args, t0: float) -> int:
    from .validation import run_all

    dim = args.dim or 40
    if dim < 1:
        raise UsageError("--dim must be positive")
    checks = run_all(dim, args.seed)
    ok = all(c.passed for c in checks)
    head = manifest(args, dim=dim)
    body = {"properties": [{**c.as_dict(), "deviation": _fmt(c.deviation), "tolerance": _fmt(c.tolerance)}
                           for c in checks], "passed": ok}
    _emit(args, _json(head, body), {**head, "wall_time_s": time.perf_counter() - t0})
    return EXIT_OK if ok else EXIT_VALIDATION


COMMANDS = {"ber-curve": cmd_ber_curve, "sweep-fit": cmd_sweep_fit, "wigner": cmd_wigner,
            "validate": cmd_validate}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.dim is not None and args.dim < 1:
        print("error: --dim must be positive", file=sys.stderr)
        return EXIT_USAGE
    if args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_USAGE
    numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
    t0 = time.perf_counter()
    try:
        return COMMANDS[args.command](args, t0)
    except (UsageError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
