"""Command-line front end: ``meyerlab <subcommand> ...``.

Every JSON artifact embeds a ``manifest`` recording the command, its parameters,
the seed, sha256 hashes of the inputs, the output paths, the tool version and a
timestamp.  The timestamp comes from ``SOURCE_DATE_EPOCH`` (default 0), so repeated
runs with the same arguments write byte-identical files.

Exit codes: 0 success, 1 invalid input values, 2 usage errors, 3 I/O errors.
``verify`` exits with the number of checks that did not behave as expected.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from ._util import dumps
from .cutproject import (CutProjectScheme, fibonacci_scheme, fourier_candidates, generate_fibonacci,
                         generate_lattice_patch, generate_model_set, integer_scheme)
from .harmonic import epsilon_dual_set
from .pointset import Box, PointSet, build_pointset, deform, difference_set, thin
from .spectrum import SpectrumEstimate, grid_candidates, interval_peaks, scan_spectrum, visible_peaks
from .verify import SUITES, count_failures, run_suite

EXIT_INPUT, EXIT_USAGE, EXIT_IO = 1, 2, 3


class InputError(Exception):
    """Readable, well-formed input with values the command cannot use."""


def _timestamp() -> str:
    epoch = int(os.environ.get("SOURCE_DATE_EPOCH", "0") or 0)
    return datetime.fromtimestamp(epoch, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _sha256(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _manifest(args, inputs: list[str], outputs: list[str]) -> dict:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config")}
    return {"command": args.command, "params": params, "seed": int(getattr(args, "seed", 0) or 0),
            "input_hashes": [{"path": p, "sha256": _sha256(p)} for p in inputs],
            "output_paths": outputs, "tool_version": __version__, "timestamp": _timestamp()}


def _read_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    Path(path).write_text(text, encoding="utf-8")


def _outputs(*paths) -> list[str]:
    return [p for p in paths if p not in (None, "-")]


def _box(lo, hi, dim: int) -> Box:
    lo = list(lo) * dim if len(lo) == 1 else list(lo)
    hi = list(hi) * dim if len(hi) == 1 else list(hi)
    if len(lo) != dim or len(hi) != dim:
        raise InputError(f"frequency bounds need 1 or {dim} values")
    return Box(tuple(lo), tuple(hi))


def _load_pointset(path: str) -> tuple[PointSet, CutProjectScheme | None]:
    data = _read_json(path)
    try:
        ps = PointSet.from_dict(data)
    except (KeyError, TypeError) as exc:
        raise InputError(f"{path}: not a point set ({exc})") from None
    scheme = CutProjectScheme.from_dict(data["scheme"]) if data.get("scheme") else None
    return ps, scheme


def _pointset_doc(ps: PointSet, scheme, manifest: dict, **extra) -> dict:
    doc = ps.to_dict()
    if scheme is not None:
        doc["scheme"] = scheme.to_dict()
    doc.update(extra)
    doc["manifest"] = manifest
    return doc


# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    n = args.size
    if n < 2:
        raise InputError("--size must be at least 2")
    if args.preset == "fibonacci":
        ps, scheme = generate_fibonacci(n), fibonacci_scheme()
    elif args.preset == "zd":
        scheme = integer_scheme(args.dim)
        if args.dim == 1:
            ps = build_pointset(1, np.arange(n, dtype=float), Box((0.0,), (float(n),)))
        else:
            ps = generate_lattice_patch(np.eye(2), Box((0.0, 0.0), (float(n - 1),) * 2))
    else:
        scheme = CutProjectScheme.from_dict(_read_json(args.scheme)) if args.scheme else fibonacci_scheme()
        if scheme.d != 1:
            ps = generate_model_set(scheme, Box.centered(float(n), scheme.d))
        else:
            ps = generate_model_set(scheme, Box.centered(n / scheme.density, 1))
    inputs = [args.scheme] if getattr(args, "scheme", None) else []
    doc = _pointset_doc(ps, scheme, _manifest(args, inputs, _outputs(args.out)))
    _write(args.out, dumps(doc))
    return 0


def _candidates(args, ps: PointSet, scheme, region: Box) -> np.ndarray:
    spec = args.candidates
    if spec == "dual":
        if scheme is None:
            raise InputError("--candidates dual needs a point set file that records its scheme")
        return fourier_candidates(scheme, region, args.cutoff)
    if spec.startswith("grid:"):
        try:
            step = float(spec.split(":", 1)[1])
        except ValueError:
            raise InputError(f"bad grid step in {spec!r}") from None
        return grid_candidates(region, step)
    raise InputError(f"--candidates must be 'dual' or 'grid:STEP', got {spec!r}")


def _csv_path(out: str | None) -> str | None:
    if out in (None, "-"):
        return None
    p = Path(out)
    return str(p.with_suffix(".csv"))


def cmd_diffract(args) -> int:
    ps, scheme = _load_pointset(args.input)
    region = _box(args.freq_lo, args.freq_hi, ps.dim)
    cand = _candidates(args, ps, scheme, region)
    estimator = "structure_factor" if args.estimator == "sf" else "eqhof"
    spec = scan_spectrum(ps, ps.region, cand, estimator, lag_radius=args.lag_radius,
                         taper=args.taper, refine_step=args.refine, seed=args.seed,
                         freq_region=region)
    csv = _csv_path(args.out)
    doc = spec.to_dict()
    doc["manifest"] = _manifest(args, [args.input], _outputs(args.out, csv))
    _write(args.out, dumps(doc))
    if csv:
        _write(csv, spec.to_csv())
    return 0


def cmd_dualset(args) -> int:
    ps, scheme = _load_pointset(args.input)
    region = _box(args.freq_lo, args.freq_hi, ps.dim)
    dset = difference_set(ps, args.radius)
    if args.candidates == "dual":
        if scheme is None:
            raise InputError("--candidates dual needs a point set file that records its scheme")
        cs = epsilon_dual_set(dset, args.eps, region,
                              candidates=fourier_candidates(scheme, region, args.cutoff))
    else:
        step = float(args.candidates.split(":", 1)[1]) if ":" in args.candidates else None
        cs = epsilon_dual_set(dset, args.eps, region, grid_step=step)
    doc = cs.to_dict()
    doc["manifest"] = _manifest(args, [args.input], _outputs(args.out))
    _write(args.out, dumps(doc))
    return 0


def _load_spectrum(path: str) -> SpectrumEstimate:
    try:
        return SpectrumEstimate.from_dict(_read_json(path))
    except (KeyError, TypeError) as exc:
        raise InputError(f"{path}: not a spectrum estimate ({exc})") from None


def cmd_peaks(args) -> int:
    spec = _load_spectrum(args.spectrum)
    peaks = visible_peaks(spec, args.a) if args.b is None else interval_peaks(spec, args.b, args.a)
    doc = peaks.to_dict()
    doc["manifest"] = _manifest(args, [args.spectrum], _outputs(args.out))
    _write(args.out, dumps(doc))
    return 0


def cmd_deform(args) -> int:
    ps, scheme = _load_pointset(args.input)
    remove = thin(ps, args.remove_frac, args.seed)
    gam, n_sym = deform(ps, remove, ())
    stats = {"n_original": len(ps), "n_removed": int(len(remove)), "n_deformed": len(gam),
             "sym_diff": n_sym, "sym_ratio": n_sym / len(ps)}
    doc = _pointset_doc(gam, scheme, _manifest(args, [args.input], _outputs(args.out)),
                        deformation=stats)
    _write(args.out, dumps(doc))
    return 0


def cmd_verify(args) -> int:
    params = _read_json(args.params) if args.params else {}
    if args.seed is not None:
        params["seed"] = args.seed
    reports = run_suite(args.suite, params)
    failures = count_failures(reports)
    doc = {"suite": args.suite, "failures": failures, "reports": [r.to_dict() for r in reports],
           "manifest": _manifest(args, [args.params] if args.params else [], _outputs(args.out))}
    _write(args.out, dumps(doc))
    for r in reports:
        tag = "ok  " if r.as_expected else "FAIL"
        kind = " (control)" if r.control else ""
        print(f"{tag} {r.name}{kind}: passed={r.passed} margin={r.margin:.6g}", file=sys.stderr)
    return min(failures, 125)


def cmd_export(args) -> int:
    spec = _load_spectrum(args.spectrum)
    _write(args.out, spec.to_csv(columns=("chi", "intensity")))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meyerlab", description="Meyer set diffraction laboratory")
    parser.add_argument("--version", action="version", version=f"meyerlab {__version__}")
    parser.add_argument("--config", help="JSON file with default values for the subcommand flags")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a point set patch")
    p.add_argument("--preset", choices=("zd", "fibonacci", "model"), required=True)
    p.add_argument("--size", type=int, required=True, help="number of points (per axis for zd, dim 2)")
    p.add_argument("--dim", type=int, choices=(1, 2), default=1)
    p.add_argument("--scheme", help="scheme JSON for --preset model (default: Fibonacci)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("diffract", help="estimate Bragg intensities")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--estimator", choices=("eqhof", "sf"), default="sf")
    p.add_argument("--candidates", default="dual", help="'dual' or 'grid:STEP'")
    p.add_argument("--cutoff", type=float, default=2.0, help="internal cutoff for dual candidates")
    p.add_argument("--freq-lo", type=float, nargs="+", default=[-10.0])
    p.add_argument("--freq-hi", type=float, nargs="+", default=[10.0])
    p.add_argument("--lag-radius", type=float)
    p.add_argument("--taper", choices=("fejer", "none"), default="fejer")
    p.add_argument("--refine", type=float, help="refine candidates within +-STEP/2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_diffract)

    p = sub.add_parser("dualset", help="epsilon-dual characters of the difference set")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--candidates", default="dual", help="'dual', 'grid' or 'grid:STEP'")
    p.add_argument("--cutoff", type=float, default=0.5)
    p.add_argument("--freq-lo", type=float, nargs="+", default=[-10.0])
    p.add_argument("--freq-hi", type=float, nargs="+", default=[10.0])
    p.add_argument("--out")
    p.set_defaults(func=cmd_dualset)

    p = sub.add_parser("peaks", help="visible (or band) peak set of a spectrum")
    p.add_argument("--spectrum", required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_peaks)

    p = sub.add_parser("deform", help="seeded Bernoulli thinning")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--remove-frac", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_deform)

    p = sub.add_parser("verify", help="run theorem checks")
    p.add_argument("--suite", choices=SUITES, default="all")
    p.add_argument("--params", help="JSON file overriding suite parameters")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export", help="plot data from a spectrum")
    p.add_argument("--spectrum", required=True)
    p.add_argument("--format", choices=("csv",), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    """Parse ``argv``; values from ``--config`` become subcommand defaults.

    Explicit flags still win, and a config value satisfies a required flag.
    """
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            cfg = _read_json(known.config)
        except (OSError, json.JSONDecodeError) as exc:
            raise OSError(f"cannot read config {known.config}: {exc}") from None
        sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        command = next((tok for tok in argv if tok in sub.choices), None)
        if command is not None:
            subparser = sub.choices[command]
            values = {k.replace("-", "_"): v for k, v in cfg.items()}
            actions = {a.dest: a for a in subparser._actions}
            unknown = sorted(set(values) - set(actions))
            if unknown:
                subparser.error(f"unknown config keys: {', '.join(unknown)}")
            for dest in values:
                actions[dest].required = False
            subparser.set_defaults(**values)
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except OSError as exc:
        print(f"meyerlab: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        return int(args.func(args))
    except (OSError, json.JSONDecodeError) as exc:
        print(f"meyerlab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InputError, ValueError) as exc:
        print(f"meyerlab: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
