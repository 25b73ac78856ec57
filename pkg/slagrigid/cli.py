"""
Command-line front end.

    slagrigid region check --spectrum 0,0 --K 1
    slagrigid region scan --n 3 --K 3 --count 500 --seed 1 --condition xiprime
    slagrigid form eval --spectrum 1,1,-0.4 --tensor random:11
    slagrigid rotate --spectra spectra.txt --K 1
    slagrigid field report --source harmonic_expcos --K 2 --stride 4

Reports are JSON on stdout (or --output). Exit codes: 0 success, 1 usage
error, 2 input error, 3 a region inclusion or implication was violated.
"""
import argparse
import csv
import io
import json
import logging
import math
import pathlib
import re
import sys
from dataclasses import dataclass
from typing import List, Optional, Sequence

from slagrigid import __version__, cfg
from slagrigid.gaussmap import find_admissible_rotation
from slagrigid.regions import (
    CONDITIONS,
    Spectrum,
    classify,
    rayleigh_oracle_min,
    region_scan,
    spectra_from_lines,
    xi_margin,
    xi_prime_margin,
)
from slagrigid.slagfield import is_builtin, load_field, refinement_study, superharmonicity_report
from slagrigid.stability import (
    bracket_identity_residual,
    evaluate_form_22,
    evaluate_form_24,
    evaluate_form_24_bruteforce,
    lagrangianize,
    pair_inequality_min,
    strengthened_form,
    trace_identity_residual,
)
from slagrigid.sym3tensor import Sym3Tensor, ambient_norm_sq, random_tensor, random_trace_free, traces
from slagrigid.utils import dumps_report, setup_logging

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_VIOLATION = 0, 1, 2, 3


class UsageError(Exception):
    def __init__(self, message: str, usage: str):
        super().__init__(message)
        self.usage = usage


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}", self.format_usage())


def _spectrum_arg(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("-o", "--output", default=None, help="Write the JSON report here instead of stdout")
    parser.add_argument(
        "-ll",
        "--log_level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Logging level (logs go to stderr)",
    )
    parser.add_argument("--tol", type=float, default=cfg.tol, help="Membership tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="slagrigid", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    region = commands.add_parser("region").add_subparsers(dest="action", required=True, parser_class=_ArgumentParser)
    check = region.add_parser("check", help="Classify one spectrum")
    check.add_argument("--spectrum", type=_spectrum_arg, required=True)
    check.add_argument("--K", type=float, required=True)
    check.add_argument("--oracle", type=int, default=None, help="Also sample this many random unit trace-free tensors")
    check.add_argument("--seed", type=int, default=0, help="Seed for --oracle")
    _add_common(check)

    scan = region.add_parser("scan", help="Classify random spectra")
    scan.add_argument("--n", type=int, required=True)
    scan.add_argument("--K", type=float, required=True)
    scan.add_argument("--count", type=int, required=True)
    scan.add_argument("--seed", type=int, required=True)
    scan.add_argument("--condition", choices=CONDITIONS, default="none")
    scan.add_argument("-p", "--processes", type=int, default=None)
    scan.add_argument("--format", choices=["json", "csv"], default="json")
    scan.add_argument("--progress", action="store_true")
    _add_common(scan)

    form = commands.add_parser("form").add_subparsers(dest="action", required=True, parser_class=_ArgumentParser)
    evaluate = form.add_parser("eval", help="Evaluate the stability forms on one tensor")
    evaluate.add_argument("--spectrum", type=_spectrum_arg, required=True)
    evaluate.add_argument(
        "--tensor",
        required=True,
        help="JSON tensor file, random:<seed> (unit trace-free) or random-full:<seed>",
    )
    _add_common(evaluate)

    rotate = commands.add_parser("rotate", help="Search a diagonal rotation into Xi ∩ B_K")
    rotate.add_argument("--spectra", required=True, help="File with one comma-separated spectrum per line")
    rotate.add_argument("--K", type=float, required=True)
    _add_common(rotate)

    field = commands.add_parser("field").add_subparsers(dest="action", required=True, parser_class=_ArgumentParser)
    report = field.add_parser("report", help="Superharmonicity report of a gridded potential")
    report.add_argument("--source", required=True, help="JSON field file or builtin:<descriptor>")
    report.add_argument("--K", type=float, required=True)
    report.add_argument("--c", type=float, default=None)
    report.add_argument("--spacing", type=float, default=None, help="Grid spacing of a builtin")
    report.add_argument("--half_width", type=float, default=None, help="Grid half-width of a builtin")
    report.add_argument("--stride", type=int, default=1)
    report.add_argument("--refine", type=int, default=None, help="Repeat a builtin under this many spacing halvings")
    report.add_argument("--summary", action="store_true", help="Omit the per-point table")
    _add_common(report)
    return parser


@dataclass(frozen=True)
class RunConfig:
    command: str
    args: argparse.Namespace
    argv: tuple


def _validate(parser: argparse.ArgumentParser, args: argparse.Namespace):
    def positive(name):
        value = getattr(args, name, None)
        if value is not None and not value > 0:
            parser.error(f"--{name} must be positive, got {value}")

    for name in ("K", "count", "n", "stride", "spacing", "half_width", "oracle", "processes"):
        positive(name)
    if not (math.isfinite(args.tol) and args.tol >= 0):
        parser.error(f"--tol must be nonnegative, got {args.tol}")
    if getattr(args, "refine", None) is not None and args.refine < 2:
        parser.error(f"--refine needs at least 2 levels, got {args.refine}")


_NEGATIVE_LIST = re.compile(r"^-\.?\d")


def _attach_negative_lists(argv: Sequence[str]) -> List[str]:
    """Rewrite `--spectrum -1,2` as `--spectrum=-1,2`; argparse reads `-1,2` as an option."""
    out = []
    tokens = iter(argv)
    for token in tokens:
        if token == "--spectrum":
            value = next(tokens, None)
            if value is not None and _NEGATIVE_LIST.match(value):
                out.append(f"{token}={value}")
                continue
            out.append(token)
            if value is not None:
                out.append(value)
            continue
        out.append(token)
    return out


def parse_args(argv: Sequence[str]) -> RunConfig:
    parser = build_parser()
    args = parser.parse_args(_attach_negative_lists(argv))
    _validate(parser, args)
    command = " ".join(filter(None, (args.command, getattr(args, "action", None))))
    return RunConfig(command, args, tuple(argv))


def _header(config: RunConfig, seed=None) -> dict:
    return {
        "command": config.command,
        "version": __version__,
        "argv": list(config.argv),
        "seed": seed,
        "tolerance": config.args.tol,
    }


def read_tensor(spec: str, n: int) -> Sym3Tensor:
    """random:<seed>, random-full:<seed>, or a JSON file {"n": n, "components": {"i,j,k": value}} with 1-based indices."""
    kind, _, seed = spec.partition(":")
    if kind in ("random", "random-full") and seed:
        try:
            seed = int(seed)
        except ValueError:
            raise ValueError(f"tensor seed must be an integer, got {seed!r}") from None
        return random_trace_free(n, seed) if kind == "random" else random_tensor(n, seed)

    path = pathlib.Path(spec)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    if not isinstance(data, dict) or set(data) != {"n", "components"}:
        raise ValueError(f"{path}: expected an object with keys 'n' and 'components'")
    n = data["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ValueError(f"{path}: key 'n' must be a positive integer, got {n!r}")
    if not isinstance(data["components"], dict):
        raise ValueError(f"{path}: key 'components' must be an object of \"i,j,k\": value pairs")
    components = {}
    for key, value in data["components"].items():
        try:
            triple = tuple(int(i) - 1 for i in key.split(","))
        except ValueError:
            raise ValueError(f"{path}: component key {key!r} is not i,j,k") from None
        if len(triple) != 3 or min(triple) < 0:
            raise ValueError(f"{path}: component key {key!r} is not a 1-based triple")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"{path}: component {key!r} must be a number, got {value!r}")
        components[triple] = float(value)
    try:
        return Sym3Tensor.from_components(n, components)
    except ValueError as e:
        raise ValueError(f"{path}: {e}") from e


def _region_check(config: RunConfig):
    args = config.args
    report = classify(Spectrum(args.spectrum), args.K, args.tol)
    out = {**_header(config, args.seed if args.oracle else None), **report.to_dict()}
    out["counterexamples"] = [report.spectrum.tolist()] if report.violations() else []
    out["violations"] = report.violations()
    if args.oracle:
        out["oracle_min"] = rayleigh_oracle_min(report.spectrum, args.oracle, args.seed)
    return out, EXIT_VIOLATION if report.violations() else EXIT_OK


def scan_csv(summary) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = ["ball", "xi", "xi_prime", "m", "strengthened"]
    writer.writerow(["index"] + [f"lambda_{i + 1}" for i in range(summary.n)] + names)
    for row in summary.rows:
        writer.writerow([row["index"]] + [repr(v) for v in row["spectrum"]] + [repr(row[k]) for k in names])
    return buf.getvalue()


def _region_scan(config: RunConfig):
    args = config.args
    summary = region_scan(
        args.n,
        args.K,
        args.count,
        args.seed,
        condition=args.condition,
        tol=args.tol,
        processes=args.processes,
        progress=args.progress,
    )
    code = EXIT_VIOLATION if summary.counterexamples else EXIT_OK
    if args.format == "csv":
        return scan_csv(summary), code
    return {**_header(config, args.seed), **summary.to_dict()}, code


def _form_eval(config: RunConfig):
    args = config.args
    # tensor indices refer to the eigenvalues in the order given
    spectrum = Spectrum(args.spectrum)
    lam = list(args.spectrum)
    t = read_tensor(args.tensor, spectrum.n)
    if t.n != spectrum.n:
        raise ValueError(f"spectrum has n={spectrum.n} but the tensor has n={t.n}")
    norm_sq = ambient_norm_sq(t)
    max_trace = float(max(abs(traces(t)))) if t.n else 0.0
    trace_free = max_trace <= cfg.trace_tol
    in_xi = xi_margin(spectrum) >= -args.tol
    in_xi_prime = xi_prime_margin(spectrum) >= -args.tol

    out = {
        **_header(config, None),
        "spectrum": lam,
        "norm_sq": norm_sq,
        "max_trace": max_trace,
        "form24": evaluate_form_24(lam, t),
        "form24_bruteforce": evaluate_form_24_bruteforce(lam, t),
        "form22_lagrangian": evaluate_form_22(lam, lagrangianize(t)),
        "strengthened": strengthened_form(lam, t),
        "bracket_identity_residual": bracket_identity_residual(lam, t),
        "trace_identity_residual": trace_identity_residual(lam, t) if trace_free else None,
        "pair_inequality_min": pair_inequality_min(lam, t) if spectrum.n >= 3 else None,
        "flags": {"in_xi": in_xi, "in_xi_prime": in_xi_prime},
    }
    violations = []
    slack = args.tol * (1.0 + norm_sq)
    if trace_free and in_xi and out["form24"] < -slack:
        violations.append("xi_not_superharmonic")
    if trace_free and in_xi_prime and out["strengthened"] < -slack:
        violations.append("xi_prime_not_strengthened")
    out["violations"] = violations
    out["counterexamples"] = [lam] if violations else []
    return out, EXIT_VIOLATION if violations else EXIT_OK


def _rotate(config: RunConfig):
    args = config.args
    path = pathlib.Path(args.spectra)
    spectra = spectra_from_lines(path.read_text(encoding="utf-8").splitlines())
    if not spectra:
        raise ValueError(f"{path}: no spectra found")
    result = find_admissible_rotation(spectra, args.K, args.tol)
    return {**_header(config, None), "K": args.K, "count": len(spectra), **result.to_dict()}, EXIT_OK


def _field_report(config: RunConfig):
    args = config.args
    fld = load_field(args.source, args.spacing, args.half_width)
    report = superharmonicity_report(fld, args.K, args.c, args.tol, args.stride)
    out = {**_header(config, None), **report.to_dict()}
    if args.summary:
        del out["points"]
    if args.refine:
        if not is_builtin(args.source):
            raise ValueError("--refine needs a builtin source")
        out["refinement"] = refinement_study(
            args.source, fld.spacing, args.refine, args.K, args.c, args.tol, args.half_width, args.stride
        )
    out["counterexamples"] = [p.analysis.spectrum.tolist() for p in report.points if p.violations]
    return out, EXIT_VIOLATION if report.violations else EXIT_OK


HANDLERS = {
    "region check": _region_check,
    "region scan": _region_scan,
    "form eval": _form_eval,
    "rotate": _rotate,
    "field report": _field_report,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        config = parse_args(argv)
    except UsageError as e:
        sys.stderr.write(e.usage)
        sys.stderr.write(f"{e}\n")
        return EXIT_USAGE
    except SystemExit as e:
        # --help and --version
        return e.code if isinstance(e.code, int) else EXIT_OK

    setup_logging(config.args.log_level, print_stdout=True, stream=sys.stderr)
    logging.debug("running %s with %s", config.command, config.argv)
    try:
        out, code = HANDLERS[config.command](config)
    except (ValueError, OSError, RuntimeError) as e:
        logging.debug("input error", exc_info=True)
        sys.stderr.write(f"slagrigid: error: {e}\n")
        return EXIT_INPUT

    text = out if isinstance(out, str) else dumps_report(out)
    if config.args.output:
        pathlib.Path(config.args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
