"""Command-line front end.

Exit codes: 0 success, 1 invalid configuration, 2 numerical failure
(quadrature, density validity, estimator), 3 I/O failure.  Errors are also
reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys

from pydantic import ValidationError

from . import __version__
from .config import OverrideError, RunConfig, load_config
from .densities import build_schedule, validate_pair
from .errors import InvalidParameterError, LecamTailsError
from .estimators import estimate
from .experiments import run_separation_scan, run_two_point
from .sampling import read_column_csv, sample, samples_to_csv
from .verification import (
    chi_square,
    chi_square_order_scan,
    membership_certificate,
    membership_scan,
)

log = logging.getLogger("lecam_tails")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

TWOPOINT_COLUMNS = ["n", "arm", "p0_hat", "p0_own", "p1_hat", "joint_hat", "bound_rhs",
                    "gamma_tilde", "two_an", "se_p0", "se_p1"]
CHI2_COLUMNS = ["n", "chi2", "n_times_chi2", "quadrature_error_estimate"]
CERT_COLUMNS = ["n", "A_min", "witness_x", "region", "epsilon_ok", "C_gap", "A_ok",
                "inner_sup", "outer_sup"]


def fmt(value) -> str:
    """Locale-independent CSV cell; floats use the shortest round-trip repr."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row[c]) for c in columns])
    return buf.getvalue()


def jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if hasattr(obj, "item"):
        return jsonable(obj.item())
    return obj


class Output:
    def __init__(self, directory):
        self.dir = directory
        os.makedirs(directory, exist_ok=True)

    def write(self, name, text):
        with open(os.path.join(self.dir, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)

    def json(self, name, obj):
        self.write(name, json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


def _pair(cfg: RunConfig):
    params = cfg.class_params()
    s = cfg.schedule
    return validate_pair(build_schedule(params, s.n, s.lam, s.nu), params)


def _cert_row(cert):
    return dataclasses.asdict(cert)


def cmd_validate(cfg, out):
    pair = _pair(cfg)
    cert = membership_certificate(pair)
    out.json("validate.json", {
        "schedule": pair.schedule, "f1": pair.f1, "epsilon_ok": pair.epsilon_ok,
        "min_pdf": pair.min_pdf, "min_pdf_x": pair.min_pdf_x, "certificate": cert,
    })
    out.write("certificate.csv", csv_text(CERT_COLUMNS, [_cert_row(cert)]))
    return cert


def cmd_chi2(cfg, out):
    if cfg.chi2.n_grid:
        scan = chi_square_order_scan(cfg.class_params(), cfg.schedule.lam, cfg.schedule.nu,
                                     cfg.chi2.n_grid)
        reports, summary = scan.reports, {"slope": scan.slope, "ratio": scan.ratio}
    else:
        reports, summary = [chi_square(_pair(cfg))], {}
    out.write("chi2.csv", csv_text(CHI2_COLUMNS, [dataclasses.asdict(r) for r in reports]))
    out.json("chi2.json", {"reports": reports, **summary})
    return reports


def cmd_sample(cfg, out):
    pair = _pair(cfg)
    density = pair.f0 if cfg.sample.density == "f0" else pair.f1
    seed = cfg.seed_spec()
    values = sample(density, cfg.sample.size, seed)
    out.write("samples.csv", samples_to_csv(values, density=density, seed=seed))
    return values


def cmd_estimate(cfg, out):
    if not cfg.estimate.input:
        raise InvalidParameterError("estimate.input must name a CSV file")
    with open(cfg.estimate.input, encoding="utf-8") as fh:
        data = read_column_csv(fh.read())
    spec = cfg.estimator_spec()
    alpha_hat = estimate(spec, data)
    row = {"n": int(data.size), "kind": spec.kind, "alpha_hat": alpha_hat}
    out.write("estimate.csv", csv_text(["n", "kind", "alpha_hat"], [row]))
    out.json("estimate.json", {**row, "estimator": spec})
    return alpha_hat


def _twopoint_row(r):
    row = dataclasses.asdict(r)
    row["arm"] = r.arm
    return row


def cmd_twopoint(cfg, out):
    result = run_two_point(cfg.experiment_config())
    out.write("twopoint.csv", csv_text(TWOPOINT_COLUMNS, [_twopoint_row(result)]))
    out.json("twopoint.json", {"config": json.loads(cfg.to_json()), "result": result})
    return result


def cmd_scan(cfg, out):
    kind, grid = cfg.scan.kind, cfg.scan.n_grid
    params, s = cfg.class_params(), cfg.schedule
    if kind == "order":
        scan = chi_square_order_scan(params, s.lam, s.nu, grid)
        out.write("scan.csv", csv_text(CHI2_COLUMNS, [dataclasses.asdict(r) for r in scan.reports]))
        out.json("scan.json", {"kind": kind, "reports": scan.reports,
                               "slope": scan.slope, "ratio": scan.ratio})
    elif kind == "membership":
        scan = membership_scan(params, s.lam, s.nu, grid)
        out.write("scan.csv", csv_text(CERT_COLUMNS, [_cert_row(c) for c in scan.certificates]))
        out.json("scan.json", {"kind": kind, "certificates": scan.certificates, "ratio": scan.ratio})
    else:
        scan = run_separation_scan(cfg.experiment_config(), grid)
        rows = [_twopoint_row(r) for r in scan.results]
        out.write("scan.csv", csv_text(TWOPOINT_COLUMNS + ["joint_threshold_hit", "flagged"],
                                       [{**r, "joint_threshold_hit": r["joint_hat"] >= cfg.experiment.joint_threshold}
                                        for r in rows]))
        out.json("scan.json", {"kind": kind, "results": scan.results,
                               "any_flagged": scan.any_flagged})
    return scan


COMMANDS = {
    "validate": (cmd_validate, "check f1 is a proper density and certify class membership"),
    "chi2": (cmd_chi2, "chi-square divergence at one n, or an order scan over chi2.n_grid"),
    "sample": (cmd_sample, "draw samples from f0 or f1"),
    "estimate": (cmd_estimate, "run the configured estimator on a single-column CSV"),
    "twopoint": (cmd_twopoint, "Monte Carlo two-point experiment"),
    "scan": (cmd_scan, "order, membership or separation scan over scan.n_grid"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="lecam-tails", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="JSON run configuration")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="dot-path override, e.g. schedule.lambda=0")
        p.add_argument("--out", default="out", metavar="DIR", help="output directory")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _fail(code, exc):
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("region", "minimal_valid_n", "n"):
        if getattr(exc, attr, None) is not None:
            payload[attr] = jsonable(getattr(exc, attr))
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.overrides)
    except (ValidationError, OverrideError, json.JSONDecodeError, InvalidParameterError) as exc:
        return _fail(EXIT_CONFIG, exc)
    except OSError as exc:
        return _fail(EXIT_IO, exc)

    try:
        out = Output(args.out)
        out.write("config.resolved.json", cfg.to_json())
        COMMANDS[args.command][0](cfg, out)
    except InvalidParameterError as exc:
        return _fail(EXIT_CONFIG, exc)
    except LecamTailsError as exc:
        return _fail(EXIT_NUMERIC, exc)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
