"""Command-line entry point: ``mvpure analyze | rank-profile | simulate``.

Exit codes: 0 success, 2 usage, 3 unreadable or malformed input file,
4 invalid model or arguments, 5 numerical failure.
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import estimators, mimo
from .exceptions import InvalidInput, ModelValidationError, MVPureError, NumericalFailure
from .model import load_model, validate
from .plotting import line_plot
from .rank_analysis import noise_thresholds, optimal_rank, rank_profile, weyl_bounds

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_NUMERICAL = 5

ANALYSIS_HEADER = (
    "r", "delta", "mse", "r_opt", "weyl_lower", "weyl_upper",
    "benefit_threshold", "window_low", "window_high", "window_empty",
)
PROFILE_HEADER = ("eps", "snr_db", "r_opt", "sigma_tail", "deltas")

log = logging.getLogger("mvpure")


class InputFileError(Exception):
    pass


def _read_model(path):
    try:
        return load_model(path)
    except OSError as exc:
        raise InputFileError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputFileError(f"malformed JSON in {path}: {exc}") from exc


def _out_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_floats(text, flag):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidInput(f"{flag} expects a comma-separated list of numbers, got {text!r}") from None


def cmd_analyze(model_file, out):
    model = _read_model(model_file)
    validate(model)
    out = _out_dir(out)
    report = optimal_rank(model)
    m = model.m

    with open(out / "analysis.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ANALYSIS_HEADER)
        for r in range(1, m + 1):
            lower, upper = weyl_bounds(model, r)
            row = [r, repr(float(report.deltas[r - 1])), repr(float(report.per_rank_mse[r - 1])), report.r_opt,
                   repr(float(lower)), repr(float(upper))]
            if r < m:
                cert = noise_thresholds(model.H, model.Rx, model.Rn, r)
                row += [repr(cert.benefit_threshold), repr(cert.window_low), repr(cert.window_high),
                        int(cert.window_empty)]
            else:
                row += ["", "", "", ""]
            writer.writerow(row)

    mv = {str(r): estimators.mv_pure(model, r).to_dict() for r in range(1, m + 1)}
    doc = {
        "r_opt": report.r_opt,
        "degenerate_all_nonnegative": bool(report.degenerate_all_nonnegative),
        "tie_at_boundary": bool(report.tie_at_boundary),
        "MMSE": estimators.mmse(model).to_dict(),
        "BLUE": estimators.blue(model).to_dict(),
        "MV-PURE": mv,
        "analytic_mse": {
            "MMSE": estimators.analytic_mse(model, estimators.mmse(model)),
            "BLUE": estimators.analytic_mse(model, estimators.blue(model)),
            "MV-PURE": report.per_rank_mse.tolist(),
        },
    }
    (out / "estimators.json").write_text(json.dumps(doc, indent=2))
    print(f"r_opt = {report.r_opt}; per-rank MSE = {np.round(report.per_rank_mse, 6).tolist()}")
    return EXIT_OK


def cmd_rank_profile(model_file, out, eps=None, snr_db=None):
    model = _read_model(model_file)
    validate(model)
    if eps is not None:
        eps_list = _parse_floats(eps, "--eps")
    else:
        snrs = _parse_floats(snr_db, "--snr-db")
        eps_list = [mimo.eps_from_snr(s) for s in snrs]
        # ascending SNR grids are the usual way to write them
        if len(eps_list) > 1 and all(b < a for a, b in zip(eps_list, eps_list[1:])):
            eps_list = eps_list[::-1]
    out = _out_dir(out)
    reports = rank_profile(model.H, model.Rx, model.Rn, eps_list)

    with open(out / "rank_profile.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PROFILE_HEADER)
        for rep in reports:
            writer.writerow([
                repr(rep.eps),
                repr(mimo.snr_from_eps(rep.eps)),
                rep.r_opt,
                "" if rep.sigma_tail is None else repr(rep.sigma_tail),
                ";".join(repr(float(d)) for d in rep.deltas),
            ])

    pts = sorted((mimo.snr_from_eps(r.eps), r.sigma_tail) for r in reports)
    svg = line_plot(
        {f"sigma_{model.m - 1}": pts},
        title="Second-smallest eigenvalue of H^t Ry^-1 H",
        xlabel="SNR [dB]",
        ylabel="sigma",
        hlines=(0.5,),
    )
    (out / "sigma_tail.svg").write_text(svg)
    print("r_opt per eps: " + ", ".join(f"{r.eps:g}:{r.r_opt}" for r in reports))
    return EXIT_OK


def cmd_simulate(scenario_file, out, knowledge="exact"):
    try:
        scenario = mimo.load_scenario(scenario_file)
    except OSError as exc:
        raise InputFileError(f"cannot read {scenario_file}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputFileError(f"malformed JSON in {scenario_file}: {exc}") from exc
    out = _out_dir(out)
    result = mimo.run_experiment(scenario, knowledge)

    with open(out / "mse_vs_snr.csv", "w", newline="") as fh:
        result.to_csv(fh)

    modes = mimo.KNOWLEDGE_MODES if knowledge == "both" else (knowledge,)
    for mode in modes:
        names = []
        for row in result.select(knowledge=mode):
            if row.estimator != "FAILED" and row.estimator not in names:
                names.append(row.estimator)
        series = {name: result.series(name, mode) for name in names}
        svg = line_plot(series, title=f"MSE vs SNR ({mode} knowledge)", xlabel="SNR [dB]", ylabel="MSE [dB]")
        (out / f"mse_vs_snr_{mode}.svg").write_text(svg)
    tails = {f"sigma_{2 * scenario.M - 1} ({mode})": result.sigma_tails(mode) for mode in modes}
    svg = line_plot(tails, title="Tracked eigenvalue vs SNR", xlabel="SNR [dB]", ylabel="sigma", hlines=(0.5,))
    (out / "sigma_tail.svg").write_text(svg)

    for p in result.failures:
        log.warning("SNR %g dB (%s) failed: %s", p.snr_db, p.knowledge, p.error)
    if len(result.failures) == len(result.points):
        return EXIT_NUMERICAL
    print(f"wrote {len(result.rows)} rows to {out / 'mse_vs_snr.csv'}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="mvpure", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="per-rank MSE, optimal rank and noise thresholds of one model")
    p.add_argument("model", help="model JSON with keys H, Rx, Rn, eps")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("rank-profile", help="optimal rank over a grid of noise powers")
    p.add_argument("model")
    grid = p.add_mutually_exclusive_group(required=True)
    grid.add_argument("--eps", help="comma-separated strictly increasing noise powers")
    grid.add_argument("--snr-db", help="comma-separated SNR values in dB")
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="Monte-Carlo MIMO MSE-vs-SNR experiment")
    p.add_argument("scenario", help="scenario JSON")
    p.add_argument("--knowledge", choices=("exact", "empirical", "both"), default="exact")
    p.add_argument("--out", required=True)
    return parser


def _glue_negative_lists(argv):
    # argparse reads "--snr-db -4,0,8" as two options; rewrite to "--snr-db=-4,0,8"
    out = []
    it = iter(argv)
    for tok in it:
        if tok in ("--eps", "--snr-db"):
            nxt = next(it, None)
            if nxt is not None and nxt[:1] == "-" and nxt[1:2] in tuple("0123456789."):
                out.append(f"{tok}={nxt}")
                continue
            out.append(tok)
            if nxt is not None:
                out.append(nxt)
        else:
            out.append(tok)
    return out


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_glue_negative_lists(argv))
    try:
        if args.command == "analyze":
            return cmd_analyze(args.model, args.out)
        if args.command == "rank-profile":
            return cmd_rank_profile(args.model, args.out, eps=args.eps, snr_db=args.snr_db)
        return cmd_simulate(args.scenario, args.out, args.knowledge)
    except InputFileError as exc:
        log.error("%s", exc)
        return EXIT_PARSE
    except ModelValidationError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_VALIDATION
    except InvalidInput as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_VALIDATION
    except NumericalFailure as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_NUMERICAL
    except MVPureError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
