"""``tensorqpt`` command line.

Exit codes: 0 pass, 2 gate failure, 3 oracle bound violated, 4 config or I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import AssemblyError, ConfigError, TensorQPTError

EXIT_OK = 0
EXIT_GATE = 2
EXIT_ORACLE = 3
EXIT_CONFIG = 4

SCALING_COLUMNS = ("d", "eps", "k", "n", "card_bound", "card_dedup", "predicted_error", "envelope_product")

log = logging.getLogger("tensorqpt")


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config; its values override the flags")
    p.add_argument("--kernel", default=None, help="sobolev or sobolev-modified")
    p.add_argument("--m", type=int, default=None, help="quadrature nodes of the surrogate")
    p.add_argument("--out", default=None, help="output file (stdout if omitted)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tensorqpt", description="Sparse-grid tractability experiments on tensor product kernels.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gate", help="check the three assumptions (modifying the kernel if allowed)")
    _common(p)
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--no-modify", action="store_true", help="report the raw verdicts only")

    p = sub.add_parser("spectrum", help="eigenvalues and point condition as JSON")
    _common(p)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--normalize", action="store_true")

    p = sub.add_parser("decay", help="greedy error curve e_n as CSV")
    _common(p)
    p.add_argument("--n-max", type=int, default=None)

    p = sub.add_parser("assemble", help="assemble one plan as JSON, with an oracle check for small d")
    _common(p)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)

    p = sub.add_parser("scaling", help="counting-only sweep as CSV")
    _common(p)
    p.add_argument("--d", type=_int_list, default=None)
    p.add_argument("--eps", type=_float_list, default=None)

    p = sub.add_parser("report", help="full sweep: CSV and JSON run record")
    _common(p)
    p.add_argument("--d", type=_int_list, default=None)
    p.add_argument("--eps", type=_float_list, default=None)
    p.add_argument("--json", dest="json_out", default=None, help="JSON record path")
    return parser


def _config(args, **flags):
    from .lab import ExperimentConfig

    values = {"kernel": args.kernel or "sobolev-modified", "m": args.m}
    values.update(flags)
    values = {k: v for k, v in values.items() if v is not None}
    if args.config:
        loaded = ExperimentConfig.load(args.config)
        values.update(loaded.to_dict())
        return ExperimentConfig.from_dict(values | {"schema": loaded.schema})
    return ExperimentConfig.from_dict(values | {"schema": 1})


def _write(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _cmd_gate(args) -> int:
    from .lab import run_assumption_gate

    flags = {"n_max": args.n_max}
    if args.no_modify:
        flags.update(modify=False, kernel="sobolev")
    cfg = _config(args, **flags)
    report = run_assumption_gate(cfg)
    _write(json.dumps(report.to_dict(), indent=2), args.out)
    return EXIT_OK if report.passed else EXIT_GATE


def _prepared(cfg):
    from .lab import run_assumption_gate

    gate = run_assumption_gate(cfg)
    if not gate.passed:
        failing = ", ".join(v.name for v in gate.verdicts if not v.passed)
        raise AssemblyError(f"assumption gate failed: {failing}")
    return gate


def _cmd_spectrum(args) -> int:
    from .kernels import kernel_preset, rank_one_modify, select_anchor
    from .spectral import check_eigenfunction_point_condition, discretize_problem, eigensystem, spectrum_to_json

    cfg = _config(args, q=args.q, modify=False)
    kernel = kernel_preset(cfg.base_kernel)
    problem = discretize_problem(kernel, cfg.m, normalize=args.normalize and not cfg.wants_modification)
    spectrum = eigensystem(problem, min(cfg.q, problem.m))
    if cfg.wants_modification:
        kernel = rank_one_modify(kernel, spectrum, select_anchor(spectrum))
        problem = discretize_problem(kernel, cfg.m, normalize=args.normalize)
        spectrum = eigensystem(problem, min(cfg.q, problem.m))
    condition = check_eigenfunction_point_condition(spectrum)
    _write(spectrum_to_json(spectrum, condition), args.out)
    return EXIT_OK


def _cmd_decay(args) -> int:
    from .lab import run_assumption_gate
    from .univariate import minimal_error_curve

    cfg = _config(args, n_max=args.n_max)
    gate = run_assumption_gate(cfg)
    curve = gate.decay if gate.decay is not None else minimal_error_curve(None, gate.spectrum.problem, cfg.n_max)
    _write(curve.to_csv(), args.out)
    log.info("decay_e = %s (%s)", curve.decay_e, curve.target)
    return EXIT_OK


def _cmd_assemble(args) -> int:
    from .oracle import MAX_DIM, full_surrogate, worst_case_error
    from .qpt import assemble_qpt_algorithm
    from .smolyak import RateFit, build_univariate_sequence, measure_rate

    cfg = _config(args)
    d = args.d if args.d is not None else cfg.d[-1]
    eps = args.eps if args.eps is not None else cfg.eps[-1]
    gate = _prepared(cfg)
    seq = build_univariate_sequence(gate.split)
    rate = RateFit(cfg.rate["alpha"], cfg.rate["r"], 0.0) if cfg.rate else measure_rate(gate.split, seq)
    use_oracle = d <= min(MAX_DIM, cfg.oracle_ceiling)
    plan = assemble_qpt_algorithm(d, eps, gate.split, rate, seq if use_oracle else None, materialize=use_oracle)
    out = plan.to_dict()
    out["kernel_id"] = gate.kernel_id
    status = EXIT_OK
    if use_oracle:
        err = worst_case_error(plan.algorithm, full_surrogate(gate.split.problem, d))
        out["oracle_error"] = err
        if err > eps:
            status = EXIT_ORACLE
    _write(json.dumps(out, indent=2), args.out)
    return status


def _cmd_scaling(args) -> int:
    from .lab import rows_to_csv, sweep_rows
    from .smolyak import RateFit, build_univariate_sequence, measure_rate

    cfg = _config(args, d=args.d, eps=args.eps)
    gate = _prepared(cfg)
    rate = RateFit(cfg.rate["alpha"], cfg.rate["r"], 0.0) if cfg.rate else measure_rate(gate.split, build_univariate_sequence(gate.split))
    rows = sweep_rows(gate.split, rate, cfg.d, cfg.eps)
    bad = [r for r in rows if r["card_dedup"] > r["card_bound"]]
    _write(rows_to_csv(rows, SCALING_COLUMNS), args.out)
    return EXIT_ORACLE if bad else EXIT_OK


def _cmd_report(args) -> int:
    from .lab import emit_report, run_scaling_sweep

    cfg = _config(args, d=args.d, eps=args.eps)
    csv_path = args.out or cfg.csv_path
    json_path = args.json_out or cfg.json_path
    record = run_scaling_sweep(cfg)
    if csv_path is None and json_path is None:
        _write(record.to_csv(), None)
    else:
        emit_report(record, csv_path, json_path)
    for line in record.failures:
        log.error("%s", line)
    return EXIT_ORACLE if record.failed else EXIT_OK


COMMANDS = {
    "gate": _cmd_gate,
    "spectrum": _cmd_spectrum,
    "decay": _cmd_decay,
    "assemble": _cmd_assemble,
    "scaling": _cmd_scaling,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except AssemblyError as exc:
        log.error("%s", exc)
        return EXIT_GATE
    except TensorQPTError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
