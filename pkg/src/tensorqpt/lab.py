"""Experiment harness: assumption gate, scaling sweeps and report files."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Optional

from .errors import AlreadySatisfiedError, ConfigError, TensorQPTError
from .kernels import kernel_preset, rank_one_modify, select_anchor
from .oracle import MAX_FACTOR_SIZE, full_surrogate, worst_case_error
from .qpt import assemble_qpt_algorithm, envelope_coordinate, qpt_envelope_fit
from .smolyak import RateFit, build_univariate_sequence, measure_rate
from .spectral import check_eigenfunction_point_condition, discretize_problem, eigensystem, spectrum_summary
from .univariate import build_split, minimal_error_curve

SCHEMA_VERSION = 1
WORKERS_ENV = "TENSORQPT_WORKERS"
KERNELS = ("sobolev", "sobolev-modified")
CSV_COLUMNS = ("d", "eps", "k", "n", "card_bound", "card_dedup", "predicted_error", "oracle_error", "envelope_product")
GRID_NOTE = "sweep grid chosen by this harness; no reference protocol exists"


@dataclass(frozen=True)
class ExperimentConfig:
    kernel: str = "sobolev"
    modify: bool = True
    m: int = 32
    q: int = 32
    n_max: int = 16
    d: tuple = (1, 2, 3)
    eps: tuple = (0.5, 0.25, 0.1)
    oracle_ceiling: int = 3
    csv_path: Optional[str] = None
    json_path: Optional[str] = None
    seed: int = 0
    rate: Optional[dict] = None
    schema: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema {self.schema!r} (expected {SCHEMA_VERSION})")
        base = self.kernel[: -len("-modified")] if self.kernel.endswith("-modified") else self.kernel
        if base not in ("sobolev", "sobolev-min-plus-one"):
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if not self.d:
            raise ConfigError("d list is empty")
        if not self.eps:
            raise ConfigError("eps list is empty")
        if any(int(v) != v or v < 1 for v in self.d):
            raise ConfigError("d values must be positive integers")
        if list(self.d) != sorted(set(self.d)):
            raise ConfigError("d list must be strictly ascending")
        if any(not 0.0 < e < 1.0 for e in self.eps):
            raise ConfigError("eps values must lie in (0, 1)")
        if list(self.eps) != sorted(set(self.eps), reverse=True):
            raise ConfigError("eps list must be strictly descending")
        if self.m < 32:
            raise ConfigError("m must be at least 32")
        if self.n_max < 8 or self.q < 1:
            raise ConfigError("need n_max >= 8 and q >= 1")
        if not 0 <= self.oracle_ceiling <= 3:
            raise ConfigError("oracle ceiling must lie in 0..3")
        if self.rate is not None and not {"alpha", "r"} <= set(self.rate):
            raise ConfigError("rate override needs alpha and r")

    @property
    def wants_modification(self) -> bool:
        return self.modify or self.kernel.endswith("-modified")

    @property
    def base_kernel(self) -> str:
        return self.kernel[: -len("-modified")] if self.kernel.endswith("-modified") else self.kernel

    def to_dict(self) -> dict:
        out = asdict(self)
        out["d"] = list(self.d)
        out["eps"] = list(self.eps)
        return out

    def digest(self) -> str:
        payload = {k: v for k, v in self.to_dict().items() if k not in ("csv_path", "json_path")}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "schema" not in data:
            raise ConfigError("config lacks the schema field")
        kw = dict(data)
        try:
            if "d" in kw:
                kw["d"] = tuple(int(v) for v in kw["d"])
            if "eps" in kw:
                kw["eps"] = tuple(float(v) for v in kw["eps"])
            for key in ("m", "q", "n_max", "oracle_ceiling", "seed", "schema"):
                if key in kw:
                    kw[key] = int(kw[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    value: float
    detail: str = ""


@dataclass(eq=False)
class GateReport:
    kernel_id: str
    verdicts: list
    modified: bool
    first_pass: Optional[list] = None
    spectrum: object = field(default=None, repr=False)
    condition: object = field(default=None, repr=False)
    split: object = field(default=None, repr=False)
    decay: object = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_dict(self) -> dict:
        out = {
            "kernel_id": self.kernel_id,
            "modified": self.modified,
            "passed": self.passed,
            "verdicts": [asdict(v) for v in self.verdicts],
        }
        if self.first_pass is not None:
            out["before_modification"] = [asdict(v) for v in self.first_pass]
        return out


def _evaluate(problem, config: ExperimentConfig):
    spectrum = eigensystem(problem, min(config.q, problem.m))
    condition = check_eigenfunction_point_condition(spectrum)
    split = build_split(spectrum, condition=condition) if condition.holds else None
    curve = minimal_error_curve(split, problem, config.n_max)
    verdicts = [
        Verdict("gap", spectrum.lambda2 < spectrum.lambda1, spectrum.gap, f"lambda1={spectrum.lambda1:.6g} lambda2={spectrum.lambda2:.6g}"),
        Verdict("decay", curve.decay_e > 0, curve.decay_e, f"decay_e over n <= {len(curve.errors)} ({curve.target})"),
        Verdict(
            "point_condition",
            condition.holds,
            condition.residual,
            f"residual={condition.residual:.3g} tail={condition.eta_tail_max:.3g}",
        ),
    ]
    return spectrum, condition, split, curve, verdicts


def run_assumption_gate(config: ExperimentConfig, kernel=None) -> GateReport:
    """Check the gap, decay and point conditions; modify the kernel if needed.

    A failed point condition with ``config.wants_modification`` triggers the
    rank-one modification at the node maximizing ``|eta_1|``; the problem is
    then normalized and gated again under the new kernel id.
    """
    kernel = kernel_preset(config.base_kernel) if kernel is None else kernel
    problem = discretize_problem(kernel, config.m)
    spectrum, condition, split, curve, verdicts = _evaluate(problem, config)
    if condition.holds or not config.wants_modification:
        if condition.holds:
            problem = discretize_problem(kernel, config.m, normalize=True)
            spectrum, condition, split, curve, verdicts = _evaluate(problem, config)
        return GateReport(kernel.name, verdicts, False, None, spectrum, condition, split, curve)
    try:
        modified = rank_one_modify(kernel, spectrum, select_anchor(spectrum))
    except AlreadySatisfiedError:
        return GateReport(kernel.name, verdicts, False, None, spectrum, condition, split, curve)
    problem = discretize_problem(modified, config.m, normalize=True)
    spectrum2, condition2, split2, curve2, verdicts2 = _evaluate(problem, config)
    return GateReport(modified.name, verdicts2, True, verdicts, spectrum2, condition2, split2, curve2)


@dataclass(eq=False)
class RunRecord:
    config_hash: str
    config: dict
    kernel_id: str
    spectrum: dict
    decay_e: float
    rate: dict
    rows: list
    envelope: Optional[dict]
    failed: bool
    failures: list
    note: str = GRID_NOTE
    timestamps: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "config": self.config,
            "kernel_id": self.kernel_id,
            "spectrum": self.spectrum,
            "decay_e": _json_float(self.decay_e),
            "rate": self.rate,
            "rows": self.rows,
            "envelope": self.envelope,
            "status": "FAILED" if self.failed else "PASSED",
            "failures": self.failures,
            "note": self.note,
            "timestamps": self.timestamps,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        decay = data["decay_e"]
        return cls(
            data["config_hash"],
            data["config"],
            data["kernel_id"],
            data["spectrum"],
            math.inf if decay == "inf" else float(decay),
            data["rate"],
            data["rows"],
            data.get("envelope"),
            data["status"] == "FAILED",
            data.get("failures", []),
            data.get("note", GRID_NOTE),
            data.get("timestamps", {}),
        )

    def to_csv(self, columns=CSV_COLUMNS) -> str:
        return rows_to_csv(self.rows, columns)


def _json_float(x: float):
    return "inf" if math.isinf(x) else x


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def rows_to_csv(rows, columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in sorted(rows, key=lambda r: (r["d"], -r["eps"])):
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc


def sweep_rows(split, rate: RateFit, d_list, eps_list, sequence=None, oracle_ceiling: int = 0):
    """One row per ``(d, eps)``; oracle errors where ``d <= oracle_ceiling``."""
    problem = split.problem
    oracle_ok = sequence is not None and problem.m <= MAX_FACTOR_SIZE

    def cell(d, eps):
        use_oracle = oracle_ok and d <= oracle_ceiling
        plan = assemble_qpt_algorithm(d, eps, split, rate, sequence if use_oracle else None, materialize=use_oracle)
        err = worst_case_error(plan.algorithm, full_surrogate(problem, d)) if use_oracle else None
        return {
            "d": d,
            "eps": float(eps),
            "k": plan.k,
            "n": plan.n,
            "card_bound": plan.card_bound,
            "card_terms": plan.card_terms,
            "card_dedup": plan.card_dedup,
            "predicted_error": plan.predicted_error,
            "oracle_error": err,
            "envelope_product": envelope_coordinate(d, eps),
            "capped": list(plan.capped),
        }

    jobs = [(d, e) for d in d_list for e in eps_list]
    workers = _workers()
    if workers == 1:
        rows = [cell(d, e) for d, e in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda job: cell(*job), jobs))
    return sorted(rows, key=lambda r: (r["d"], -r["eps"]))


def fit_envelope(rows) -> Optional[dict]:
    data = [(r["d"], r["eps"], r["card_dedup"]) for r in rows]
    try:
        c, t_qpt = qpt_envelope_fit(data)
    except TensorQPTError:
        return None
    return {"C": c, "t_qpt": t_qpt}


def run_scaling_sweep(config: ExperimentConfig, gate: Optional[GateReport] = None) -> RunRecord:
    """Gate, fit the rate, assemble every ``(d, eps)`` cell and fit the envelope.

    Raises
    ------
    AssemblyError
        When the gate fails (after the optional modification).
    """
    from .errors import AssemblyError

    started = datetime.now(timezone.utc).isoformat()
    gate = run_assumption_gate(config) if gate is None else gate
    if not gate.passed:
        failing = [v.name for v in gate.verdicts if not v.passed]
        raise AssemblyError(f"assumption gate failed: {', '.join(failing)}")
    split = gate.split
    sequence = build_univariate_sequence(split)
    if config.rate is not None:
        rate = RateFit(float(config.rate["alpha"]), float(config.rate["r"]), 0.0)
    else:
        rate = measure_rate(split, sequence)
    rows = sweep_rows(split, rate, config.d, config.eps, sequence, config.oracle_ceiling)
    failures = [
        f"d={r['d']} eps={r['eps']}: oracle error {r['oracle_error']:.6g} > eps"
        for r in rows
        if r["oracle_error"] is not None and r["oracle_error"] > r["eps"]
    ]
    failures += [f"d={r['d']} eps={r['eps']}: card {r['card_dedup']} > bound {r['card_bound']}" for r in rows if r["card_dedup"] > r["card_bound"]]
    summary = spectrum_summary(gate.spectrum, gate.condition)
    return RunRecord(
        config_hash=config.digest(),
        config=config.to_dict(),
        kernel_id=gate.kernel_id,
        spectrum={key: summary[key] for key in ("lambdas", "gap", "decay_lambda", "t", "delta")},
        decay_e=gate.decay.decay_e,
        rate=rate.to_dict(),
        rows=rows,
        envelope=fit_envelope(rows),
        failed=bool(failures),
        failures=failures,
        timestamps={"started": started, "finished": datetime.now(timezone.utc).isoformat()},
    )


def emit_report(record: RunRecord, csv_path=None, json_path=None) -> None:
    """Write the CSV (one row per cell) and/or the full JSON record.

    Raises ``OSError`` for unwritable paths.
    """
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            fh.write(record.to_csv())
    if json_path is not None:
        with open(json_path, "w") as fh:
            fh.write(record.to_json())
            fh.write("\n")
