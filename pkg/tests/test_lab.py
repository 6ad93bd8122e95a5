import json

import numpy as np
import pytest

from tensorqpt.errors import AssemblyError, ConfigError
from tensorqpt.kernels import tabulated_kernel
from tensorqpt.lab import (
    CSV_COLUMNS,
    ExperimentConfig,
    RunRecord,
    emit_report,
    run_assumption_gate,
    run_scaling_sweep,
)


def _cfg(**kw):
    base = dict(d=(1, 2), eps=(0.5, 0.25), rate={"alpha": 0.3, "r": 0.55})
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.mark.parametrize(
    "bad",
    [
        {"d": ()},
        {"eps": ()},
        {"d": (3, 2)},
        {"eps": (0.1, 0.5)},
        {"eps": (1.5,)},
        {"m": 8},
        {"kernel": "gauss"},
        {"schema": 99},
        {"rate": {"alpha": 1.0}},
    ],
)
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        _cfg(**bad)


def test_config_dict_round_trip(tmp_path):
    cfg = _cfg()
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    back = ExperimentConfig.load(path)
    assert back == cfg and back.digest() == cfg.digest()
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"d": [1]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"schema": 1, "colour": "red"})
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.json")


def test_gate_unmodified_and_modified():
    raw = run_assumption_gate(_cfg(modify=False))
    verdicts = {v.name: v.passed for v in raw.verdicts}
    assert verdicts == {"gap": True, "decay": True, "point_condition": False}
    assert not raw.passed and raw.kernel_id == "sobolev"

    mod = run_assumption_gate(_cfg())
    assert mod.passed and mod.modified
    assert mod.kernel_id == "sobolev-modified"
    assert {v.name: v.passed for v in mod.first_pass} == verdicts


def test_gate_rank_one_kernel():
    nodes = np.linspace(0, 1, 65)
    kernel = tabulated_kernel(nodes, 1.0 + nodes)
    report = run_assumption_gate(_cfg(modify=False), kernel=kernel)
    verdicts = {v.name: v for v in report.verdicts}
    assert verdicts["gap"].passed
    assert verdicts["decay"].passed and verdicts["decay"].value == np.inf
    assert not report.modified


def test_failed_gate_blocks_sweep():
    with pytest.raises(AssemblyError):
        run_scaling_sweep(_cfg(modify=False))


def test_sweep_determinism_and_round_trip(tmp_path):
    cfg = _cfg()
    a = run_scaling_sweep(cfg)
    b = run_scaling_sweep(cfg)
    assert a.to_csv() == b.to_csv()
    assert not a.failed
    assert a.kernel_id == "sobolev-modified"
    emit_report(a, tmp_path / "a.csv", tmp_path / "a.json")
    text = (tmp_path / "a.csv").read_text()
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert len(text.splitlines()) == 1 + len(cfg.d) * len(cfg.eps)
    back = RunRecord.from_dict(json.loads((tmp_path / "a.json").read_text()))
    assert back.to_csv().encode() == (tmp_path / "a.csv").read_bytes()


def test_cardinality_monotone_in_eps():
    rec = run_scaling_sweep(_cfg(d=(2, 4, 8), eps=(0.5, 0.25, 0.1), oracle_ceiling=0))
    for d in (2, 4, 8):
        bounds = [r["card_bound"] for r in rec.rows if r["d"] == d]
        assert bounds == sorted(bounds)
    assert rec.envelope is not None and np.isfinite(rec.envelope["t_qpt"])


def test_failed_record_still_written(tmp_path):
    # a tiny claimed rate constant starves the algorithm of points
    rec = run_scaling_sweep(_cfg(d=(2,), eps=(0.1,), rate={"alpha": 1e-9, "r": 3.0}))
    assert rec.failed and rec.failures
    emit_report(rec, tmp_path / "f.csv", tmp_path / "f.json")
    assert json.loads((tmp_path / "f.json").read_text())["status"] == "FAILED"
    assert (tmp_path / "f.csv").exists()


def test_unwritable_path():
    rec = run_scaling_sweep(_cfg(d=(1,), eps=(0.5,)))
    with pytest.raises(OSError):
        emit_report(rec, "/nonexistent-dir/x.csv")


def test_worker_pool(monkeypatch):
    serial = run_scaling_sweep(_cfg())
    monkeypatch.setenv("TENSORQPT_WORKERS", "3")
    assert run_scaling_sweep(_cfg()).to_csv() == serial.to_csv()
    monkeypatch.setenv("TENSORQPT_WORKERS", "many")
    with pytest.raises(ConfigError):
        run_scaling_sweep(_cfg())
