"""
Test Plan
- Partitions: distribution entries (kind, moment pair, bare number), disciplines,
  [system] and [imbalance] blocks, includes with deep merge, command-line overrides
- Boundaries: defaults when blocks are omitted; explicit cycles switch off long-run
  shortening; POLLINGLAB_WORKERS fallback
- Failure modes: unknown keys, bad kind, both system sources, include cycle, missing file,
  invalid TOML, unstable system
"""

from pathlib import Path

import pytest

from pollinglab import distributions as dist
from pollinglab.config_loader import (
    apply_overrides,
    build_config,
    deep_merge,
    load_config,
    parse_discipline,
)
from pollinglab.errors import ConfigError, StabilityError
from pollinglab.model import Exhaustive, Gated, KLimited, VisitOrder

SYSTEM_TOML = """
[experiment]
kind = "custom"

[simulation]
master_seed = 7
replications = 4
cycles_per_replication = 300
warmup_cycles = 30

[system]
visit_order = "cyclic"

[[system.queues]]
interarrival = { kind = "exponential", rate = 0.3 }
service = { mean = 1.0, scv = 1.0 }
discipline = "gated"
switchover = 1.0

[[system.queues]]
interarrival = { kind = "exponential", rate = 0.2 }
service = { kind = "exponential", rate = 1.0 }
discipline = "1-limited"
switchover = { kind = "deterministic", value = 1.0 }
"""


def _write(directory: Path, name: str, text: str) -> Path:
    path = directory / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_system_config(tmp_path: Path) -> None:
    """Validation: every entry form converts to the domain types."""
    cfg = load_config(_write(tmp_path, "g1l.toml", SYSTEM_TOML))
    assert cfg.kind == "custom"
    assert cfg.simulation.master_seed == 7
    assert cfg.simulation.cycles_per_replication == 300
    assert cfg.scale_long_runs is False
    spec = cfg.system
    assert spec is not None
    assert spec.visit_order is VisitOrder.CYCLIC
    assert spec.queues[0].discipline == Gated()
    assert spec.queues[0].service == dist.Exponential(1.0)
    assert spec.queues[1].discipline == KLimited(1)
    assert spec.switchovers == (dist.Deterministic(1.0), dist.Deterministic(1.0))


def test_defaults_without_optional_blocks(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    """Boundary: only [experiment] given; workers come from the environment."""
    monkeypatch.setenv("POLLINGLAB_WORKERS", "3")
    cfg = load_config(_write(tmp_path, "t1.toml", '[experiment]\nkind = "table1"\n'))
    assert cfg.system is None
    assert cfg.simulation.workers == 3
    assert cfg.scale_long_runs is True
    assert cfg.output_format == "csv"


def test_imbalance_block(tmp_path: Path) -> None:
    """Validation: [imbalance] builds the asymmetric system."""
    text = """
[experiment]
kind = "custom"

[imbalance]
n = 3
rho = 0.75
imbalance_arrival = 3.0
scv_arrival = 0.5
switchover = 1.0
"""
    cfg = load_config(_write(tmp_path, "imb.toml", text))
    assert cfg.system is not None
    assert cfg.system.arrival_rates == pytest.approx((1.5, 1.0, 0.5))
    assert all(q.discipline == Exhaustive() for q in cfg.system.queues)


def test_include_is_merged_and_overridden(tmp_path: Path) -> None:
    """Validation: included values are defaults; the including file wins."""
    _write(tmp_path, "base.toml", '[simulation]\nreplications = 5\nmaster_seed = 1\n\n[experiment]\nkind = "table1"\n')
    main = _write(
        tmp_path,
        "main.toml",
        'include = ["base.toml"]\n\n[simulation]\nmaster_seed = 9\n\n[experiment]\nkind = "table3"\nformat = "pretty"\n',
    )
    cfg = load_config(main)
    assert cfg.kind == "table3"
    assert cfg.simulation.replications == 5
    assert cfg.simulation.master_seed == 9
    assert cfg.output_format == "pretty"


def test_include_cycle_raises(tmp_path: Path) -> None:
    """Failure mode: a.toml includes b.toml which includes a.toml."""
    _write(tmp_path, "a.toml", 'include = ["b.toml"]\n')
    _write(tmp_path, "b.toml", 'include = ["a.toml"]\n')
    with pytest.raises(ConfigError, match="include cycle"):
        load_config(tmp_path / "a.toml")


def test_missing_file_and_bad_toml(tmp_path: Path) -> None:
    """Failure mode: absent file, malformed TOML."""
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.toml")
    with pytest.raises(ConfigError, match="invalid TOML"):
        load_config(_write(tmp_path, "bad.toml", "[experiment\nkind = 1"))


@pytest.mark.parametrize(
    "document",
    [
        {"experiment": {"kind": "table9"}},
        {"experiment": {"kind": "table1", "colour": "red"}},
        {"experiment": {"kind": "table1", "multipliers": [0.0, 10.0]}},
        {"experiment": {"kind": "custom"}},
        {
            "experiment": {"kind": "custom"},
            "system": {"queues": [{"service": {"kind": "weibull"}}]},
        },
        {
            "experiment": {"kind": "custom"},
            "system": {"queues": [{"service": {"mean": 1.0}}]},
        },
        {
            "experiment": {"kind": "custom"},
            "system": {"queues": [{"service": 1.0}]},
            "imbalance": {"n": 2, "rho": 0.5},
        },
    ],
)
def test_invalid_documents_raise_config_error(document: dict) -> None:
    """Failure mode: schema and semantic errors surface as ConfigError."""
    with pytest.raises(ConfigError):
        build_config(document)


def test_unstable_system_raises_stability_error() -> None:
    """Failure mode: rho >= 1 keeps its own error type."""
    document = {
        "experiment": {"kind": "custom"},
        "system": {
            "queues": [
                {"interarrival": {"kind": "exponential", "rate": 2.0}, "service": {"kind": "exponential", "rate": 1.0}}
            ]
        },
    }
    with pytest.raises(StabilityError):
        build_config(document)


def test_parse_discipline() -> None:
    """Validation: names and '<k>-limited' forms; unknown names raise."""
    assert parse_discipline("Exhaustive") == Exhaustive()
    assert parse_discipline("gated") == Gated()
    assert parse_discipline("k-limited", 3) == KLimited(3)
    assert parse_discipline("2-limited") == KLimited(2)
    with pytest.raises(ValueError, match="unknown discipline"):
        parse_discipline("random")


def test_deep_merge() -> None:
    """Validation: nested dicts merge, other values are replaced."""
    merged = deep_merge({"a": {"x": 1, "y": 2}, "b": [1]}, {"a": {"y": 3}, "b": [2]})
    assert merged == {"a": {"x": 1, "y": 3}, "b": [2]}


def test_apply_overrides(tmp_path: Path) -> None:
    """Validation: overrides replace values; explicit cycles disable shortening."""
    cfg = load_config(_write(tmp_path, "t1.toml", '[experiment]\nkind = "table1"\n'))
    changed = apply_overrides(cfg, seed=5, replications=3, cycles=200, workers=1, output="out.csv", output_format="pretty")
    assert changed.simulation.master_seed == 5
    assert changed.simulation.replications == 3
    assert changed.simulation.cycles_per_replication == 200
    assert changed.simulation.warmup_cycles == 20
    assert changed.scale_long_runs is False
    assert changed.output == "out.csv"
    assert changed.output_format == "pretty"
    assert apply_overrides(cfg) is cfg
    with pytest.raises(ConfigError):
        apply_overrides(cfg, replications=0)


CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"


@pytest.mark.parametrize(
    ("name", "kind"),
    [
        ("table1.toml", "table1"),
        ("table2.toml", "table2"),
        ("table3.toml", "table3"),
        ("limit_sweep.toml", "limit-sweep"),
        ("pcl_g1l.toml", "pcl-check"),
        ("g1l_residual.toml", "g1l-residual"),
        ("e1l.toml", "e1l-eval"),
        ("custom_renewal.toml", "custom"),
    ],
)
def test_shipped_configs_load(name: str, kind: str) -> None:
    """Validation: every example experiment file validates."""
    assert load_config(CONFIG_DIR / name).kind == kind
