"""Experiment config files: a sectioned key=value grammar, strictly checked.

One file fully determines a run.  Sections are ``dataset``, ``topology``,
``policy``, ``attack``, ``ledger`` and ``output``; unknown sections or keys
are rejected so committed reproduction configs cannot drift silently.
"""

import configparser
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .data import IID, NON_IID, DatasetSpec
from .errors import ConfigError
from .ledger import GasSchedule
from .sim import ATTACKS, POLICIES, AttackSpec, SimulationConfig

_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}

_KNOWN_KEYS = {
    "dataset": {
        "name",
        "path",
        "features",
        "classes",
        "instances",
        "label_column",
        "header",
        "normalize",
    },
    "topology": {
        "nodes",
        "sensors_per_node",
        "batch_size",
        "epochs",
        "agg_threshold",
        "agg_parties",
        "agg_redundancy",
        "quant_scale_bits",
    },
    "policy": {
        "mode",
        "trust_ratio",
        "val_ratio",
        "partition",
        "dirichlet_alpha",
        "seed",
        "alpha_winner",
        "alpha_runner",
    },
    "attack": {"kind", "malicious_fraction"},
    "ledger": {
        "gas_price_gwei",
        "gas_security",
        "gas_oracle",
        "gas_io",
        "deployment_gas",
        "payload_bytes",
    },
    "output": {"dir"},
}


class _Section:
    def __init__(self, name: str, values: dict[str, str]):
        self.name = name
        self.values = values

    def _get(self, key, conv, default):
        raw = self.values.get(key)
        if raw is None:
            return default
        try:
            return conv(raw)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(str(exc), field=f"{self.name}.{key}") from None

    def str(self, key, default=None):
        return self._get(key, str, default)

    def int(self, key, default=None):
        return self._get(key, int, default)

    def float(self, key, default=None):
        return self._get(key, float, default)

    def bool(self, key, default=None):
        def conv(raw):
            if raw.lower() not in _BOOL:
                raise ValueError(f"expected a boolean, got {raw!r}")
            return _BOOL[raw.lower()]

        return self._get(key, conv, default)

    def fraction(self, key, default=None):
        return self._get(key, Fraction, default)


def _read_sections(path: Path) -> dict[str, _Section]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with path.open() as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}", field=str(path)) from None
    out = {}
    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigError("unknown section", field=section)
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError("unknown key", field=f"{section}.{key}")
        out[section] = _Section(section, dict(parser[section]))
    for name in _KNOWN_KEYS:
        out.setdefault(name, _Section(name, {}))
    return out


def _schedule_from(ledger: _Section) -> GasSchedule:
    defaults = GasSchedule()
    return GasSchedule(
        security=ledger.int("gas_security", defaults.security),
        oracle=ledger.int("gas_oracle", defaults.oracle),
        io=ledger.int("gas_io", defaults.io),
        deployment_gas=ledger.fraction("deployment_gas", defaults.deployment_gas),
        gas_price_gwei=ledger.fraction("gas_price_gwei", defaults.gas_price_gwei),
    )


def load_gas_schedule(path: Path) -> GasSchedule:
    return _schedule_from(_read_sections(Path(path))["ledger"])


def load_experiment(
    path: Path, seed_override: Optional[int] = None, out_override: Optional[str] = None
) -> tuple[SimulationConfig, Path]:
    """Parse and validate a full run config; returns it with the output dir."""
    path = Path(path)
    sections = _read_sections(path)

    ds = sections["dataset"]
    raw_path = ds.str("path", "")
    dataset = DatasetSpec(
        name=ds.str("name", path.stem),
        # dataset paths resolve relative to the config file
        path=str((path.parent / raw_path).resolve()) if raw_path else "",
        features=ds.int("features", 0),
        classes=ds.int("classes", 0),
        instances=ds.int("instances", 0),
        label_column=ds.int("label_column", -1),
        header=ds.bool("header", True),
        normalize=ds.bool("normalize", True),
    )

    topo = sections["topology"]
    pol = sections["policy"]
    atk = sections["attack"]

    mode = pol.str("mode", "federated_limited")
    if mode not in POLICIES:
        raise ConfigError(f"unknown policy {mode!r}", field="policy.mode")
    kind = atk.str("kind", "none")
    if kind not in ATTACKS:
        raise ConfigError(f"unknown attack {kind!r}", field="attack.kind")
    part = pol.str("partition", "non_iid")
    if part not in (IID, NON_IID):
        raise ConfigError(f"unknown partition {part!r}", field="policy.partition")

    config = SimulationConfig(
        dataset=dataset,
        nodes=topo.int("nodes", 4),
        sensors_per_node=topo.int("sensors_per_node", 1),
        batch_size=topo.int("batch_size", 8),
        epochs=topo.int("epochs", 10),
        policy=mode,
        trust_ratio=pol.float("trust_ratio", 0.95),
        payload_bytes=sections["ledger"].int("payload_bytes", 2104),
        seed=seed_override if seed_override is not None else pol.int("seed", 1),
        attack=AttackSpec(kind=kind, malicious_fraction=atk.float("malicious_fraction", 0.0)),
        val_ratio=pol.float("val_ratio", 0.10),
        partition_mode=part,
        dirichlet_alpha=pol.float("dirichlet_alpha", 0.5),
        alpha_winner=pol.float("alpha_winner", 0.9),
        alpha_runner=pol.float("alpha_runner", 0.1),
        agg_threshold=topo.int("agg_threshold", 2),
        agg_parties=topo.int("agg_parties", 3),
        agg_redundancy=topo.int("agg_redundancy", 1),
        quant_scale_bits=topo.int("quant_scale_bits", 20),
        schedule=_schedule_from(sections["ledger"]),
    )
    config.validate()

    out_dir = Path(out_override) if out_override else Path(sections["output"].str("dir", "out"))
    if not out_dir.is_absolute() and not out_override:
        out_dir = path.parent / out_dir
    return config, out_dir
