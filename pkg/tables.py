from dotenv import load_dotenv
load_dotenv()

import json
import logging
import os
from dataclasses import dataclass, replace
from pathlib import Path

import yaml

from errors import MissingProfileError

log = logging.getLogger(__name__)

ROOT = Path(__file__).resolve().parent
DATA_DIR = os.getenv("DATA_DIR", str(ROOT / "data"))
DB_PATH = os.getenv("DB_PATH", "data/runs.db")
OUT_DIR = os.getenv("OUT_DIR", "out")


# ---------- config + helpers ----------

def load_config(path="config.yaml"):
    with open(path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f)


def config_value(cfg, section, key):
    node = cfg
    for part in section.split("."):
        node = (node or {}).get(part)
    if not isinstance(node, dict) or key not in node:
        raise KeyError(f"{key} not defined in config under {section}")
    return node[key]


def load_table(name, data_dir=None):
    path = Path(data_dir or DATA_DIR) / f"{name}.json"
    if not path.exists():
        raise MissingProfileError(f"table {name} not found in {path.parent}")
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if "version" not in data:
        raise MissingProfileError(f"{path} has no version field")
    return data


def rate_entry(rows: dict, p: float, what: str):
    for key, row in rows.items():
        if abs(float(key) - p) <= 1e-9 * p:
            return row
    raise MissingProfileError(f"{what} has no entry for p={p:g}")


# ---------- factories ----------

@dataclass(frozen=True)
class FactoryProfile:
    name: str
    code_name: str
    p: float
    approach: str
    d_factory: int
    adapter: int
    qubits: int
    p_factory: float
    tau_bar: int


def load_factories(data_dir=None) -> dict:
    data = load_table("factories", data_dir)
    return {row["name"]: FactoryProfile(**row) for row in data["factories"]}


def factory_for(code_name: str, p: float, data_dir=None) -> FactoryProfile:
    for fac in load_factories(data_dir).values():
        if fac.code_name == code_name and abs(fac.p - p) <= 1e-9 * p:
            return fac
    raise MissingProfileError(f"no factory listed for {code_name} at p={p:g}")


# ---------- instruction profiles ----------

@dataclass(frozen=True)
class InstructionProfile:
    code_name: str
    p: float
    durations: dict
    rates: dict
    assumed: frozenset = frozenset()
    factory: FactoryProfile = None

    def tau(self, kind: str) -> int:
        if kind == "T":
            if self.factory is None:
                raise MissingProfileError("T injection needs a factory profile")
            return self.factory.tau_bar + self.tau("C") + 1
        if kind not in self.durations:
            raise MissingProfileError(f"no duration for {kind} on {self.code_name}")
        return self.durations[kind]

    def rate(self, kind: str) -> float:
        if kind == "T":
            if "T" in self.rates:
                return self.rates["T"]
            if self.factory is None:
                raise MissingProfileError("T injection needs a factory profile")
            return self.factory.p_factory + self.rate("C")
        if kind not in self.rates:
            raise MissingProfileError(f"no error rate for {kind} on {self.code_name} at p={self.p:g}")
        return self.rates[kind]

    def with_factory(self, factory: FactoryProfile, waive_factory_error=False) -> "InstructionProfile":
        rates = dict(self.rates)
        rates.pop("T", None)
        prof = replace(self, factory=factory, rates=rates)
        if waive_factory_error:
            rates["T"] = prof.rate("C")
            prof = replace(prof, rates=rates)
        return prof

    def assumed_kinds(self) -> list:
        return sorted(self.assumed)


def load_profile(code_name: str, p: float, data_dir=None) -> InstructionProfile:
    data = load_table("logical_ops", data_dir)
    if code_name not in data["durations"]:
        raise MissingProfileError(f"no instruction profile for {code_name}")
    row = rate_entry(data["log10_rates"][code_name], p, f"logical_ops[{code_name}]")
    rates = {k: 10.0 ** v for k, v in row.items()}
    assumed = frozenset(data.get("assumed", {}).get(code_name, []))
    if assumed:
        log.warning("%s at p=%g: %s error rates are assumed, not measured", code_name, p, ", ".join(sorted(assumed)))
    return InstructionProfile(code_name, p, dict(data["durations"][code_name]), rates, assumed)


def profile_from_rates(code_name: str, p: float, rates: dict, data_dir=None) -> InstructionProfile:
    data = load_table("logical_ops", data_dir)
    return InstructionProfile(code_name, p, dict(data["durations"][code_name]), dict(rates))


# ---------- module sizes ----------

@dataclass(frozen=True)
class ModuleSizes:
    code: int
    lpu: int
    adapter: int


def module_sizes(code_name: str, data_dir=None) -> ModuleSizes:
    data = load_table("qubit_counts", data_dir)
    if code_name not in data["modules"]:
        raise MissingProfileError(f"no qubit counts for {code_name}")
    row = data["modules"][code_name]
    return ModuleSizes(row["c"], row["u"], row["a"])
