"""Experiment configuration: strict key-value ingestion and validation.

Configs are INI-style section files. Every key has a typed default; unknown
sections or keys are rejected by name so typos never silently fall back to
defaults. A resolved config can be re-emitted as the JSON manifest written
next to results, and that manifest can itself be ingested to reproduce a
run bit for bit.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .mac import FairnessParams, MacParams
from .phy import PhyParams
from .scenario import ScenarioTemplate
from .topology import Intensities, RadioParams


class ConfigError(ValueError):
    pass


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.split(",") if x.strip())


def _parse_strs(s: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in s.split(",") if x.strip())


# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "topology": {
        "area_width_m": (float, 200.0),
        "area_height_m": (float, 200.0),
        "eta_n": (float, 0.5),
        "eta_m": (float, 0.2),
        "n_ref": (float, 200.0),
    },
    "radio": {
        "tx_power_dbm": (float, 12.0),
        "noise_floor_dbm_per_hz": (float, -173.0),
        "bandwidth_hz": (float, 20e6),
        "pathloss_exponent": (float, 3.4),
        "reference_distance_m": (float, 1.0),
        "reference_loss_db": (float, 40.05),
        "cca_threshold_dbm": (float, -70.0),
        "receiver_sensitivity_dbm": (float, -75.0),
        "csr_m": (float, 80.0),
        "csr_mode": (str, "fixed"),
    },
    "phy": {
        "num_tx": (int, 4),
        "num_rx": (int, 8),
    },
    "mac": {
        "payload_bytes": (int, 1500),
        "header_bytes": (int, 22),
        "sifs_us": (float, 10.0),
        "slot_us": (float, 20.0),
        "ack_us": (float, 64.0),
        "cw_min": (int, 32),
        "cw_max": (int, 1024),
        "mcs_order": (int, 2),
        "rts_cts_overhead_us": (float, 0.0),
    },
    "fairness": {
        "delta": (float, 0.5),
    },
    "association": {
        "gamma_db": (float, 0.0),
        "weight_iterations": (int, 1),
    },
    "simulation": {
        "schemes": (_parse_strs, ("gaa", "ssf", "greedy", "smartassoc", "bpf")),
        "n_slots": (int, 1000),
        "n_realizations": (int, 200),
        "base_seed": (int, 1),
        "arrival_rate_per_slot": (float, 1.0),
        "backoff_mode": (str, "fixed"),
        "workers": (int, 1),
    },
    "sweep": {
        "densities": (_parse_floats, (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)),
    },
    "dynamic": {
        "initial_stas": (int, 20),
        "final_stas": (int, 100),
        "n_aps": (int, 20),
        "epochs": (int, 16),
        "epoch_slots": (int, 100),
        "mobile_fraction": (float, 0.3),
        "speed_min_mps": (float, 0.5),
        "speed_max_mps": (float, 2.0),
        "n_realizations": (int, 20),
    },
    "output": {
        "dir": (str, "out"),
    },
}

_VALID_SCHEMES = ("gaa", "ssf", "greedy", "smartassoc", "bpf")


@dataclass
class ResolvedConfig:
    """Typed, fully defaulted configuration plus which keys were defaulted."""

    values: dict[str, dict[str, object]]
    defaulted: list[str] = field(default_factory=list)
    source: str = ""

    def __getitem__(self, section: str) -> dict[str, object]:
        return self.values[section]

    def get(self, dotted: str):
        section, key = dotted.split(".", 1)
        return self.values[section][key]

    # -- factories for the runtime objects ---------------------------------

    def radio(self) -> RadioParams:
        r = self.values["radio"]
        csr = float(r["csr_m"])
        if r["csr_mode"] == "derived":
            # Distance at which RSS falls to the CCA threshold.
            tx = float(self.values["radio"]["tx_power_dbm"])
            exp = float(r["pathloss_exponent"])
            csr = float(r["reference_distance_m"]) * 10.0 ** (
                (tx - float(r["reference_loss_db"]) - float(r["cca_threshold_dbm"]))
                / (10.0 * exp)
            )
        elif r["csr_mode"] != "fixed":
            raise ConfigError("radio.csr_mode must be 'fixed' or 'derived'")
        return RadioParams(
            tx_power_dbm=float(r["tx_power_dbm"]),
            noise_floor_dbm_per_hz=float(r["noise_floor_dbm_per_hz"]),
            bandwidth_hz=float(r["bandwidth_hz"]),
            pathloss_exponent=float(r["pathloss_exponent"]),
            reference_distance_m=float(r["reference_distance_m"]),
            reference_loss_db=float(r["reference_loss_db"]),
            cca_threshold_dbm=float(r["cca_threshold_dbm"]),
            receiver_sensitivity_dbm=float(r["receiver_sensitivity_dbm"]),
            csr_m=csr,
        )

    def mac(self) -> MacParams:
        m = self.values["mac"]
        return MacParams(
            payload_bits=int(m["payload_bytes"]) * 8,
            header_bits=int(m["header_bytes"]) * 8,
            sifs_s=float(m["sifs_us"]) * 1e-6,
            slot_time_s=float(m["slot_us"]) * 1e-6,
            ack_s=float(m["ack_us"]) * 1e-6,
            cw_min=int(m["cw_min"]),
            cw_max=int(m["cw_max"]),
            mcs_order=int(m["mcs_order"]),
            rts_cts_overhead_s=float(m["rts_cts_overhead_us"]) * 1e-6,
        )

    def template(self, eta_n: float | None = None) -> ScenarioTemplate:
        t = self.values["topology"]
        radio = self.radio()
        phy = PhyParams.from_radio(
            radio, int(self.values["phy"]["num_tx"]), int(self.values["phy"]["num_rx"])
        )
        return ScenarioTemplate(
            intensities=Intensities(
                eta_n=float(t["eta_n"]) if eta_n is None else float(eta_n),
                eta_m=float(t["eta_m"]),
                n_ref=float(t["n_ref"]),
            ),
            area=(float(t["area_width_m"]), float(t["area_height_m"])),
            radio=radio,
            phy=phy,
            mac=self.mac(),
            fairness=FairnessParams(delta=float(self.values["fairness"]["delta"])),
            gamma=10.0 ** (float(self.values["association"]["gamma_db"]) / 10.0),
            weight_iterations=int(self.values["association"]["weight_iterations"]),
        )

    def to_manifest_dict(self) -> dict:
        out = {}
        for section, keys in self.values.items():
            out[section] = {
                k: (list(v) if isinstance(v, tuple) else v) for k, v in keys.items()
            }
        return out


def _validate(cfg: ResolvedConfig) -> None:
    def fail(dotted: str, why: str):
        raise ConfigError(f"{dotted}: {why}")

    v = cfg.values
    if v["fairness"]["delta"] < 0:
        fail("fairness.delta", "must be >= 0")
    if v["phy"]["num_tx"] < 1:
        fail("phy.num_tx", "must be >= 1")
    if v["phy"]["num_tx"] > v["phy"]["num_rx"]:
        fail("phy.num_tx", "must not exceed phy.num_rx (receive-side inversion)")
    if v["association"]["gamma_db"] is None or not math.isfinite(v["association"]["gamma_db"]):
        fail("association.gamma_db", "must be finite")
    if v["association"]["weight_iterations"] < 1:
        fail("association.weight_iterations", "must be >= 1")
    if v["mac"]["cw_min"] < 1:
        fail("mac.cw_min", "must be >= 1")
    if v["mac"]["cw_min"] > v["mac"]["cw_max"]:
        fail("mac.cw_min", "must not exceed mac.cw_max")
    if v["mac"]["mcs_order"] < 2 or v["mac"]["mcs_order"] & (v["mac"]["mcs_order"] - 1):
        fail("mac.mcs_order", "must be a power of two >= 2")
    for key in ("eta_n", "eta_m", "n_ref"):
        if v["topology"][key] < 0:
            fail(f"topology.{key}", "must be >= 0")
    if v["simulation"]["backoff_mode"] not in ("fixed", "dcf"):
        fail("simulation.backoff_mode", "must be 'fixed' or 'dcf'")
    for s in v["simulation"]["schemes"]:
        if s not in _VALID_SCHEMES:
            fail("simulation.schemes", f"unknown scheme {s!r}")
    for key in ("n_slots", "n_realizations", "workers"):
        if v["simulation"][key] < 1:
            fail(f"simulation.{key}", "must be >= 1")
    if v["simulation"]["arrival_rate_per_slot"] < 0:
        fail("simulation.arrival_rate_per_slot", "must be >= 0")
    d = v["dynamic"]
    if d["initial_stas"] < 1 or d["final_stas"] < d["initial_stas"]:
        fail("dynamic.final_stas", "must be >= dynamic.initial_stas >= 1")
    if not (0.0 <= d["mobile_fraction"] <= 1.0):
        fail("dynamic.mobile_fraction", "must be in [0, 1]")
    if d["speed_min_mps"] <= 0 or d["speed_max_mps"] < d["speed_min_mps"]:
        fail("dynamic.speed_min_mps", "need 0 < speed_min_mps <= speed_max_mps")
    for dens in v["sweep"]["densities"]:
        if dens < 0:
            fail("sweep.densities", "densities must be >= 0")


def _resolve(raw: dict[str, dict[str, str]], source: str) -> ResolvedConfig:
    values: dict[str, dict[str, object]] = {}
    defaulted: list[str] = []
    for section, keys in raw.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in keys:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")
    for section, schema_keys in SCHEMA.items():
        values[section] = {}
        for key, (parser, default) in schema_keys.items():
            if section in raw and key in raw[section]:
                raw_val = raw[section][key]
                try:
                    if isinstance(raw_val, str):
                        values[section][key] = parser(raw_val)
                    elif parser in (_parse_floats,):
                        values[section][key] = tuple(float(x) for x in raw_val)
                    elif parser in (_parse_strs,):
                        values[section][key] = tuple(str(x) for x in raw_val)
                    else:
                        values[section][key] = parser(raw_val)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{section}.{key}: {exc}") from exc
            else:
                values[section][key] = default
                defaulted.append(f"{section}.{key}")
    cfg = ResolvedConfig(values=values, defaulted=defaulted, source=source)
    _validate(cfg)
    return cfg


def load_config(path) -> ResolvedConfig:
    """Ingest an INI config or a previously written JSON manifest."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    text = p.read_text()
    if p.suffix == ".json" or text.lstrip().startswith("{"):
        data = json.loads(text)
        raw = data.get("config", data)
        return _resolve(raw, source=str(p))
    parser = configparser.ConfigParser()
    parser.read_string(text)
    raw = {s: dict(parser.items(s)) for s in parser.sections()}
    return _resolve(raw, source=str(p))


def validate_config(path) -> str:
    """Dry-run validation; returns a report of resolved values.

    Keys that fell back to defaults are marked so a reviewer can see at a
    glance what the file pinned.
    """
    cfg = load_config(path)
    lines = [f"config OK: {cfg.source}"]
    for section, keys in cfg.values.items():
        lines.append(f"[{section}]")
        for key, value in keys.items():
            mark = "  (default)" if f"{section}.{key}" in cfg.defaulted else ""
            if isinstance(value, tuple):
                value = ",".join(str(x) for x in value)
            lines.append(f"  {key} = {value}{mark}")
    return "\n".join(lines)
