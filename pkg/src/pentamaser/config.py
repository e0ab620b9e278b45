"""YAML run configuration shared by every CLI subcommand.

A configuration is a preset (by default the bundled ``reference`` preset) with a
user file deep-merged on top. Unknown keys are rejected, and every block is
turned into its module object up front so a bad value fails before any
computation or file output.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from .constants import dbm_to_watt
from .dynamics import MaxwellBlochParams
from .errors import ValidationError
from .geometry import WedgeMount
from .metrics import GainMedium, ResonatorParams
from .pump import OpticalMedium, PumpPulse
from .spectra import SpectrumConfig
from .spin import SpinSystem

__all__ = ["RunConfig", "load_preset", "load_config", "deep_merge"]

PRESETS = ("reference",)


def load_preset(name: str = "reference") -> dict:
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("pentamaser").joinpath("presets", f"{name}.yaml").read_text(encoding="utf-8")
    return yaml.safe_load(text)


def deep_merge(base: Mapping, override: Mapping, path: str = "") -> dict:
    """Recursively overlay ``override`` on ``base``; keys must already exist in ``base``."""
    out = copy.deepcopy(dict(base))
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in out:
            raise ValidationError(f"unknown config key {where!r}")
        if isinstance(out[key], Mapping):
            if not isinstance(value, Mapping):
                raise ValidationError(f"config key {where!r} must be a mapping")
            out[key] = deep_merge(out[key], value, where + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _read_yaml(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"malformed config {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, Mapping):
        raise ValidationError(f"config {path} must be a mapping at top level")
    return data


def _number(block: Mapping, key: str, where: str) -> float:
    value = block[key]
    if isinstance(value, str):
        # YAML 1.1 reads exponents without a sign (1e20) as strings
        try:
            value = float(value)
        except ValueError:
            raise ValidationError(f"{where}.{key} must be a finite number, got {value!r}") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValidationError(f"{where}.{key} must be a finite number, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration; ``data`` holds the merged mapping."""

    data: dict

    @classmethod
    def from_mapping(cls, mapping: Mapping, preset: str = "reference") -> "RunConfig":
        cfg = cls(deep_merge(load_preset(preset), mapping))
        cfg.validate()
        return cfg

    def with_overrides(self, overrides: Mapping) -> "RunConfig":
        cfg = RunConfig(deep_merge(self.data, overrides))
        cfg.validate()
        return cfg

    def __getitem__(self, key: str) -> Any:
        return self.data[key]

    def _numbers(self, block: str, skip: tuple[str, ...] = ()) -> dict[str, float]:
        b = self.data[block]
        if not isinstance(b, Mapping):
            raise ValidationError(f"{block} must be a mapping")
        return {k: _number(b, k, block) for k in b if k not in skip}

    # ------------------------------------------------------------ builders

    def spin_system(self) -> SpinSystem:
        b = self.data["spin"]
        pops = b["zero_field_populations"]
        if not isinstance(pops, (list, tuple)) or len(pops) != 3:
            raise ValidationError("spin.zero_field_populations must list three numbers")
        nums = self._numbers("spin", skip=("zero_field_populations",))
        return SpinSystem(zero_field_populations=tuple(float(p) for p in pops), **nums)

    def mount(self) -> WedgeMount:
        b = self.data["geometry"]
        wedge = b["wedge_actual"]
        return WedgeMount(
            alpha=_number(b, "alpha", "geometry"),
            beta=_number(b, "beta", "geometry"),
            wedge_actual=None if wedge is None else _number(b, "wedge_actual", "geometry"),
            flip_b_axis=bool(b["flip_b_axis"]),
        )

    def spectrum_config(self) -> SpectrumConfig:
        b = dict(self.data["spectrum"])
        shape = b.pop("lineshape")
        nums = {k: _number(b, k, "spectrum") for k in b}
        nums["n_points"] = int(nums["n_points"])
        return SpectrumConfig(lineshape=str(shape), **nums)

    def resonator(self) -> ResonatorParams:
        b = self._numbers("resonator")
        return ResonatorParams(
            f_c=b["f_c"],
            Q0=b["Q0"],
            Qe=b["Qe"],
            coupling_k=b["coupling_k"],
            conversion_factor_lambda=b["conversion_factor"],
            V_mode=b["V_mode"],
        )

    def gain_medium(self) -> GainMedium:
        b = self._numbers("medium", skip=("cavity_linewidth", "spin_linewidth"))
        for key in ("cavity_linewidth", "spin_linewidth"):
            if not _number(self.data["medium"], key, "medium") > 0:
                raise ValidationError(f"medium.{key} must be positive")
        return GainMedium(**b)

    def pump_pulse(self) -> PumpPulse:
        b = self._numbers("pump")
        return PumpPulse(**{k: b[k] for k in ("fluence", "duration", "wavelength", "illuminated_area")})

    def optical_medium(self) -> OpticalMedium:
        b = self._numbers("pump")
        keys = ("absorption_coefficient", "isc_triplet_yield", "thickness", "active_fraction")
        return OpticalMedium(crystal_volume=self.gain_medium().V_crystal, **{k: b[k] for k in keys})

    def coupling_g(self) -> float:
        """Coupling in rad/s after applying ``dynamics.g_unit``."""
        b = self.data["dynamics"]
        g = _number(b, "g", "dynamics")
        unit = b["g_unit"]
        if unit == "angular":
            return g
        if unit == "hz":
            return 2 * math.pi * g
        raise ValidationError(f"dynamics.g_unit must be 'angular' or 'hz', got {unit!r}")

    def amplifier_params(self, **overrides: float) -> MaxwellBlochParams:
        d = {**self._numbers("dynamics", skip=("g_unit",)), **overrides}
        res = self.resonator()
        f_d = res.f_c + d["detuning_MHz"] * 1e-3
        return MaxwellBlochParams.from_device(
            f_c=res.f_c,
            QL=d["QL"],
            T2=d["T2"],
            g=d.get("g_rad", self.coupling_g()),
            gamma=d["gamma"],
            N0=d["N0"],
            p_in=dbm_to_watt(d["p_in_dbm"]),
            f_d=f_d,
            coupling_k=res.coupling_k,
        )

    def oscillator_params(self, **overrides: float) -> MaxwellBlochParams:
        d = {**self._numbers("dynamics", skip=("g_unit",)), **overrides}
        r = self._numbers("resonator")
        QL = overrides.get("QL", r["oscillator_QL"])
        return MaxwellBlochParams.from_device(
            f_c=r["oscillator_frequency"],
            QL=QL,
            T2=d["T2"],
            g=d.get("g_rad", self.coupling_g()),
            gamma=d["gamma"],
            N0=d["N0"],
            coupling_k=r["coupling_k"],
        )

    def validate(self) -> None:
        """Build every block once so invalid values fail before any computation."""
        for key in ("spin", "geometry", "spectrum", "resonator", "medium", "metrics", "pump", "dynamics", "fitting"):
            if not isinstance(self.data.get(key), Mapping):
                raise ValidationError(f"config block {key!r} missing or not a mapping")
        self.spin_system()
        self.mount()
        self.spectrum_config()
        self.resonator()
        self.gain_medium()
        self.pump_pulse()
        self.optical_medium()
        self.amplifier_params()
        self.oscillator_params()
        m = self._numbers("metrics")
        if m["T_bath"] < 0 or m["T_bath_cold"] < 0:
            raise ValidationError("bath temperatures must be non-negative")
        r = self._numbers("resonator")
        for key in ("QL_rise", "oscillator_QL", "oscillator_frequency"):
            if not r[key] > 0:
                raise ValidationError(f"resonator.{key} must be positive")
        d = self._numbers("dynamics", skip=("g_unit",))
        if not d["t_span"] > 0 or d["n_points"] < 2:
            raise ValidationError("dynamics.t_span must be positive and n_points at least 2")
        if not 0 < d["rtol"] <= 1e-6 or not d["atol"] > 0:
            raise ValidationError("dynamics.rtol must be in (0, 1e-6] and atol positive")
        f = self._numbers("fitting")
        if f["restarts"] < 1 or f["f_ratio"] <= 0 or f["snr"] <= 0:
            raise ValidationError("fitting.restarts >= 1, f_ratio > 0 and snr > 0 required")
        seed = self.data.get("seed")
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ValidationError("seed must be a non-negative integer")
        if not isinstance(self.data.get("output_dir"), str):
            raise ValidationError("output_dir must be a string")


def load_config(path: str | Path | None = None, preset: str = "reference") -> RunConfig:
    """Preset merged with the YAML file at ``path`` (if any), validated."""
    user = _read_yaml(path) if path is not None else {}
    return RunConfig.from_mapping(user, preset)
