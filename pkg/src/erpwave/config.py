"""Detector configuration and its JSON mapping."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Tuple

from .wavelets import SUPPORTED_WAVELETS


class ConfigError(ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


Window = Tuple[float, float]
THRESHOLD_MODES = ("positive", "symmetric")


def _number(name, value, kind):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    if value != value or value in (float("inf"), float("-inf")):
        raise ConfigError(name, "must be finite")
    if kind is int:
        if int(value) != value:
            raise ConfigError(name, f"expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _coerce(name, annotation, value):
    if annotation == "Window":
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise ConfigError(name, "expected a [low, high] pair")
        kind = int if name == "scale_band" else float
        return (_number(name, value[0], kind), _number(name, value[1], kind))
    if annotation == "int":
        return _number(name, value, int)
    if annotation == "float":
        return _number(name, value, float)
    if not isinstance(value, str):
        raise ConfigError(name, f"expected a string, got {value!r}")
    return value.lower()


@dataclass(frozen=True)
class DetectorConfig:
    """Every tunable of the detection pipeline. Times in ms, frequencies in Hz.

    ``c_tau`` is in CWT coefficient units (µV·samples^0.5 with unit-energy
    kernels). It and ``analysis_scale`` (0 means unset) normally come from
    :func:`erpwave.scale_select.calibrate_threshold`.
    """

    wavelet: str = "sym5"
    scale_band: Window = (40, 90)
    c_tau: float = 0.0
    threshold_mode: str = "positive"
    analysis_scale: float = 0.0
    period_window_ms: Window = (60.0, 88.0)
    gaussian_center_ms: float = 70.0
    gaussian_sigma_ms: float = 9.0
    padding_ms: float = 10.0
    search_window_ms: Window = (0.0, 400.0)
    p1_n1_bounds_ms: Window = (20.0, 90.0)
    n1_p2_bounds_ms: Window = (20.0, 90.0)
    total_bounds_ms: Window = (60.0, 160.0)
    cone_window_ms: float = 50.0
    cone_fraction: float = 0.8
    lowpass_cutoff_hz: float = 65.0
    lowpass_attenuation_db: float = 25.0
    peak_lowpass_hz: float = 20.0
    persistence: int = 3
    frame_margin_ms: float = 40.0
    max_retries: int = 1
    retry_persistence: int = 2
    retry_frame_extra_ms: float = 20.0
    calibration_window_ms: Window = (100.0, 250.0)
    cascade_iterations: int = 10

    def __post_init__(self):
        for f in dataclasses.fields(self):
            object.__setattr__(self, f.name, _coerce(f.name, f.type, getattr(self, f.name)))
        self.validate()

    def validate(self):
        if str(self.wavelet).lower() not in SUPPORTED_WAVELETS:
            raise ConfigError("wavelet", f"unsupported wavelet {self.wavelet!r}")
        for name in ("scale_band", "period_window_ms", "search_window_ms", "p1_n1_bounds_ms",
                     "n1_p2_bounds_ms", "total_bounds_ms", "calibration_window_ms"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ConfigError(name, f"window must satisfy low < high, got [{lo}, {hi}]")
        if self.scale_band[0] <= 0:
            raise ConfigError("scale_band", "scales must be positive")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ConfigError("threshold_mode", f"expected one of {', '.join(THRESHOLD_MODES)}")
        if self.analysis_scale and not (
                self.scale_band[0] <= self.analysis_scale <= self.scale_band[1]):
            raise ConfigError("analysis_scale", "must be 0 (unset) or lie inside scale_band")
        if self.c_tau < 0:
            raise ConfigError("c_tau", "must be non-negative")
        if self.gaussian_sigma_ms <= 0:
            raise ConfigError("gaussian_sigma_ms", "must be positive")
        if self.padding_ms < 0:
            raise ConfigError("padding_ms", "must be non-negative")
        if self.cone_window_ms <= 0:
            raise ConfigError("cone_window_ms", "must be positive")
        if not 0 < self.cone_fraction <= 1:
            raise ConfigError("cone_fraction", "must lie in (0, 1]")
        if self.peak_lowpass_hz < 0:
            raise ConfigError("peak_lowpass_hz", "must be non-negative (0 disables smoothing)")
        if self.frame_margin_ms < 0:
            raise ConfigError("frame_margin_ms", "must be non-negative")
        if self.persistence < 1 or self.retry_persistence < 1:
            raise ConfigError("persistence", "must be at least 1")
        if self.max_retries < 0:
            raise ConfigError("max_retries", "must be non-negative")
        if not 4 <= self.cascade_iterations <= 14:
            raise ConfigError("cascade_iterations", "must lie in [4, 14]")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}

    @classmethod
    def from_dict(cls, data: dict, base: "DetectorConfig" = None) -> "DetectorConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
        merged = (base or cls()).to_dict()
        merged.update(data)
        try:
            return cls(**merged)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError("config", str(exc)) from exc

    @classmethod
    def from_json(cls, path, base: "DetectorConfig" = None) -> "DetectorConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError("config", f"invalid JSON in {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config", "top-level JSON value must be an object")
        return cls.from_dict(data, base)

    def replace(self, **changes) -> "DetectorConfig":
        return dataclasses.replace(self, **changes)
