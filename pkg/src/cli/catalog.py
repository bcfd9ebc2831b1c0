"""
Catalog of the named built-in experiments.

Each entry carries the config it runs (mirrored under configs/), the headline
number its summary reports and the band that headline is accepted in.
"""

import copy
from dataclasses import dataclass
from typing import Any

from src.errors import ConfigurationError

SUPERLINEAR_DTS = ["2^-9", "2^-10", "2^-11", "2^-12"]


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    kind: str
    headline: str
    expected: float | None
    band: tuple[float, float | None]
    config: dict[str, Any]

    def within_band(self, value: float | None) -> bool:
        if value is None:
            return False
        lo, hi = self.band
        return bool(value >= lo and (hi is None or value <= hi))

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind,
            "headline": self.headline,
            "expected": self.expected,
            "band": list(self.band),
        }


def _convergence(name: str, expected: float, band: tuple[float, float]) -> CatalogEntry:
    config = {
        "name": name,
        "kind": "convergence",
        "problem": name,
        "seed": 2024,
        "n_paths": 1000,
        "dt_list": list(SUPERLINEAR_DTS),
        "reference_dt": "2^-15",
        "error_mode": "terminal",
    }
    return CatalogEntry(name, "convergence", "fitted rmse order", expected, band, config)


_ENTRIES = (
    _convergence("paper-5.1a", 0.2, (0.12, 0.30)),
    _convergence("paper-5.1b", 0.2, (0.12, 0.30)),
    _convergence("paper-5.1c", 0.5, (0.40, 0.60)),
    _convergence("paper-5.2", round(1 / 1.3, 4), (0.65, 0.90)),
    CatalogEntry(
        "paper-5.3",
        "invariant_measure",
        "KS p-value at the final checkpoint",
        None,
        (0.01, 1.0),
        {
            "name": "paper-5.3",
            "kind": "invariant_measure",
            "problem": "paper-5.3",
            "seed": 2024,
            "n_paths": 10000,
            "dt": 0.01,
            "checkpoints": [0.1, 0.3, 0.7, 2.0, 5.0],
            "reference": {"kind": "analytic_stable", "alpha": 1.5, "theta": 2.0, "noise_scale": 2.0},
            "k": 1.0,
        },
    ),
    CatalogEntry(
        "paper-5.4",
        "invariant_measure",
        "W1(t=0.2) / W1(t=1) against the t=10 snapshot",
        None,
        (5.0, None),
        {
            "name": "paper-5.4",
            "kind": "invariant_measure",
            "problem": "paper-5.4",
            "seed": 2024,
            "n_paths": 10000,
            "dt": 0.01,
            "checkpoints": [0.04, 0.1, 0.2, 1.0, 2.0, 10.0],
            "reference": {"kind": "empirical_snapshot", "time": 10.0},
            "k": 1.0,
            "moments": {"n_steps": 1000},
            "coupling": {"x0_a": 10.0, "x0_b": -10.0, "horizon": 10.0},
        },
    ),
)

CATALOG: dict[str, CatalogEntry] = {e.name: e for e in _ENTRIES}


def list_builtin() -> list[CatalogEntry]:
    return list(_ENTRIES)


def catalog_entry(name: str) -> CatalogEntry:
    try:
        return CATALOG[name]
    except KeyError:
        raise ConfigurationError(f"unknown built-in experiment {name!r}; known: {', '.join(CATALOG)}") from None


def builtin_config(name: str) -> dict[str, Any]:
    return copy.deepcopy(catalog_entry(name).config)
