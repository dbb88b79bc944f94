"""Tolerance table used by the engines and echoed into every CLI report."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

MIN_TOLERANCE = 1e-14


@dataclass(frozen=True)
class Tolerances:
    span: float = 1e-10  # linear independence / span membership
    coordinates: float = 1e-9  # coordinates() residual, relative to 1 + ||m||
    multiplicative: float = 1e-8
    contractive: float = 1e-6  # worst cb ratio allowed above 1
    singular: float = 1e-12  # relative sigma_min threshold
    chain: float = 1e-9  # monotone chain violations
    kappa_slack: float = 1e-3  # kappa(X) <= target_cb + slack
    merge: float = 1e-8  # spectrum clustering
    quasinilpotent: float = 1e-10
    gram_condition: float = 1e12
    bound: float = 1e-9  # almost-isometry bound-factor slack

    def with_overrides(self, overrides: dict[str, float] | None) -> "Tolerances":
        if not overrides:
            return self
        known = {f.name for f in fields(self)}
        clean = {}
        for name, value in overrides.items():
            if name not in known:
                raise KeyError(f"unknown tolerance {name!r}; known: {sorted(known)}")
            value = float(value)
            if not value >= MIN_TOLERANCE:
                raise ValueError(f"tolerance {name}={value!r} is below {MIN_TOLERANCE:g}")
            clean[name] = value
        return replace(self, **clean)

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


DEFAULT = Tolerances()
