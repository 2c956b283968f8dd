"""Reference correlation-function measurements, as ``{order: (g_m, sigma)}``.

``paper-above-threshold`` is a gain-switched laser driven above threshold
(close to Poissonian); ``paper-below-threshold`` is the same device below
threshold, where the light is quasi-thermal.
"""

from __future__ import annotations

from .errors import ValidationError
from .photon_model import Mixture, Poisson, SourceKind, Thermal

PRESETS: dict[str, dict[int, tuple[float, float]]] = {
    "paper-above-threshold": {2: (1.0041, 0.0039), 3: (1.0059, 0.0056), 4: (1.099, 0.049)},
    "paper-below-threshold": {2: (1.6985, 0.0138), 3: (4.21, 0.13), 4: (17.11, 2.84)},
}

# Thermal/Poisson weight reproducing the quasi-thermal g2 exactly:
# g2 = 2 w + (1 - w) at equal means.
QUASI_THERMAL_WEIGHT = PRESETS["paper-below-threshold"][2][0] - 1.0


def preset_values(name: str) -> dict[int, tuple[float, float]]:
    try:
        return dict(PRESETS[name])
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def representative_source(name: str, mu: float) -> SourceKind:
    """A concrete emitter consistent with a preset, used to synthesise channel data."""
    preset_values(name)
    if name == "paper-below-threshold":
        w = QUASI_THERMAL_WEIGHT
        return Mixture((Thermal(mu), Poisson(mu)), (w, 1.0 - w))
    return Poisson(mu)
