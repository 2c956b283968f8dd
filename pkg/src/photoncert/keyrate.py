"""Channel model, secret fraction and key-rate-versus-distance scans.

The channel is the usual decoy-state fibre model: per-photon transmittance
``eta = eta_det * 10**(-alpha L / 10)``, n-photon yield
``y_n = 1 - (1 - Y0)(1 - eta)**n`` and n-photon error gain
``b_n = e0 Y0 + e_d (1 - (1 - eta)**n)`` (capped at ``y_n``). The secret
fraction per pulse is

    R = p_u p_Z^2 [ p1 y1 (1 - h(e1)) - f Q_Z h(E_Z) - Delta ]

with lower bounds on ``p1``, ``y1`` and an upper bound on ``e1``. The same
error rate stands in for both bases because the channel produces one.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import IO, Mapping, Sequence

import numpy as np

from .decoy_bounds import (
    E1_CAP,
    GainInterval,
    IntensitySettings,
    ObservedGains,
    bound_error_rate_e1,
    decoy_intervals,
    exact_intervals,
    signal_intervals,
    solve_yield_bounds,
)
from .errors import DomainError, ValidationError
from .photon_model import Poisson, PhotonNumberDistribution, SourceKind
from .statistics_bounds import (
    DEFAULT_N_CUT,
    CorrelationConstraints,
    ProbabilityBounds,
    bound_photon_probabilities,
)

CSV_COLUMNS = ("distance_km", "Q_Z", "E_Z", "p1_lower", "y1_lower", "e1_upper", "R")


def binary_entropy(x: float) -> float:
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"binary entropy needs x in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


@dataclass(frozen=True)
class ChannelModel:
    alpha_db_per_km: float = 0.2
    detector_efficiency: float = 0.1
    dark_click_prob: float = 1e-5
    misalignment: float = 0.01
    vacuum_error: float = 0.5

    def __post_init__(self):
        if self.alpha_db_per_km < 0:
            raise ValidationError("alpha must be non-negative")
        for name in ("detector_efficiency", "dark_click_prob", "misalignment", "vacuum_error"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValidationError(f"{name} must be a probability, got {value}")

    def transmittance(self, distance_km: float) -> float:
        if distance_km < 0:
            raise ValidationError("distance must be non-negative")
        return self.detector_efficiency * 10 ** (-self.alpha_db_per_km * distance_km / 10)

    def yields(self, distance_km: float, n_max: int) -> np.ndarray:
        eta = self.transmittance(distance_km)
        n = np.arange(n_max + 1)
        return 1.0 - (1.0 - self.dark_click_prob) * (1.0 - eta) ** n

    def error_gains(self, distance_km: float, n_max: int) -> np.ndarray:
        eta = self.transmittance(distance_km)
        n = np.arange(n_max + 1)
        b = self.vacuum_error * self.dark_click_prob + self.misalignment * (1.0 - (1.0 - eta) ** n)
        return np.minimum(b, self.yields(distance_km, n_max))

    def error_rates(self, distance_km: float, n_max: int) -> np.ndarray:
        y = self.yields(distance_km, n_max)
        b = self.error_gains(distance_km, n_max)
        return np.divide(b, y, out=np.zeros_like(y), where=y > 0)


@dataclass(frozen=True)
class ChannelObservation:
    gains: ObservedGains
    q_z: float
    e_z: float
    zero_gain: bool = False


def simulate_channel(
    dists: Mapping[str, PhotonNumberDistribution],
    channel: ChannelModel,
    distance_km: float,
    margin: float = 0.0,
) -> ChannelObservation:
    """Expected gains and error gains of each prepared intensity after the channel.

    ``dists`` maps ``"u"``, ``"v"``, ``"w"`` to the distribution actually
    prepared. Intervals have zero width unless a relative ``margin`` is given.
    """
    if margin < 0:
        raise ValidationError("margin must be non-negative")
    intervals = {}
    point = {}
    for key in ("u", "v", "w"):
        p = dists[key].array
        y = channel.yields(distance_km, len(p) - 1)
        b = channel.error_gains(distance_km, len(p) - 1)
        gain = min(1.0, math.fsum(p * y))
        err = min(gain, math.fsum(p * b))
        point[key] = (gain, err)
        intervals[key] = GainInterval.point(gain, err, margin)
    q_z, b_u = point["u"]
    zero = q_z == 0.0
    e_z = 0.0 if zero else b_u / q_z
    return ChannelObservation(ObservedGains(**intervals), q_z, e_z, zero)


@dataclass(frozen=True)
class ProtocolParams:
    p_z: float = 0.9
    f: float = 1.16
    delta: float = 0.0
    settings: IntensitySettings = field(default_factory=IntensitySettings)
    e0_lower: float = 0.0
    n_cut: int = DEFAULT_N_CUT

    def __post_init__(self):
        if not (0.0 < self.p_z < 1.0):
            raise ValidationError("p_z must lie in (0, 1)")
        if not (self.f >= 1.0):
            raise ValidationError("error-correction inefficiency f must be >= 1")
        if not (self.delta >= 0.0):
            raise ValidationError("finite-size penalty must be >= 0")
        if not (0.0 <= self.e0_lower <= 0.5):
            raise ValidationError("e0_lower must lie in [0, 0.5]")


def secure_key_rate(
    params: ProtocolParams,
    p1_lower: float,
    y1_lower: float,
    e1_upper: float,
    q_z: float,
    e_z: float,
) -> float:
    """Secret fraction per pulse; negative values are returned as is."""
    for name, value in (("p1_lower", p1_lower), ("y1_lower", y1_lower), ("q_z", q_z), ("e_z", e_z)):
        if not (0.0 <= value <= 1.0):
            raise DomainError(f"{name} must lie in [0, 1], got {value!r}")
    if not (0.0 <= e1_upper <= E1_CAP):
        raise DomainError(f"e1_upper must lie in [0, {E1_CAP}], got {e1_upper!r}")
    p_u = params.settings.p_u
    privacy = p1_lower * y1_lower * (1.0 - binary_entropy(e1_upper))
    correction = params.f * q_z * binary_entropy(e_z)
    return p_u * params.p_z**2 * (privacy - correction - params.delta)


@dataclass(frozen=True)
class KeyRatePoint:
    distance_km: float
    q_z: float
    e_z: float
    p1_lower: float
    y1_lower: float
    e1_upper: float
    rate: float
    y0_lower: float = 0.0
    e1_clamped: bool = False

    def csv_row(self) -> list[str]:
        values = (self.distance_km, self.q_z, self.e_z, self.p1_lower, self.y1_lower, self.e1_upper, self.rate)
        return [f"{v:.12g}" for v in values]


@dataclass(frozen=True)
class SourceSpec:
    """What is prepared at the signal intensity and how its statistics are known.

    With ``constraints=None`` the signal statistics are taken as exactly known
    (the ideal reference curve); otherwise they are bounded from the
    correlation constraints.
    """

    signal: SourceKind
    constraints: CorrelationConstraints | None = None
    label: str = ""

    @classmethod
    def ideal_poisson(cls, mu: float) -> "SourceSpec":
        return cls(Poisson(mu), None, "poisson-ideal")


def _prepared(spec: SourceSpec, settings: IntensitySettings, n_cut: int) -> dict[str, PhotonNumberDistribution]:
    return {
        "u": spec.signal.distribution(n_cut),
        "v": Poisson(settings.v).distribution(n_cut),
        "w": Poisson(settings.w).distribution(n_cut),
    }


def evaluate_point(
    distance_km: float,
    spec: SourceSpec,
    channel: ChannelModel,
    params: ProtocolParams,
    signal_bounds: ProbabilityBounds | None = None,
    margin: float = 0.0,
) -> KeyRatePoint:
    n_cut = params.n_cut
    prepared = _prepared(spec, params.settings, n_cut)
    obs = simulate_channel(prepared, channel, distance_km, margin)
    if signal_bounds is None:
        sig = exact_intervals(prepared["u"], n_cut)
    else:
        sig = signal_intervals(signal_bounds, n_cut)
    p0_lower, p1_lower = float(sig.lower[0]), float(sig.lower[1])
    y0, y1 = solve_yield_bounds(obs.gains, decoy_intervals(sig, params.settings, n_cut))
    if p1_lower * y1 > 0:
        e1 = bound_error_rate_e1(obs.gains, p0_lower, y0, params.e0_lower, p1_lower, y1)
        e1_value, clamped = e1.value, e1.clamped
    else:
        e1_value, clamped = E1_CAP, True
    rate = secure_key_rate(params, p1_lower, y1, e1_value, obs.q_z, obs.e_z)
    return KeyRatePoint(float(distance_km), obs.q_z, obs.e_z, p1_lower, y1, e1_value, rate, y0, clamped)


def rate_vs_distance_scan(
    source_spec: SourceSpec,
    channel: ChannelModel,
    params: ProtocolParams,
    grid: Sequence[float],
    margin: float = 0.0,
    workers: int = 1,
) -> list[KeyRatePoint]:
    """Key rate at every grid distance, in grid order."""
    signal_bounds = None
    if source_spec.constraints is not None:
        if not math.isclose(source_spec.constraints.mu, params.settings.u, rel_tol=1e-12):
            raise ValidationError(
                f"constraints were taken at mu={source_spec.constraints.mu}, "
                f"but the signal intensity is u={params.settings.u}"
            )
        signal_bounds = bound_photon_probabilities(source_spec.constraints, params.n_cut)

    def one(d):
        return evaluate_point(d, source_spec, channel, params, signal_bounds, margin)

    if workers <= 1:
        return [one(d) for d in grid]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, grid))


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (stop inclusive) or a comma-separated list."""
    if ":" in text:
        try:
            start, stop, step = (float(t) for t in text.split(":"))
        except ValueError:
            raise ValidationError(f"grid {text!r} must be start:stop:step") from None
        if step <= 0 or stop < start:
            raise ValidationError(f"grid {text!r} needs step > 0 and stop >= start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(count)]
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValidationError(f"cannot parse grid {text!r}") from None


def write_scan_csv(points: Sequence[KeyRatePoint], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for p in points:
        writer.writerow(p.csv_row())


def scan_csv(points: Sequence[KeyRatePoint]) -> str:
    buf = io.StringIO()
    write_scan_csv(points, buf)
    return buf.getvalue()


def scan_metadata(spec: SourceSpec, channel: ChannelModel, params: ProtocolParams) -> dict:
    return {
        "source": str(spec.signal),
        "label": spec.label,
        "statistics": "exact" if spec.constraints is None else "correlation-bounded",
        "orders": None if spec.constraints is None else list(spec.constraints.orders),
        "gamma": None if spec.constraints is None else spec.constraints.gamma,
        "channel": asdict(channel),
        "protocol": asdict(params),
        "decoy_statistics": "poisson",
        "x_basis_error": "E_Z used for both bases (single-error-rate channel)",
    }
