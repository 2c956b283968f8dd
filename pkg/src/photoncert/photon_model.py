"""Photon-number distributions and their zero-delay correlation functions.

A pulsed, phase-randomised source is fully described by the diagonal of its
density matrix, i.e. by the probabilities ``p_n`` of emitting ``n`` photons.
This module builds the usual closed-form cases (Poisson, thermal, single
photon, mixtures) truncated at ``n_cut`` and maps a distribution to its
normalised correlation functions ``g_m = <n(n-1)...(n-m+1)> / mu**m``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    BadWeights,
    MismatchedLengths,
    TruncationTooSevere,
    ValidationError,
    ZeroMeanSource,
)

#: Largest probability mass a closed-form constructor may drop beyond n_cut.
TAIL_TOLERANCE = 1e-9
_SUM_SLACK = 1e-12
_WEIGHT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PhotonNumberDistribution:
    """Probabilities ``p_0 ... p_{n_cut}``; any missing mass lies beyond n_cut."""

    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if len(probs) < 2:
            raise ValidationError("a distribution needs n_cut >= 1")
        for n, p in enumerate(probs):
            if not (0.0 <= p <= 1.0):
                raise ValidationError(f"p_{n} = {p!r} is not a probability")
        total = math.fsum(probs)
        if not (1.0 - TAIL_TOLERANCE <= total <= 1.0 + _SUM_SLACK):
            raise ValidationError(f"probabilities sum to {total!r}, expected 1 - tail with tail <= {TAIL_TOLERANCE}")

    @property
    def n_cut(self) -> int:
        return len(self.probs) - 1

    @property
    def array(self) -> np.ndarray:
        return np.array(self.probs)

    @property
    def mean(self) -> float:
        return mean_photon_number(self)

    def __getitem__(self, n: int) -> float:
        return self.probs[n]

    def __len__(self) -> int:
        return len(self.probs)


def _check_mu(mu: float) -> float:
    mu = float(mu)
    if not (mu > 0.0 and math.isfinite(mu)):
        raise ValidationError(f"mean photon number must be positive, got {mu!r}")
    return mu


def _poisson_pmf(mu: float, n: int) -> float:
    return math.exp(-mu + n * math.log(mu) - math.lgamma(n + 1))


def poisson_distribution(mu: float, n_cut: int) -> PhotonNumberDistribution:
    """Coherent-state statistics ``p_n = exp(-mu) mu**n / n!``."""
    mu = _check_mu(mu)
    if n_cut < 1:
        raise ValidationError("n_cut must be >= 1")
    probs = [_poisson_pmf(mu, n) for n in range(n_cut + 1)]
    # Tail summed directly; 1 - sum(probs) would cancel catastrophically.
    tail_terms = []
    n = n_cut + 1
    while True:
        term = _poisson_pmf(mu, n)
        tail_terms.append(term)
        if n > mu and term < 1e-30:
            break
        n += 1
    tail = math.fsum(tail_terms)
    if tail > TAIL_TOLERANCE:
        raise TruncationTooSevere(f"Poisson({mu}) loses mass {tail:.3g} beyond n_cut={n_cut}")
    return PhotonNumberDistribution(tuple(probs))


def thermal_distribution(mu: float, n_cut: int) -> PhotonNumberDistribution:
    """Bose-Einstein (geometric) statistics ``p_n = mu**n / (1 + mu)**(n + 1)``."""
    mu = _check_mu(mu)
    if n_cut < 1:
        raise ValidationError("n_cut must be >= 1")
    ratio = mu / (1.0 + mu)
    tail = ratio ** (n_cut + 1)
    if tail > TAIL_TOLERANCE:
        raise TruncationTooSevere(f"thermal({mu}) loses mass {tail:.3g} beyond n_cut={n_cut}")
    probs = [ratio**n / (1.0 + mu) for n in range(n_cut + 1)]
    return PhotonNumberDistribution(tuple(probs))


def single_photon_distribution(n_cut: int) -> PhotonNumberDistribution:
    if n_cut < 1:
        raise ValidationError("n_cut must be >= 1")
    probs = [0.0] * (n_cut + 1)
    probs[1] = 1.0
    return PhotonNumberDistribution(tuple(probs))


def mixture_distribution(
    components: Sequence[PhotonNumberDistribution], weights: Sequence[float]
) -> PhotonNumberDistribution:
    """Convex combination of distributions sharing the same n_cut.

    Malformed weights are rejected, never renormalised.
    """
    if len(components) != len(weights) or not components:
        raise MismatchedLengths("need one positive weight per component")
    cuts = {c.n_cut for c in components}
    if len(cuts) != 1:
        raise MismatchedLengths(f"components have different n_cut values {sorted(cuts)}")
    weights = [float(w) for w in weights]
    if any(not (w > 0) for w in weights) or abs(math.fsum(weights) - 1.0) > _WEIGHT_TOLERANCE:
        raise BadWeights(f"weights {weights} must be positive and sum to 1")
    n_cut = cuts.pop()
    probs = tuple(
        math.fsum(w * c.probs[n] for w, c in zip(weights, components)) for n in range(n_cut + 1)
    )
    return PhotonNumberDistribution(probs)


def mean_photon_number(dist: PhotonNumberDistribution) -> float:
    return math.fsum(n * p for n, p in enumerate(dist.probs))


def falling_factorial(n: int, m: int) -> int:
    out = 1
    for k in range(m):
        out *= n - k
    return out


def factorial_moment(dist: PhotonNumberDistribution, m: int) -> float:
    """``sum_n p_n n(n-1)...(n-m+1)``, accumulated in ascending n."""
    return math.fsum(p * falling_factorial(n, m) for n, p in enumerate(dist.probs))


def correlation_from_distribution(dist: PhotonNumberDistribution, m: int) -> float:
    """Normalised m-th order correlation ``g_m`` of a diagonal state."""
    if int(m) != m or m < 2:
        raise ValidationError(f"correlation order must be an integer >= 2, got {m!r}")
    mu = mean_photon_number(dist)
    if mu == 0.0:
        raise ZeroMeanSource("g_m is undefined for the vacuum")
    return factorial_moment(dist, int(m)) / mu**m


# ---------------------------------------------------------------------------
# Source kinds: what a simulated emitter prepares pulse by pulse.


class SourceKind:
    """Base for the closed-form emitters the simulator can sample exactly."""

    def distribution(self, n_cut: int) -> PhotonNumberDistribution:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    @property
    def mean(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class Poisson(SourceKind):
    mu: float

    def __post_init__(self):
        _check_mu(self.mu)

    def distribution(self, n_cut: int) -> PhotonNumberDistribution:
        return poisson_distribution(self.mu, n_cut)

    def sample(self, rng, size):
        return rng.poisson(self.mu, size)

    @property
    def mean(self):
        return float(self.mu)

    def __str__(self):
        return f"poisson:{self.mu:g}"


@dataclass(frozen=True)
class Thermal(SourceKind):
    mu: float

    def __post_init__(self):
        _check_mu(self.mu)

    def distribution(self, n_cut: int) -> PhotonNumberDistribution:
        return thermal_distribution(self.mu, n_cut)

    def sample(self, rng, size):
        # numpy's geometric counts trials to first success (support starts at 1)
        return rng.geometric(1.0 / (1.0 + self.mu), size) - 1

    @property
    def mean(self):
        return float(self.mu)

    def __str__(self):
        return f"thermal:{self.mu:g}"


@dataclass(frozen=True)
class SinglePhoton(SourceKind):
    def distribution(self, n_cut: int) -> PhotonNumberDistribution:
        return single_photon_distribution(n_cut)

    def sample(self, rng, size):
        return np.ones(size, dtype=np.int64)

    @property
    def mean(self):
        return 1.0

    def __str__(self):
        return "single"


@dataclass(frozen=True)
class Mixture(SourceKind):
    components: tuple[SourceKind, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.components) != len(self.weights) or not self.components:
            raise MismatchedLengths("need one weight per mixture component")
        if any(not (w > 0) for w in self.weights) or abs(math.fsum(self.weights) - 1.0) > _WEIGHT_TOLERANCE:
            raise BadWeights(f"weights {list(self.weights)} must be positive and sum to 1")

    def distribution(self, n_cut: int) -> PhotonNumberDistribution:
        return mixture_distribution([c.distribution(n_cut) for c in self.components], self.weights)

    def sample(self, rng, size):
        which = rng.choice(len(self.components), size=size, p=np.array(self.weights))
        out = np.empty(size, dtype=np.int64)
        for k, comp in enumerate(self.components):
            sel = which == k
            out[sel] = comp.sample(rng, int(sel.sum()))
        return out

    @property
    def mean(self):
        return math.fsum(w * c.mean for w, c in zip(self.weights, self.components))

    def __str__(self):
        return "+".join(f"{w:g}*{c}" for w, c in zip(self.weights, self.components))


_ATOM = re.compile(r"^(poisson|thermal):([^:*+]+)$|^(single)$")


def _parse_atom(text: str) -> SourceKind:
    m = _ATOM.match(text.strip())
    if not m:
        raise ValidationError(f"cannot parse source {text!r}; expected poisson:MU, thermal:MU or single")
    if m.group(3):
        return SinglePhoton()
    try:
        mu = float(m.group(2))
    except ValueError:
        raise ValidationError(f"bad mean photon number in {text!r}") from None
    return Poisson(mu) if m.group(1) == "poisson" else Thermal(mu)


def parse_source(text: str) -> SourceKind:
    """Parse ``poisson:0.42``, ``thermal:0.42``, ``single`` or a mixture
    such as ``0.7*thermal:0.42+0.3*poisson:0.42``."""
    parts = text.split("+")
    if len(parts) == 1 and "*" not in text:
        return _parse_atom(text)
    comps, weights = [], []
    for part in parts:
        if "*" not in part:
            raise ValidationError(f"mixture term {part!r} needs the form WEIGHT*SOURCE")
        w, atom = part.split("*", 1)
        try:
            weights.append(float(w))
        except ValueError:
            raise ValidationError(f"bad mixture weight {w!r}") from None
        comps.append(_parse_atom(atom))
    return Mixture(tuple(comps), tuple(weights))
