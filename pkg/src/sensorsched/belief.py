"""Belief-space geometry for the controlled filtering recursion.

Given the current belief over the hidden state, each sensor choice a
induces an observation predictive zeta_a and a Bayes update eta_a; the
pair drives both the exact entropy computations and the belief-space
Markov kernel used by the solver.
"""

from dataclasses import dataclass

import numpy as np

ZERO_MASS = 1e-300
MERGE_TOL = 1e-12


class ZeroProbabilityObservation(ValueError):
    """Bayes update conditioned on an observation with zero predictive mass."""


def _as_distribution(probs, tol):
    p = np.array(probs, dtype=float)
    if p.ndim != 1:
        raise ValueError(f"expected a vector, got shape {p.shape}")
    if np.any(p < -tol):
        raise ValueError(f"negative probability {p.min():.3g}")
    p = np.clip(p, 0.0, None)
    s = p.sum()
    if s <= 0:
        raise ValueError("probability vector sums to zero")
    p /= s
    p.setflags(write=False)
    return p


@dataclass(frozen=True)
class Belief:
    """Point on the probability simplex over hidden states.

    Renormalized on construction; entries must be nonnegative up to a
    1e-12 slack (tiny negative round-off is clipped).
    """

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _as_distribution(self.probs, 1e-12))

    @property
    def num_states(self):
        return len(self.probs)

    @classmethod
    def uniform(cls, m):
        return cls(np.full(m, 1.0 / m))

    @classmethod
    def vertex(cls, m, k):
        p = np.zeros(m)
        p[k] = 1.0
        return cls(p)


@dataclass(frozen=True)
class ObservationPredictive:
    """Distribution of the next observation given the history."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _as_distribution(self.probs, 1e-12))


@dataclass(frozen=True)
class CostFunction:
    """Per-step cost over the simplex: belief entropy or 1 - |pi|^2."""

    kind: str = "entropy"
    log_base: float = 2.0

    def __post_init__(self):
        if self.kind not in ("entropy", "quadratic"):
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if self.kind == "entropy" and self.log_base not in (2.0, 2, np.e):
            raise ValueError(f"log base must be 2 or e, got {self.log_base}")

    def of(self, probs):
        """Evaluate on a raw probability vector (array in, scalar out)."""
        p = np.asarray(probs, dtype=float)
        if self.kind == "quadratic":
            return float(1.0 - p @ p)
        return entropy(p, self.log_base)


def entropy(probs, log_base=2.0):
    """Shannon entropy of a probability vector, with 0 log 0 := 0."""
    p = np.asarray(probs, dtype=float)
    nz = p > 0
    h = -np.sum(p[nz] * np.log(p[nz]))
    if log_base == 2 or log_base == 2.0:
        h /= np.log(2.0)
    return float(h)


def cost(belief, cf):
    """Per-step cost of a belief under the given cost function."""
    return cf.of(belief.probs)


def zeta_raw(probs, sensor, model):
    """Observation predictive as a raw vector: probs times T_a."""
    return probs @ model.sensors[sensor]


def eta_raw(probs, sensor, obs, model):
    """Bayes update as a raw unnormalized-then-normalized vector.

    Returns None when the observation has (numerically) zero predictive
    mass; kernel builders skip such branches since they carry no weight.
    """
    weighted = probs * model.sensors[sensor][:, obs]
    mass = weighted.sum()
    if mass <= ZERO_MASS:
        return None
    return (weighted @ model.transition) / mass


def zeta(belief, sensor, model):
    """Predictive distribution of the next observation under sensor a."""
    return ObservationPredictive(zeta_raw(belief.probs, sensor, model))


def eta(belief, sensor, obs, model):
    """Filtered belief after observing obs through sensor a.

    Raises ZeroProbabilityObservation when conditioning on a null event;
    direct calls that do this are caller bugs (kernel enumeration skips
    zero-mass observations instead).
    """
    out = eta_raw(belief.probs, sensor, obs, model)
    if out is None:
        raise ZeroProbabilityObservation(
            f"observation {obs} has zero predictive probability "
            f"under sensor {sensor}"
        )
    return Belief(out)


def transition_support(belief, sensor, model):
    """Successor beliefs and their weights under one sensor choice.

    One (successor, weight) pair per observation with positive predictive
    mass; successors closer than MERGE_TOL in L1 are merged with summed
    weight (uninformative sensors would otherwise inflate the support).
    """
    rho = zeta_raw(belief.probs, sensor, model)
    merged = []          # list of [probs, weight]
    for l, w in enumerate(rho):
        if w <= 0:
            continue
        nxt = eta_raw(belief.probs, sensor, l, model)
        if nxt is None:
            continue
        for entry in merged:
            if np.abs(entry[0] - nxt).sum() < MERGE_TOL:
                entry[1] += w
                break
        else:
            merged.append([nxt, float(w)])
    return [(Belief(p), w) for p, w in merged]
