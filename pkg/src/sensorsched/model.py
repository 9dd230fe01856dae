"""Problem instances: hidden chain dynamics plus a bank of sensors.

A model is the pair (Q, {T_a}): an M x M row-stochastic transition matrix
for the autonomous state process and A emission matrices of shape M x L,
one per selectable sensor.
"""

import json
from dataclasses import dataclass, field

import numpy as np

ROW_SUM_TOL = 1e-9

STATIONARY_TOL = 1e-12
STATIONARY_MAX_ITERS = 10**6


def _readonly(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PomdpModel:
    """Immutable problem instance; arrays are frozen after construction."""

    transition: np.ndarray                  # M x M
    sensors: tuple                          # A matrices, each M x L
    state_labels: tuple = None
    observation_labels: tuple = None
    sensor_labels: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "transition", _readonly(self.transition))
        object.__setattr__(
            self, "sensors", tuple(_readonly(t) for t in self.sensors)
        )

    @property
    def num_states(self):
        return self.transition.shape[0]

    @property
    def num_observations(self):
        return self.sensors[0].shape[1]

    @property
    def num_sensors(self):
        return len(self.sensors)


@dataclass(frozen=True)
class StationaryDistribution:
    """Fixed point of left-multiplication by the transition matrix."""

    probs: np.ndarray
    converged: bool = True
    unique: bool = True

    def __post_init__(self):
        object.__setattr__(self, "probs", _readonly(self.probs))


def validate_model(model):
    """Check stochasticity and shape invariants; return a list of violations.

    An empty list means the model is valid.  Each entry names the offending
    matrix, row, and deviation, so reports can be surfaced verbatim.
    """
    report = []
    Q = model.transition
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        report.append(f"transition matrix must be square, got shape {Q.shape}")
        return report
    M = Q.shape[0]
    if len(model.sensors) == 0:
        report.append("model has no sensors")
        return report

    shapes = {t.shape for t in model.sensors}
    if len(shapes) > 1:
        report.append(f"sensor matrices have mixed shapes {sorted(shapes)}")
        return report
    L = model.sensors[0].shape[1]
    if model.sensors[0].shape[0] != M:
        report.append(
            f"sensor matrices have {model.sensors[0].shape[0]} rows, "
            f"expected {M}"
        )
        return report

    def check_rows(name, mat):
        for i, row in enumerate(mat):
            if np.any(row < 0):
                report.append(
                    f"{name} row {i} has negative probability "
                    f"(min {row.min():.3g})"
                )
            if np.any(row > 1):
                report.append(
                    f"{name} row {i} has probability above 1 "
                    f"(max {row.max():.3g})"
                )
            s = row.sum()
            if abs(s - 1.0) > ROW_SUM_TOL:
                report.append(f"{name} row {i} sums to {s:.10g}")

    check_rows("transition", Q)
    for a, T in enumerate(model.sensors):
        label = (
            model.sensor_labels[a]
            if model.sensor_labels
            else f"sensor {a}"
        )
        check_rows(label, T)
    return report


def normalize_model(model):
    """Return a copy with every row divided by its exact row sum.

    Input rows are only required to be stochastic within ROW_SUM_TOL;
    normalizing here keeps that slack from compounding through n-step
    belief recursions downstream.
    """
    Q = np.asarray(model.transition, dtype=float)
    Q = Q / Q.sum(axis=1, keepdims=True)
    sensors = []
    for T in model.sensors:
        T = np.asarray(T, dtype=float)
        sensors.append(T / T.sum(axis=1, keepdims=True))
    return PomdpModel(
        transition=Q,
        sensors=tuple(sensors),
        state_labels=model.state_labels,
        observation_labels=model.observation_labels,
        sensor_labels=model.sensor_labels,
    )


def stationary_distribution(model):
    """Stationary distribution of Q by power iteration from uniform.

    Non-convergence within the iteration cap (periodic or multichain Q)
    is flagged on the result rather than raised; the last iterate is
    returned either way.  Uniqueness is probed by counting unit
    eigenvalues of Q.
    """
    Q = model.transition
    M = Q.shape[0]
    d = np.full(M, 1.0 / M)
    converged = False
    for _ in range(STATIONARY_MAX_ITERS):
        nxt = d @ Q
        if np.abs(nxt - d).sum() < STATIONARY_TOL:
            d = nxt
            converged = True
            break
        d = nxt
    eigvals = np.linalg.eigvals(Q)
    n_unit = int(np.sum(np.abs(eigvals - 1.0) < 1e-9))
    return StationaryDistribution(
        probs=d / d.sum(), converged=converged, unique=(n_unit == 1)
    )


class ModelFormatError(ValueError):
    """The model file could not be parsed into the expected schema."""


def model_from_dict(doc):
    """Build a model from the JSON document schema.

    Expected keys: `states` (labels), `observations` (labels),
    `transition` (rows), `sensors` (list of {name, emission}).
    Dimensions are inferred from the arrays.
    """
    try:
        states = tuple(doc["states"])
        observations = tuple(doc["observations"])
        transition = np.array(doc["transition"], dtype=float)
        sensor_docs = doc["sensors"]
        sensor_labels = tuple(s.get("name", f"sensor {i}")
                              for i, s in enumerate(sensor_docs))
        sensors = tuple(np.array(s["emission"], dtype=float)
                        for s in sensor_docs)
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"bad model document: {e}") from e
    return PomdpModel(
        transition=transition,
        sensors=sensors,
        state_labels=states,
        observation_labels=observations,
        sensor_labels=sensor_labels,
    )


def load_model(path):
    """Load a model from a JSON file (see model_from_dict for the schema)."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ModelFormatError(f"{path}: {e}") from e
    return model_from_dict(doc)


def save_model(model, path):
    """Write a model back out in the JSON file schema."""
    doc = {
        "states": list(model.state_labels
                       or [f"s{i}" for i in range(model.num_states)]),
        "observations": list(model.observation_labels
                             or [f"z{i}" for i in range(model.num_observations)]),
        "transition": model.transition.tolist(),
        "sensors": [
            {
                "name": (model.sensor_labels[a]
                         if model.sensor_labels else f"sensor {a}"),
                "emission": model.sensors[a].tolist(),
            }
            for a in range(model.num_sensors)
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
