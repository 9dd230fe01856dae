"""Monte Carlo sampling of the joint state / observation / belief process.

The hidden state evolves autonomously; the policy only picks which sensor
reads it.  Each trajectory uses two RNG streams derived from one seed,
one for state noise and one for observation noise, so two policies run
with the same seed see identical state paths (common random numbers).
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .belief import Belief, eta

BATCHES_PER_CHAIN = 20


@dataclass(frozen=True)
class TrajectoryRecord:
    seed: int
    states: np.ndarray        # s_t
    actions: np.ndarray       # a_t = policy(pi_t)
    observations: np.ndarray  # z_t ~ row s_t of T_{a_t}
    beliefs: np.ndarray       # (horizon, M); pi_{t+1} = eta(pi_t, a_t, z_t)
    costs: np.ndarray         # c(pi_t)

    @property
    def horizon(self):
        return len(self.states)


@dataclass(frozen=True)
class AverageCostEstimate:
    """Long-run average cost with a 95% batch-means confidence interval."""

    mean: float
    half_width: float
    burn_in: int
    total_steps: int
    n_chains: int


def _draw(rng, row_cumsum):
    # one uniform per call keeps parallel streams aligned across policies
    return int(np.searchsorted(row_cumsum, rng.random(), side="right"))


def sample_trajectory(model, policy, x0, s0, horizon, seed, cf):
    """Simulate one trajectory; bit-identical for identical inputs.

    s0 may be a state index or None to sample the initial state from x0
    (using the state stream, so the state path never depends on the
    policy either way).
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    ss = np.random.SeedSequence(seed)
    state_rng, obs_rng = (np.random.default_rng(c) for c in ss.spawn(2))

    Q_cum = np.cumsum(model.transition, axis=1)
    T_cum = [np.cumsum(T, axis=1) for T in model.sensors]

    if s0 is None:
        s = _draw(state_rng, np.cumsum(np.array(x0.probs)))
    else:
        s = int(s0)

    M = model.num_states
    states = np.empty(horizon, dtype=int)
    actions = np.empty(horizon, dtype=int)
    observations = np.empty(horizon, dtype=int)
    beliefs = np.empty((horizon, M))
    costs = np.empty(horizon)

    pi = x0
    for t in range(horizon):
        a = policy(pi)
        z = _draw(obs_rng, T_cum[a][s])
        states[t] = s
        actions[t] = a
        observations[t] = z
        beliefs[t] = pi.probs
        costs[t] = cf.of(pi.probs)
        s = _draw(state_rng, Q_cum[s])
        pi = eta(pi, a, z, model)

    return TrajectoryRecord(
        seed=seed, states=states, actions=actions,
        observations=observations, beliefs=beliefs, costs=costs,
    )


def write_trajectory_csv(record, path):
    """Export a trajectory as t,state,action,obs,belief_*,cost rows."""
    m = record.beliefs.shape[1]
    header = (["t", "state", "action", "obs"]
              + [f"belief_{i}" for i in range(m)] + ["cost"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(record.horizon):
            writer.writerow(
                [t, record.states[t], record.actions[t],
                 record.observations[t]]
                + [repr(float(b)) for b in record.beliefs[t]]
                + [repr(float(record.costs[t]))]
            )


def estimate_average_cost(model, policy, x0, total_steps, burn_in=None,
                          n_chains=4, base_seed=0, cf=None, s0=None):
    """Empirical long-run average of c(pi_t), pooled across chains.

    The confidence interval is by batch means (BATCHES_PER_CHAIN batches
    per chain, Student-t on the pooled batch averages).  Burn-in defaults
    to 10% of total_steps.
    """
    if burn_in is None:
        burn_in = total_steps // 10
    if total_steps <= burn_in:
        raise ValueError("total_steps must exceed burn_in")

    batch_means = []
    grand = []
    for k in range(n_chains):
        rec = sample_trajectory(model, policy, x0, s0, total_steps,
                                base_seed + k, cf)
        kept = rec.costs[burn_in:]
        grand.append(kept.mean())
        bs = len(kept) // BATCHES_PER_CHAIN
        trimmed = kept[: bs * BATCHES_PER_CHAIN]
        batch_means.extend(trimmed.reshape(BATCHES_PER_CHAIN, bs).mean(axis=1))

    batch_means = np.array(batch_means)
    b = len(batch_means)
    sd = batch_means.std(ddof=1) if b > 1 else 0.0
    half = float(stats.t.ppf(0.975, b - 1) * sd / np.sqrt(b)) if sd > 0 else 0.0
    return AverageCostEstimate(
        mean=float(np.mean(grand)), half_width=half,
        burn_in=burn_in, total_steps=total_steps, n_chains=n_chains,
    )
