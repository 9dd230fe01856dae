"""Exact entropy computations by enumeration of observation sequences.

Everything here is desk-scale ground truth: conditional entropies of the
hidden state, their Cesaro averages (the estimation entropy of a policy),
and the observation entropy rate, all computed by exhaustive weighted
tree walks with no sampling or projection error.

Two independent routes compute the same conditional entropy: one runs
the belief recursion and takes expected leaf costs, the other builds the
joint distribution of (state, observation history) by forward recursion
over the hidden chain.  Their agreement is the central correctness check
of this module.
"""

from dataclasses import dataclass

import numpy as np

from .belief import Belief, entropy, zeta_raw

TREE_NODE_GUARD = 10**7


class HorizonTooLarge(ValueError):
    """The observation tree would exceed the enumeration guard."""


def _check_guard(num_obs, depth):
    if num_obs**max(depth, 0) > TREE_NODE_GUARD:
        raise HorizonTooLarge(
            f"L^n = {num_obs}^{depth} exceeds the {TREE_NODE_GUARD} "
            "node guard; use the simulate module for long horizons"
        )


def _walk_tree(model, policy, x0, depth, visit):
    """Depth-first walk of the pruned observation tree.

    Calls visit(t, weight, probs) at every node: probs is the exact
    filtered belief after t observations and weight the probability of
    the observation path leading there.  Zero-probability branches are
    pruned exactly; no approximate pruning.
    """
    Q = model.transition
    stack = [(0, 1.0, np.array(x0.probs))]
    while stack:
        t, w, probs = stack.pop()
        visit(t, w, probs)
        if t == depth:
            continue
        a = policy(Belief(probs))
        T = model.sensors[a]
        rho = probs @ T
        for l in range(len(rho)):
            if rho[l] <= 0:
                continue
            nxt = (probs * T[:, l]) @ Q
            stack.append((t + 1, w * rho[l], nxt / nxt.sum()))


def conditional_entropy_exact(model, policy, x0, n, cf):
    """Expected cost of the belief after n observations.

    With the entropy cost this is H(S_n | Z_0^{n-1}, pi_0 = x0); n = 0
    returns the cost of x0 itself.  Computed by weighting leaf costs of
    the depth-n observation tree by path probabilities.
    """
    if n < 0:
        raise ValueError("horizon must be nonnegative")
    _check_guard(model.num_observations, n)
    acc = [0.0]

    def visit(t, w, probs):
        if t == n:
            acc[0] += w * cf.of(probs)

    _walk_tree(model, policy, x0, n, visit)
    return acc[0]


def conditional_entropy_oracle(model, policy, x0, n, log_base=2.0):
    """H(S_n | Z_0^{n-1}) from the joint distribution, no belief recursion.

    Forward-propagates the unnormalized joint p(S_t, z_0^{t-1}) over the
    hidden chain for every observation sequence and chain-rules the
    conditional entropy at depth n.  The policy still needs a belief to
    pick sensors; that belief is read off by normalizing the joint, not
    by the Bayes-update recursion, so the two routes share no filtering
    code.
    """
    if n < 0:
        raise ValueError("horizon must be nonnegative")
    _check_guard(model.num_observations, n)
    Q = model.transition
    L = model.num_observations
    total = [0.0]

    def recurse(alpha, t):
        if t == n:
            mass = alpha.sum()
            total[0] += mass * entropy(alpha / mass, log_base)
            return
        a = policy(Belief(alpha / alpha.sum()))
        T = model.sensors[a]
        for z in range(L):
            nxt = (alpha * T[:, z]) @ Q
            if nxt.sum() > 0:
                recurse(nxt, t + 1)

    recurse(np.array(x0.probs), 0)
    return total[0]


@dataclass(frozen=True)
class CesaroResult:
    """Running average of per-step expected costs, with the raw terms."""

    average: float
    terms: np.ndarray            # terms[t] = E[c(pi_t)]
    partial_averages: np.ndarray


def cesaro_estimation_entropy(model, policy, x0, n_steps, cf):
    """Average of E[c(pi_t)] for t = 0..n_steps-1 in a single tree walk.

    With the entropy cost the average estimates the estimation entropy
    of the policy; the partial-average sequence is returned for
    convergence inspection.
    """
    if n_steps < 1:
        raise ValueError("need at least one step")
    _check_guard(model.num_observations, n_steps - 1)
    terms = np.zeros(n_steps)

    def visit(t, w, probs):
        terms[t] += w * cf.of(probs)

    _walk_tree(model, policy, x0, n_steps - 1, visit)
    partial = np.cumsum(terms) / np.arange(1, n_steps + 1)
    return CesaroResult(
        average=float(partial[-1]), terms=terms, partial_averages=partial
    )


def entropy_rate_exact(model, policy, x0, n, log_base=2.0):
    """Average of H(Z_i | Z_0^{i-1}) for i = 1..n.

    Each term is the expected entropy of the observation predictive at
    depth i; the average estimates the entropy rate of the observation
    process under the policy.
    """
    if n < 1:
        raise ValueError("need at least one step")
    _check_guard(model.num_observations, n)
    acc = [0.0]

    def visit(t, w, probs):
        if 1 <= t <= n:
            a = policy(Belief(probs))
            acc[0] += w * entropy(zeta_raw(probs, a, model), log_base)

    _walk_tree(model, policy, x0, n, visit)
    return acc[0] / n
