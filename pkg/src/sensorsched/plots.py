"""Figure rendering for the report-producing CLI commands.

Each helper writes one PNG next to the delimited output it illustrates.
The agg backend is forced so the CLI works headless; PNG date metadata
is stripped to keep repeated runs byte-identical.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_SAVE_KW = dict(dpi=120, metadata={"Software": None})


def _entropy_label(cf):
    unit = "bits" if cf.log_base in (2, 2.0) else "nats"
    return f"entropy [{unit}]" if cf.kind == "entropy" else "quadratic cost"


def plot_entropy_table(ns, exact_vals, oracle_vals, cesaro_vals, cf, path):
    """Conditional entropy per horizon with its running average."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ns, exact_vals, "o-", label="conditional entropy")
    if oracle_vals is not None:
        ax.plot(ns, oracle_vals, "x--", label="joint-distribution check")
    ax.plot(ns, cesaro_vals, "s:", label="running average")
    ax.set_xlabel("observations n")
    ax.set_ylabel(_entropy_label(cf))
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_comparison(names, grid_g, mc_means, mc_half, cf, path):
    """Bar chart of average cost per policy, grid vs Monte Carlo."""
    import numpy as np

    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(names)), 4))
    width = 0.38 if mc_means is not None else 0.7
    ax.bar(x - (width / 2 if mc_means is not None else 0), grid_g,
           width, label="grid (Poisson)")
    if mc_means is not None:
        ax.bar(x + width / 2, mc_means, width, yerr=mc_half,
               capsize=3, label="Monte Carlo")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylabel(f"average {_entropy_label(cf)}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_solution(grid, policy, f, g_per_iter, cf, path):
    """Solver summary: g per iteration, plus the policy and relative
    values along the first belief coordinate (readable for small M)."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))

    axes[0].plot(range(len(g_per_iter)), g_per_iter, "o-")
    axes[0].set_xlabel("iteration")
    axes[0].set_ylabel(f"average {_entropy_label(cf)}")
    axes[0].set_title("policy iteration")

    x = grid.points[:, 0]
    order = x.argsort(kind="stable")
    sc = axes[1].scatter(x[order], f[order], c=policy.table[order],
                         cmap="coolwarm", s=18)
    axes[1].set_xlabel("belief in state 0")
    axes[1].set_ylabel("relative value f")
    axes[1].set_title("final policy (color = sensor)")
    fig.colorbar(sc, ax=axes[1], label="sensor")

    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
