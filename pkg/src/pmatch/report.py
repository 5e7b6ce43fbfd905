"""Report emission: plain-text tables, versioned CSV files, and matplotlib
figures rendered alongside the CSV output.

CSV schemas are fixed and versioned through the leading `schema` column;
consumers should select on it rather than on column position.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

RUN_SCHEMA = "run-v1"
RUN_COLUMNS = (
    "schema",
    "protocol",
    "candidate",
    "similarity",
    "common_count",
    "accepted",
    "error",
    "offline_exp",
    "online_exp",
    "offline_hash",
    "online_hash",
    "bytes_sent",
    "bytes_received",
    "energy_j",
    "simulated_ms",
)

MC_SCHEMA = "montecarlo-v1"
MC_COLUMNS = (
    "schema",
    "lambda",
    "l",
    "lprime",
    "trials",
    "true_size",
    "mean_size",
    "var_size",
    "claimed_var_size",
    "true_overlap",
    "mean_overlap",
    "var_overlap",
    "claimed_var_overlap",
    "true_similarity",
    "mean_similarity",
    "var_similarity",
    "rank_accuracy",
    "saturated",
)

BENCH_SCHEMA = "bench-v1"
BENCH_COLUMNS = (
    "schema",
    "protocol",
    "m",
    "kappa",
    "prime_bits",
    "offline_s",
    "online_s",
    "bytes",
    "energy_j",
)


def format_table(headers: tuple[str, ...], rows: list[tuple]) -> str:
    cells = [[_fmt(v) for v in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(headers)]
    line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    out = [line, "-" * len(line)]
    for row in cells:
        out.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(out)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}"
    if v is None:
        return "-"
    return str(v)


def write_csv(path: Path, columns: tuple[str, ...], rows: list[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: _fmt(row.get(c)) for c in columns})
    return path


def run_rows(run_result, protocol: str) -> list[dict]:
    rows = []
    for r in run_result.results:
        sim = r.outcome.similarity if r.outcome else None
        rows.append(
            {
                "schema": RUN_SCHEMA,
                "protocol": protocol,
                "candidate": r.candidate,
                "similarity": sim,
                "common_count": r.outcome.common_count if r.outcome else None,
                "accepted": r.outcome.accepted if r.outcome else False,
                "error": r.error,
                "offline_exp": r.initiator_counters.offline.exp1024_ops
                + r.initiator_counters.offline.exp2048_ops,
                "online_exp": r.initiator_counters.online.exp1024_ops
                + r.initiator_counters.online.exp2048_ops,
                "offline_hash": r.initiator_counters.offline.hash_ops,
                "online_hash": r.initiator_counters.online.hash_ops,
                "bytes_sent": r.initiator_counters.bytes_sent,
                "bytes_received": r.initiator_counters.bytes_received,
                "energy_j": r.energy.joules,
                "simulated_ms": r.simulated_seconds * 1000.0,
            }
        )
    return rows


def render_run_figure(run_result, protocol: str, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    names, sims, declined = [], [], []
    for r in run_result.results:
        names.append(r.candidate)
        sim = r.outcome.similarity if r.outcome and r.outcome.similarity is not None else 0.0
        sims.append(sim)
        declined.append(r.outcome is None or not r.outcome.accepted)
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    colors = ["#b0b0b0" if d else "#4878d0" for d in declined]
    ax.bar(names, sims, color=colors)
    ax.set_ylabel("similarity")
    ax.set_ylim(0, 1.05)
    ax.set_title(f"{protocol}: candidate similarities (grey = declined)")
    for spine in ("top", "right"):
        ax.spines[spine].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_montecarlo_figure(summary, samples, path: Path) -> Path:
    """Histogram of the size-estimate samples with the claimed and the
    empirical normal curves overlaid."""
    path.parent.mkdir(parents=True, exist_ok=True)
    xs = np.asarray(samples.set_size)
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    ax.hist(xs, bins=40, density=True, color="#9ecae1", label="samples")
    grid = np.linspace(xs.min(), xs.max(), 300)
    for var, label, style in (
        (summary.claimed_var_size, "claimed variance", "--"),
        (summary.var_size, "sample variance", "-"),
    ):
        sd = np.sqrt(var)
        ax.plot(
            grid,
            np.exp(-0.5 * ((grid - summary.mean_size) / sd) ** 2) / (sd * np.sqrt(2 * np.pi)),
            style,
            label=f"{label} ({var:.3f})",
        )
    ax.axvline(summary.true_size, color="k", linewidth=0.8)
    ax.set_xlabel("estimated inserted-set size")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_bench_figure(rows: list[dict], path: Path) -> Path:
    """Online-cost curves per protocol against the attribute count."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    protocols = sorted({r["protocol"] for r in rows})
    for proto in protocols:
        pts = sorted((r["m"], r["online_s"]) for r in rows if r["protocol"] == proto)
        ax.plot([m for m, _ in pts], [s for _, s in pts], marker="o", label=proto)
    ax.set_xlabel("attributes per user (m)")
    ax.set_ylabel("online compute (s)")
    ax.set_yscale("log")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
