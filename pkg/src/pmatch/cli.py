"""Command-line interface.

    match run        --scenario file --protocol pmatch|pmatch+|ematch --out dir
    match montecarlo --lambda N --l N --lprime N --trials N --seed N [--out dir]
    match bench      --m list --kappa list --prime-bits {256,1024,2048} [--out dir]
    match counters   --protocol P --m N --kappa N

Reports are printed as tables; with --out, a versioned CSV and a rendered
figure are written alongside each other.
"""

from __future__ import annotations

from pathlib import Path

import click

from . import bench as bench_mod
from . import montecarlo as mc_mod
from . import report
from .counters import (
    REFERENCE_ROWS,
    EmatchParams,
    expected_counters,
)
from .runner import demo_scenario, load_scenario, run_scenario


@click.group()
def main():
    """Priority-aware private matching simulator."""


@main.command("run")
@click.option("--scenario", "scenario_path", type=click.Path(exists=True), default=None,
              help="Scenario JSON; defaults to the bundled demo scenario.")
@click.option("--protocol", type=click.Choice(["pmatch", "pmatch+", "ematch"]), default=None,
              help="Override the scenario's protocol.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Report directory.")
@click.option("--transport", type=click.Choice(["inprocess", "loopback"]), default="inprocess")
def run_cmd(scenario_path, protocol, out_dir, transport):
    """Run one full matching round against every candidate."""
    scenario = load_scenario(scenario_path) if scenario_path else demo_scenario()
    if protocol:
        scenario.protocol = protocol
    result = run_scenario(scenario, transport_kind=transport)
    rows = report.run_rows(result, scenario.protocol)
    headers = ("candidate", "similarity", "common", "accepted", "bytes", "energy_j", "sim_ms")
    table = [
        (
            r["candidate"],
            r["similarity"],
            r["common_count"],
            r["accepted"],
            r["bytes_sent"] + r["bytes_received"],
            r["energy_j"],
            r["simulated_ms"],
        )
        for r in rows
    ]
    click.echo(report.format_table(headers, table))
    if result.ranking:
        click.echo("ranking: " + " > ".join(f"{n} ({s:.4f})" for n, s in result.ranking))
    else:
        click.echo("ranking: (no candidate replied)")
    if out_dir:
        out = Path(out_dir)
        csv_path = report.write_csv(out / "run.csv", report.RUN_COLUMNS, rows)
        fig_path = report.render_run_figure(result, scenario.protocol, out / "run.png")
        click.echo(f"wrote {csv_path} and {fig_path}")


@main.command("montecarlo")
@click.option("--lambda", "length", type=int, default=400, help="Filter bits.")
@click.option("--l", "hash_count", type=int, default=12, help="Announced hash functions.")
@click.option("--lprime", "shared_count", type=int, default=11, help="Actually shared functions.")
@click.option("--trials", type=int, default=1000)
@click.option("--seed", type=str, default="mc")
@click.option("--out", "out_dir", type=click.Path(), default=None)
def montecarlo_cmd(length, hash_count, shared_count, trials, seed, out_dir):
    """Estimator bias/variance/coverage study on the demo profiles."""
    scenario = demo_scenario()
    users = {u.name: u.profile for u in scenario.users}
    params = EmatchParams(length=length, hash_count=hash_count, shared_count=shared_count)
    summary = mc_mod.estimator_experiment(
        users["Alice"], users["Bob"], params, trials, seed.encode()
    )
    accuracy, truth = mc_mod.rank_experiment(
        users["Alice"],
        {n: p for n, p in users.items() if n != "Alice"},
        params,
        trials,
        seed.encode(),
    )
    rows = [
        {
            "schema": report.MC_SCHEMA,
            "lambda": length,
            "l": hash_count,
            "lprime": shared_count,
            "trials": trials,
            "true_size": summary.true_size,
            "mean_size": summary.mean_size,
            "var_size": summary.var_size,
            "claimed_var_size": summary.claimed_var_size,
            "true_overlap": summary.true_overlap,
            "mean_overlap": summary.mean_overlap,
            "var_overlap": summary.var_overlap,
            "claimed_var_overlap": summary.claimed_var_overlap,
            "true_similarity": summary.true_similarity,
            "mean_similarity": summary.mean_similarity,
            "var_similarity": summary.var_similarity,
            "rank_accuracy": accuracy,
            "saturated": summary.saturated,
        }
    ]
    click.echo(
        report.format_table(
            ("quantity", "true", "mean", "sample var", "claimed var"),
            [
                ("set size", summary.true_size, summary.mean_size, summary.var_size, summary.claimed_var_size),
                ("overlap", summary.true_overlap, summary.mean_overlap, summary.var_overlap, summary.claimed_var_overlap),
                ("similarity", summary.true_similarity, summary.mean_similarity, summary.var_similarity, None),
            ],
        )
    )
    for eps, (emp, floor) in summary.coverage.items():
        click.echo(f"coverage eps={eps}: empirical {emp:.4f} >= bound {floor:.4f}")
    click.echo(f"rank accuracy (true best = {truth}): {accuracy:.4f}")
    if summary.saturated:
        click.echo(f"saturated trials: {summary.saturated}")
    if out_dir:
        out = Path(out_dir)
        csv_path = report.write_csv(out / "montecarlo.csv", report.MC_COLUMNS, rows)
        samples = mc_mod.sample_estimates(
            users["Alice"], users["Bob"], scenario.attribute_pool(), params, trials, seed.encode()
        )
        fig_path = report.render_montecarlo_figure(summary, samples, out / "montecarlo.png")
        click.echo(f"wrote {csv_path} and {fig_path}")


@main.command("bench")
@click.option("--m", "m_list", type=str, default="20,60,100", help="Comma list of attribute counts.")
@click.option("--kappa", "kappa_list", type=str, default="10", help="Comma list of priority bounds.")
@click.option("--prime-bits", type=click.Choice(["256", "1024", "2048"]), default="256")
@click.option("--out", "out_dir", type=click.Path(), default=None)
def bench_cmd(m_list, kappa_list, prime_bits, out_dir):
    """Wall-clock protocol benchmarks (hardware-dependent, report only)."""
    prime_bits = int(prime_bits)
    from .cipher import generate_safe_prime

    prime = generate_safe_prime(prime_bits, b"keys|prime")
    rows = []
    for kappa in (int(k) for k in kappa_list.split(",")):
        for m in (int(x) for x in m_list.split(",")):
            for proto in ("pmatch", "pmatch+", "ematch"):
                row = bench_mod.measure_protocol(m, kappa, proto, prime_bits, prime=prime)
                row["schema"] = report.BENCH_SCHEMA
                rows.append(row)
    headers = ("protocol", "m", "kappa", "offline_s", "online_s", "bytes", "energy_j")
    click.echo(
        report.format_table(
            headers,
            [tuple(r[h] for h in headers) for r in rows],
        )
    )
    if out_dir:
        out = Path(out_dir)
        csv_path = report.write_csv(out / "bench.csv", report.BENCH_COLUMNS, rows)
        fig_path = report.render_bench_figure(rows, out / "bench.png")
        click.echo(f"wrote {csv_path} and {fig_path}")


@main.command("counters")
@click.option("--protocol", type=click.Choice(["pmatch", "pmatch+", "ematch"]), default="pmatch")
@click.option("--m", type=int, default=100)
@click.option("--kappa", type=int, default=10)
@click.option("--prime-bits", type=int, default=1024)
def counters_cmd(protocol, m, kappa, prime_bits):
    """Print the closed-form per-session cost rows."""
    rows = []
    em = None
    if protocol == "ematch":
        em = EmatchParams(
            length=4096, hash_count=12, shared_count=11, size_a=m * kappa // 2, size_b=m * kappa // 2
        )
        click.echo("filter realization sized for q = m*kappa/2 indexed elements")
    for role in ("initiator", "responder"):
        c = expected_counters(protocol, role, m, kappa, prime_bits=prime_bits, ematch=em)
        rows.append(
            (
                protocol,
                role,
                f"{c.offline.exp1024_ops} exp1, {c.offline.hash_ops} h",
                f"{c.online.exp1024_ops} exp1, {c.online.hash_ops} h",
                8 * c.bytes_sent,
            )
        )
    click.echo(report.format_table(("protocol", "role", "offline", "online", "sent bits"), rows))
    click.echo("\nreference rows (published constants, not measured here):")
    click.echo(
        report.format_table(
            ("scheme", "role", "offline", "online", "sent bits"), list(REFERENCE_ROWS)
        )
    )


if __name__ == "__main__":
    main()
