"""Command-line front end: ``gjn analyze|simulate|compare|gtest|bar-check``."""

from __future__ import annotations

import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import report
from .approx import ApproxModel, build_approx
from .bar import bar_check
from .config import PAPER_SCALE, ConfigError, ExperimentConfig, load_config
from .network import NetworkError
from .sim import SimConfig, SimEstimate, jackson_oracle, simulate
from .stats import ContingencyTable, g_test, joint_product_report

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3
JOINT_KMAX = 5


def _load(ctx_obj: dict) -> ExperimentConfig:
    cfg = load_config(ctx_obj["config"])
    cfg = cfg.select(ctx_obj["cases"])
    sim_changes = {}
    if ctx_obj["paper_scale"]:
        sim_changes.update(PAPER_SCALE)
    if ctx_obj["horizon"] is not None:
        sim_changes["horizon"] = ctx_obj["horizon"]
    if ctx_obj["seed"] is not None:
        sim_changes["seed"] = ctx_obj["seed"]
    if sim_changes:
        try:
            cfg = cfg.with_sim(**sim_changes)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return cfg


def _common(f):
    f = click.option("--config", "config", required=True, type=click.Path(dir_okay=False), help="Experiment config (JSON).")(f)
    f = click.option("--seed", type=int, default=None, help="Override sim.seed.")(f)
    f = click.option("--horizon", type=float, default=None, help="Override sim.horizon (time units).")(f)
    f = click.option("--paper-scale", is_flag=True, help="Use the full-length study settings (horizon 1e9).")(f)
    f = click.option("--out", "out", type=click.Path(file_okay=False), default="out", show_default=True)(f)
    f = click.option("--case", "cases", multiple=True, help="Restrict to these case labels.")(f)
    return f


def _run(fn, **kw):
    """Map library errors onto exit codes."""
    obj = {k: kw[k] for k in ("config", "seed", "horizon", "paper_scale", "cases")}
    try:
        cfg = _load(obj)
    except (ConfigError, NetworkError) as exc:
        click.echo(f"invalid config: {exc}", err=True)
        sys.exit(EXIT_INVALID)
    try:
        code = fn(cfg, Path(kw["out"]), **{k: v for k, v in kw.items() if k not in obj and k != "out"})
    except (ValueError, FileNotFoundError, ArithmeticError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    sys.exit(code or EXIT_OK)


@click.group()
def main() -> None:
    """Product-form approximation and simulation of generalized Jackson networks."""


# -- analyze -----------------------------------------------------------------


def analysis_rows(cfg: ExperimentConfig) -> tuple[list[str], list[list]]:
    levels = cfg.quantile_levels
    header = ["case", "station", "lambda", "rho", "sigma2", "d", "w_jj", "exp_mean"]
    header += [f"exp_q{round(q * 100):g}" for q in levels]
    rows = []
    for case in cfg.cases:
        m = build_approx(case.spec)
        for j in range(m.J):
            rows.append(
                [case.label, j + 1, m.traffic.lam[j], m.rho[j], m.sigma2[j], m.d[j], m.w[j, j], m.mean_queue(j)]
                + [m.quantile(j, q) for q in levels]
            )
    return header, rows


def do_analyze(cfg: ExperimentConfig, out: Path) -> int:
    header, rows = analysis_rows(cfg)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "analysis.csv", header, rows)
    w = build_approx(cfg.cases[0].spec).w
    lines = ["w matrix:"]
    lines += ["  " + "  ".join(f"{v:.6f}" for v in row) for row in w]
    lines.append("")
    lines.append(report.text_table(header, [[report.fmt(v) if not isinstance(v, str) else v for v in r] for r in rows]))
    text = "\n".join(lines) + "\n"
    (out / "analysis.txt").write_text(text)
    click.echo(text, nl=False)
    return EXIT_OK


@main.command()
@_common
def analyze(**kw):
    """Exact approximation: lambda, rho, w, sigma^2, d, means and quantiles."""
    _run(do_analyze, **kw)


# -- compare (shared by simulate) ---------------------------------------------


def write_comparison(case_label: str, model: ApproxModel, est: SimEstimate | None,
                     cfg: ExperimentConfig, out: Path) -> str:
    """Write means/quantiles/pmf/joint CSVs, SVG histograms and report.txt for one case."""
    out.mkdir(parents=True, exist_ok=True)
    J = model.J
    conv = cfg.pmf_convention
    lines = [f"case {case_label}  rho = ({', '.join(f'{r:.4g}' for r in model.rho)})"]

    mean_rows = []
    for j in range(J):
        if est is None:
            mean_rows.append([j + 1, "", "", model.mean_queue(j)])
        else:
            mean_rows.append([j + 1, est.mean[j], est.ci_halfwidth[j], model.mean_queue(j)])
    report.write_csv(out / "means.csv", ["station", "sim_mean", "ci_halfwidth", "exp_mean"], mean_rows)
    lines.append("")
    lines.append("Mean queue length, Sim (95% batch-means CI) vs Exp")
    lines.append(report.text_table(
        ["station", "Sim", "Exp"],
        [[str(j + 1),
          "-" if est is None else f"{est.mean[j]:.2f} ± {est.ci_halfwidth[j]:.2f}",
          f"{model.mean_queue(j):.2f}"] for j in range(J)],
    ))

    levels = cfg.quantile_levels
    q_rows, q_cells = [], []
    for j in range(J):
        cells = [str(j + 1)]
        for q in levels:
            e = model.quantile(j, q)
            s = None if est is None else est.quantile(j, q)
            q_rows.append([j + 1, q, "" if s is None else s, e])
            cells.append(report.sim_exp_cell(s, e))
        q_cells.append(cells)
    report.write_csv(out / "quantiles.csv", ["station", "level", "sim", "exp"], q_rows)
    lines.append("")
    lines.append("Quantiles, Sim(Exp)")
    lines.append(report.text_table(["station"] + [f"{round(q * 100):g}%" for q in levels], q_cells))

    pmf_rows = []
    for j in range(J):
        kmax = report.exp_histogram_range(model, j)
        if est is not None:
            kmax = min(kmax, est.pmf_cap)
        exp_pmf = model.pmf_vector(j, kmax, conv)
        sim_pmf = sim_hw = None
        if est is not None:
            sim_pmf = est.pmf[j, : kmax + 1]
            sim_hw = est.pmf_ci_halfwidth[j, : kmax + 1]
        for k in range(kmax + 1):
            if est is None:
                pmf_rows.append([j + 1, k, "", "", exp_pmf[k]])
            else:
                pmf_rows.append([j + 1, k, sim_pmf[k], sim_hw[k], exp_pmf[k]])
        svg = report.histogram_svg(exp_pmf, sim_pmf, sim_hw, f"Case {case_label} station {j + 1}", kmax)
        (out / f"hist_station{j + 1}.svg").write_text(svg)
    report.write_csv(out / "pmf.csv", ["station", "k", "sim", "sim_ci_halfwidth", "exp"], pmf_rows)

    if est is not None and est.joint_batches is not None:
        kmax = min(JOINT_KMAX, est.joint_batches.shape[1] - 1)
        rep = joint_product_report(est, kmax)
        report.write_csv(
            out / "joint.csv", ["k1", "k2", "product", "joint"],
            [[a, b, rep[a, b, 0], rep[a, b, 1]] for a in range(kmax + 1) for b in range(kmax + 1)],
        )
        lines.append("")
        lines.append("Joint time fractions (1e-3): product(joint)")
        lines.append(report.text_table(
            ["k1\\k2"] + [str(b) for b in range(kmax + 1)],
            [[str(a)] + [f"{1e3 * rep[a, b, 0]:.2f}({1e3 * rep[a, b, 1]:.2f})" for b in range(kmax + 1)]
             for a in range(kmax + 1)],
        ))

    text = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(text)
    return text


def _simulate_case(args):
    spec, sim, index = args
    return simulate(spec, sim, stream=index)


def do_simulate(cfg: ExperimentConfig, out: Path, workers: int = 1) -> int:
    jobs = [(c.spec, cfg.sim, i) for i, c in enumerate(cfg.cases)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            estimates = list(pool.map(_simulate_case, jobs))
    else:
        estimates = [_simulate_case(job) for job in jobs]
    for case, est in zip(cfg.cases, estimates):
        case_dir = out / case.label
        report.save_estimate(est, case_dir)
        # report from the reloaded estimate so that `compare` reproduces it byte for byte
        click.echo(_case_report(case, report.load_estimate(case_dir), cfg, case_dir))
    return EXIT_OK


def _case_report(case, est: SimEstimate | None, cfg: ExperimentConfig, case_dir: Path) -> str:
    text = write_comparison(case.label, build_approx(case.spec), est, cfg, case_dir)
    if est is None:
        return text
    try:
        oracle = jackson_oracle(case.spec, est.pmf_cap)
    except NetworkError:
        return text
    text += _oracle_section(est, oracle, case_dir)
    (case_dir / "report.txt").write_text(text)
    return text


def _oracle_section(est: SimEstimate, oracle, case_dir: Path) -> str:
    kmax = min(10, est.pmf_cap)
    exact = oracle.pmf[:, : kmax + 1]
    sim = est.pmf[:, : kmax + 1]
    se = est.pmf_stderr[:, : kmax + 1]
    rows = [[j + 1, k, sim[j, k], se[j, k], exact[j, k]] for j in range(est.J) for k in range(kmax + 1)]
    report.write_csv(case_dir / "oracle.csv", ["station", "k", "sim", "sim_se", "jackson"], rows)
    delta = np.abs(sim - exact)
    z = np.where(se > 0, delta / np.where(se > 0, se, 1.0), 0.0)
    return (
        "\nJackson product-form oracle (exact geometric marginals)\n"
        f"max |dpmf| (k <= {kmax}) = {delta.max():.3g}, max |dpmf|/SE = {z.max():.2f}\n"
        f"exact means: ({', '.join(f'{m:.4g}' for m in oracle.means)})\n"
    )


@main.command("simulate")
@_common
@click.option("--workers", type=int, default=1, show_default=True, help="Cases simulated in parallel.")
def simulate_cmd(**kw):
    """Simulate every case, persist raw estimates and write the comparison report."""
    _run(do_simulate, **kw)


def do_compare(cfg: ExperimentConfig, out: Path, approx_only: bool = False) -> int:
    for case in cfg.cases:
        case_dir = out / case.label
        est = None if approx_only else report.load_estimate(case_dir)
        click.echo(_case_report(case, est, cfg, case_dir))
    return EXIT_OK


@main.command()
@_common
@click.option("--approx-only", is_flag=True, help="Emit the Exp side alone (no simulation input).")
def compare(**kw):
    """Rebuild the Sim-vs-Exp report from persisted simulation output."""
    _run(do_compare, **kw)


# -- gtest --------------------------------------------------------------------


def do_gtest(cfg: ExperimentConfig, out: Path) -> int:
    for case in cfg.cases:
        case_dir = out / case.label
        est = report.load_estimate(case_dir)
        if est.points is None or est.joint_pair is None:
            raise ValueError(f"case {case.label}: joint recording absent (set sim.joint_interval)")
        a, b = est.joint_pair
        table = ContingencyTable.from_pairs(est.points[:, a], est.points[:, b]).trimmed()
        res = g_test(table)
        report.write_csv(
            case_dir / "contingency.csv",
            ["z_row\\z_col"] + [str(c) for c in table.col_labels],
            [[str(r)] + [int(v) for v in row] for r, row in zip(table.row_labels, table.counts)],
        )
        lines = [
            f"case {case.label}: G-test of independence, stations {a + 1} and {b + 1}",
            f"representative points: {table.total}",
            f"table: {res.shape[0]} x {res.shape[1]}",
            f"G = {res.G:.2f}, df = {res.df}, p = {res.p_value:.4g}",
        ]
        if est.joint_batches is not None:
            kmax = min(JOINT_KMAX, est.joint_batches.shape[1] - 1)
            rep = joint_product_report(est, kmax)
            lines.append("")
            lines.append("Joint time fractions (1e-3): product(joint)")
            lines.append(report.text_table(
                ["k1\\k2"] + [str(k) for k in range(kmax + 1)],
                [[str(i)] + [f"{1e3 * rep[i, k, 0]:.2f}({1e3 * rep[i, k, 1]:.2f})" for k in range(kmax + 1)]
                 for i in range(kmax + 1)],
            ))
        text = "\n".join(lines) + "\n"
        (case_dir / "gtest.txt").write_text(text)
        click.echo(text)
    return EXIT_OK


@main.command()
@_common
def gtest(**kw):
    """G-test of independence on the persisted representative points."""
    _run(do_gtest, **kw)


# -- bar-check ------------------------------------------------------------------


def do_bar_check(cfg: ExperimentConfig, out: Path) -> int:
    failed = False
    out.mkdir(parents=True, exist_ok=True)
    chunks = []
    for i, case in enumerate(cfg.cases):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.sim.seed, spawn_key=(i,)))
        results = bar_check(case.spec, rng)
        rows = [[r.name, f"{r.worst:.3e}", f"{r.tol:.0e}", "pass" if r.ok else "FAIL", r.detail] for r in results]
        failed |= not all(r.ok for r in results)
        chunks.append(f"case {case.label}\n" + report.text_table(["check", "worst", "tol", "status", "detail"], rows))
    text = "\n\n".join(chunks) + "\n"
    (out / "bar_check.txt").write_text(text)
    click.echo(text)
    return EXIT_CHECK if failed else EXIT_OK


@main.command("bar-check")
@_common
def bar_check_cmd(**kw):
    """Residuals of the flow-balance, sigma, linear-system and Taylor identities."""
    _run(do_bar_check, **kw)


if __name__ == "__main__":
    main()
