"""CSV, text and SVG output, plus persistence of raw simulation estimates."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .approx import ApproxModel
from .sim import SimEstimate


def fmt(x: float) -> str:
    """Six significant digits, the format used by every report CSV."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.6g}"


def _raw(x: float) -> str:
    # repr round-trips floats exactly
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence], raw: bool = False) -> None:
    conv = _raw if raw else fmt
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([v if isinstance(v, str) else conv(v) for v in row])


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def text_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    cols = [list(map(str, col)) for col in zip(header, *rows)]
    widths = [max(len(v) for v in col) for col in cols]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(str(v).rjust(w) for v, w in zip(row, widths)))
    return "\n".join(lines)


# -- raw estimate persistence ------------------------------------------------


def save_estimate(est: SimEstimate, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    nb, J, K = est.pmf_batches.shape
    write_csv(
        directory / "batch_means.csv",
        ["batch", "station", "mean", "overflow_time", "overflow_area", "external_arrivals"],
        [
            (b, j, est.batch_means[b, j], est.overflow_batches[b, j], est.overflow_area[b, j],
             int(est.external_arrivals[b, j]))
            for b in range(nb) for j in range(J)
        ],
        raw=True,
    )
    write_csv(directory / "exits.csv", ["batch", "exits"],
              [(b, int(est.exits[b])) for b in range(nb)], raw=True)
    write_csv(
        directory / "pmf_batches.csv",
        ["batch", "station", "k", "fraction"],
        [(b, j, k, est.pmf_batches[b, j, k]) for b in range(nb) for j in range(J) for k in range(K)
         if est.pmf_batches[b, j, k] != 0.0],
        raw=True,
    )
    if est.joint_batches is not None:
        jk = est.joint_batches.shape[1]
        write_csv(
            directory / "joint_batches.csv",
            ["batch", "k1", "k2", "fraction"],
            [(b, i, k, est.joint_batches[b, i, k]) for b in range(nb) for i in range(jk) for k in range(jk)],
            raw=True,
        )
    if est.points is not None:
        write_csv(directory / "points.csv", [f"z{j + 1}" for j in range(J)],
                  [tuple(int(v) for v in p) for p in est.points], raw=True)
    meta = {
        "batch_length": est.batch_length,
        "window_start": est.window_start,
        "num_batches": nb,
        "J": J,
        "pmf_cap": K - 1,
        "joint_pair": list(est.joint_pair) if est.joint_pair else None,
        "joint_cap": None if est.joint_batches is None else est.joint_batches.shape[1] - 1,
        "has_points": est.points is not None,
        "level": est.level,
        "meta": est.meta,
    }
    (directory / "sim_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_estimate(directory: Path) -> SimEstimate:
    meta_path = directory / "sim_meta.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"no simulation results in {directory}")
    meta = json.loads(meta_path.read_text())
    nb, J, cap = meta["num_batches"], meta["J"], meta["pmf_cap"]
    if nb < 1 or meta["batch_length"] <= 0:
        raise ValueError(f"zero-length simulation input in {directory}")
    batch_means = np.zeros((nb, J))
    over_t = np.zeros((nb, J))
    over_a = np.zeros((nb, J))
    ext = np.zeros((nb, J), dtype=np.int64)
    for row in read_csv(directory / "batch_means.csv")[1]:
        b, j = int(row[0]), int(row[1])
        batch_means[b, j], over_t[b, j], over_a[b, j] = map(float, row[2:5])
        ext[b, j] = int(row[5])
    exits = np.zeros(nb, dtype=np.int64)
    for row in read_csv(directory / "exits.csv")[1]:
        exits[int(row[0])] = int(row[1])
    pmf = np.zeros((nb, J, cap + 1))
    for row in read_csv(directory / "pmf_batches.csv")[1]:
        pmf[int(row[0]), int(row[1]), int(row[2])] = float(row[3])
    joint = None
    if meta["joint_cap"] is not None:
        jc = meta["joint_cap"]
        joint = np.zeros((nb, jc + 1, jc + 1))
        for row in read_csv(directory / "joint_batches.csv")[1]:
            joint[int(row[0]), int(row[1]), int(row[2])] = float(row[3])
    points = None
    if meta["has_points"]:
        rows = read_csv(directory / "points.csv")[1]
        points = np.array([[int(v) for v in r] for r in rows], dtype=np.int64).reshape(-1, J)
    return SimEstimate(
        batch_length=meta["batch_length"],
        window_start=meta["window_start"],
        batch_means=batch_means,
        pmf_batches=pmf,
        overflow_batches=over_t,
        overflow_area=over_a,
        exits=exits,
        external_arrivals=ext,
        joint_pair=tuple(meta["joint_pair"]) if meta["joint_pair"] else None,
        joint_batches=joint,
        points=points,
        level=meta["level"],
        meta=meta["meta"],
    )


# -- SVG histograms ----------------------------------------------------------


def _panel(x0, y0, w, h, kmax, exp_pmf, sim_pmf, sim_hw, title) -> list[str]:
    vals = [exp_pmf[: kmax + 1].max()]
    if sim_pmf is not None:
        vals.append((sim_pmf[: kmax + 1] + sim_hw[: kmax + 1]).max())
    ymax = max(vals) * 1.1 or 1.0
    bw = w / (kmax + 1)

    def X(k):
        return x0 + (k + 0.5) * bw

    def Y(p):
        return y0 + h - h * p / ymax

    out = [
        f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#333"/>',
        f'<text x="{x0 + w / 2:.1f}" y="{y0 - 8}" text-anchor="middle" font-size="13">{title}</text>',
        f'<text x="{x0 - 6}" y="{y0 + 4}" text-anchor="end" font-size="10">{ymax:.3g}</text>',
        f'<text x="{x0 - 6}" y="{y0 + h}" text-anchor="end" font-size="10">0</text>',
        f'<text x="{x0}" y="{y0 + h + 14}" font-size="10">0</text>',
        f'<text x="{x0 + w}" y="{y0 + h + 14}" text-anchor="end" font-size="10">{kmax}</text>',
    ]
    if sim_pmf is not None:
        for k in range(kmax + 1):
            p = sim_pmf[k]
            out.append(
                f'<rect x="{x0 + k * bw + 0.1 * bw:.2f}" y="{Y(p):.2f}" width="{0.8 * bw:.2f}" '
                f'height="{y0 + h - Y(p):.2f}" fill="#9ecae1"/>'
            )
            if sim_hw[k] > 0:
                out.append(
                    f'<line x1="{X(k):.2f}" x2="{X(k):.2f}" y1="{Y(p - sim_hw[k]):.2f}" '
                    f'y2="{Y(p + sim_hw[k]):.2f}" stroke="#08519c" stroke-width="1"/>'
                )
    pts = " ".join(f"{X(k):.2f},{Y(exp_pmf[k]):.2f}" for k in range(kmax + 1))
    out.append(f'<polyline points="{pts}" fill="none" stroke="#d62728" stroke-width="1.5"/>')
    return out


def histogram_svg(
    exp_pmf: np.ndarray,
    sim_pmf: np.ndarray | None,
    sim_hw: np.ndarray | None,
    title: str,
    kmax: int,
    zoom: int = 10,
) -> str:
    """Two panels (full range and zoom on small k): Sim bars with CI whiskers, Exp line."""
    W, H = 900, 360
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    parts += _panel(60, 40, 480, 260, kmax, exp_pmf, sim_pmf, sim_hw, f"{title}")
    parts += _panel(600, 40, 260, 260, min(zoom, kmax), exp_pmf, sim_pmf, sim_hw, f"{title} (zoom)")
    legend_y = H - 20
    parts.append(f'<rect x="60" y="{legend_y - 9}" width="12" height="10" fill="#9ecae1"/>')
    parts.append(f'<text x="78" y="{legend_y}" font-size="11">Sim (95% CI)</text>')
    parts.append(f'<line x1="170" x2="190" y1="{legend_y - 4}" y2="{legend_y - 4}" stroke="#d62728" stroke-width="1.5"/>')
    parts.append(f'<text x="196" y="{legend_y}" font-size="11">Exp</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def sim_exp_cell(sim: int | None, exp: float) -> str:
    """Quantile cell in the ``Sim(Exp)`` style, e.g. ``43(42.45)``."""
    e = f"{exp:.2f}"
    return f"({e})" if sim is None else f"{sim}({e})"


def exp_histogram_range(model: ApproxModel, j: int, q: float = 0.99) -> int:
    return max(10, int(math.ceil(model.quantile(j, q))))
