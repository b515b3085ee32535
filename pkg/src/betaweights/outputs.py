"""Result emission: CSV tables, key/value files, reports, and SVG boxplots.

All writers format floats with 12 significant digits and write in a fixed
order, so a rerun with the same config produces byte-identical files. The
only exception is the timestamp comment in provenance.txt, which is
documented as excluded from byte comparisons. The boxplot renderer builds
the SVG by hand rather than through a plotting library: the files stay
deterministic, and the five-number summaries are embedded as data
attributes so they can be checked against the summary tables.
"""

from dataclasses import dataclass

import numpy as np

from .dataio import IngestionReport, RunConfig, fmt
from .diagnostics import DicResult, SummaryRow, summarize

SUMMARY_HEADER = "label,mean,sd,p2.5,median,p97.5"


@dataclass
class ResultBundle:
    """Everything a fit produced, as returned to library callers."""

    model_kind: str
    summaries: list  # SummaryRow per weight and sigma2 (per period if separated)
    dic: DicResult
    r2: SummaryRow
    differences: list | None  # (SummaryRow, pi0) per weight, separated only
    provenance: dict
    per_period_dic: tuple | None = None


def provenance_comment(config: RunConfig) -> str:
    return f"config={config.config_hash()} seed={config.seed}"


def _summary_line(row: SummaryRow) -> str:
    return ",".join([
        row.label,
        fmt(row.mean),
        fmt(row.sd),
        fmt(row.p2_5),
        fmt(row.median),
        fmt(row.p97_5),
    ])


def write_summary_csv(path, rows, config: RunConfig):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {provenance_comment(config)}\n")
        fh.write(SUMMARY_HEADER + "\n")
        for row in rows:
            fh.write(_summary_line(row) + "\n")


def write_differences_csv(path, rows_with_pi0, config: RunConfig):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {provenance_comment(config)}\n")
        fh.write(SUMMARY_HEADER + ",pi0\n")
        for row, pi0 in rows_with_pi0:
            fh.write(_summary_line(row) + "," + fmt(pi0) + "\n")


def write_dic_txt(path, result: DicResult, config: RunConfig,
                  per_period: tuple | None = None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {provenance_comment(config)}\n")
        fh.write(f"dbar = {fmt(result.dbar)}\n")
        fh.write(f"d_at_mean = {fmt(result.d_at_mean)}\n")
        fh.write(f"p_d = {fmt(result.p_d)}\n")
        fh.write(f"dic = {fmt(result.dic)}\n")
        fh.write(f"point_estimate = {result.point_estimate}\n")
        if per_period is not None:
            for j, r in enumerate(per_period, start=1):
                fh.write(f"period{j}_dic = {fmt(r.dic)}\n")
                fh.write(f"period{j}_p_d = {fmt(r.p_d)}\n")


def write_draws_csv(path, weights, sigma2, config: RunConfig):
    """One column per weight plus sigma2, post-burn-in draws in order."""
    k1 = weights.shape[1]
    header = ",".join([f"w{j + 1}" for j in range(k1)] + ["sigma2"])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {provenance_comment(config)}\n")
        fh.write(header + "\n")
        for i in range(weights.shape[0]):
            cells = [fmt(float(v)) for v in weights[i]]
            cells.append(fmt(float(sigma2[i])))
            fh.write(",".join(cells) + "\n")


def write_difference_draws_csv(path, diffs, config: RunConfig):
    header = ",".join(f"w{j + 1}" for j in range(diffs.shape[1]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {provenance_comment(config)}\n")
        fh.write(header + "\n")
        for i in range(diffs.shape[0]):
            fh.write(",".join(fmt(float(v)) for v in diffs[i]) + "\n")


def write_provenance(path, config: RunConfig, version: str, command: str,
                     timestamp: str):
    """A valid config file annotated with hash/version/timestamp comments.

    Feeding this file back through `--config` reproduces the run.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# betaweights {version} {command}\n")
        fh.write(f"# config_hash = {config.config_hash()}\n")
        fh.write(f"# timestamp = {timestamp}\n")
        for line in config.to_lines():
            fh.write(line + "\n")


def _table_text(rows, extra_header=(), extra_cells=None) -> list:
    header = ["label", "mean", "sd", "2.5%", "median", "97.5%"]
    header += list(extra_header)
    lines = ["  ".join(f"{h:>12}" for h in header)]
    for i, row in enumerate(rows):
        cells = [row.label, f"{row.mean:.4f}", f"{row.sd:.4f}",
                 f"{row.p2_5:.4f}", f"{row.median:.4f}", f"{row.p97_5:.4f}"]
        if extra_cells is not None:
            cells += [f"{v:.4f}" for v in extra_cells[i]]
        lines.append("  ".join(f"{c:>12}" for c in cells))
    return lines


def write_report_txt(path, bundle: ResultBundle, config: RunConfig,
                     report: IngestionReport, version: str):
    """Human-readable companion to the machine-readable files."""
    lines = []
    lines.append(f"betaweights {version} — {bundle.model_kind} model fit")
    lines.append(f"{provenance_comment(config)}")
    lines.append("")
    lines.append(f"input: {config.input_path}")
    lines.append(
        f"rows read {report.n_rows_read}, kept {report.n_rows_kept}, "
        f"dropped {len(report.dropped_rows)}, clamped {len(report.clamped_rows)} "
        f"(scale {report.scale_detected}, mapping {report.scale_mapping}, "
        f"boundary {report.boundary_policy})"
    )
    if report.dropped_rows:
        shown = ", ".join(str(i) for i in report.dropped_rows[:20])
        more = "" if len(report.dropped_rows) <= 20 else ", ..."
        lines.append(f"dropped data rows: {shown}{more}")
    lines.append("attribute weights: " + ", ".join(
        f"w{j + 1}={name}" for j, name in enumerate(report.attribute_columns)
    ) + f", w{len(report.attribute_columns) + 1}=latent")
    lines.append("")
    lines.append("posterior summaries")
    lines.extend(_table_text(bundle.summaries))
    lines.append("")
    if bundle.differences is not None:
        lines.append("weight differences (period 1 - period 2)")
        rows = [r for r, _ in bundle.differences]
        pi0s = [(p,) for _, p in bundle.differences]
        lines.extend(_table_text(rows, extra_header=("pi0",), extra_cells=pi0s))
        lines.append("")
    d = bundle.dic
    lines.append(
        f"DIC = {d.dic:.4f} (dbar {d.dbar:.4f}, d_at_mean {d.d_at_mean:.4f}, "
        f"p_d {d.p_d:.4f}, plug-in {d.point_estimate})"
    )
    if bundle.per_period_dic is not None:
        for j, r in enumerate(bundle.per_period_dic, start=1):
            lines.append(f"  period {j}: DIC = {r.dic:.4f} (p_d {r.p_d:.4f})")
    r2 = bundle.r2
    lines.append(
        f"R^2: mean {r2.mean:.4f}, sd {r2.sd:.4f}, "
        f"95% interval ({r2.p2_5:.4f}, {r2.p97_5:.4f})"
    )
    lines.append("")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))


def write_comparison_txt(path, joint: dict, separated: dict, config: RunConfig):
    """Side-by-side DIC / p_d / R^2 for the joint and separated fits."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {provenance_comment(config)}\n")
        fh.write(f"joint_dic = {fmt(joint['dic'])}\n")
        fh.write(f"joint_p_d = {fmt(joint['p_d'])}\n")
        fh.write(f"joint_r2_mean = {fmt(joint['r2_mean'])}\n")
        fh.write(f"separated_dic = {fmt(separated['dic'])}\n")
        fh.write(f"separated_p_d = {fmt(separated['p_d'])}\n")
        fh.write(f"separated_r2_mean = {fmt(separated['r2_mean'])}\n")
        diff = joint["dic"] - separated["dic"]
        fh.write(f"dic_difference = {fmt(diff)}\n")
        preferred = "joint" if diff <= 0 else "separated"
        fh.write(f"preferred_by_dic = {preferred}\n")


def _five_numbers(column) -> tuple:
    row = summarize(column, "col")
    q1, q3 = np.quantile(np.asarray(column, dtype=float), [0.25, 0.75],
                         method="linear")
    return row.p2_5, float(q1), row.median, float(q3), row.p97_5


def render_boxplots(path, labels, columns, title, config: RunConfig):
    """Five-number boxplots (2.5%, Q1, median, Q3, 97.5%) as a hand-built SVG.

    Whisker ends and the median match the summary tables by construction;
    every box carries its numbers in data-* attributes for verification.
    """
    fives = [_five_numbers(col) for col in columns]
    lo = min(f[0] for f in fives)
    hi = max(f[4] for f in fives)
    span = hi - lo
    if span <= 0.0:
        span = max(abs(hi), 1.0)
        lo, hi = lo - 0.5 * span, hi + 0.5 * span
        span = hi - lo
    pad = 0.05 * span
    vmin, vmax = lo - pad, hi + pad

    slot, box_w = 60, 26
    m_left, m_right, m_top, m_bottom = 72, 24, 42, 48
    width = m_left + m_right + slot * len(labels)
    height = 400
    plot_h = height - m_top - m_bottom

    def ycoord(v):
        return m_top + (vmax - v) / (vmax - vmin) * plot_h

    parts = []
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">'
    )
    parts.append(f"<!-- {provenance_comment(config)} -->")
    parts.append(
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>'
    )
    axis_x = m_left - 10
    parts.append(
        f'<line x1="{axis_x}" y1="{m_top}" x2="{axis_x}" '
        f'y2="{m_top + plot_h}" stroke="black" stroke-width="1"/>'
    )
    for t in range(5):
        v = vmin + (vmax - vmin) * t / 4
        y = ycoord(v)
        parts.append(
            f'<line x1="{axis_x - 4}" y1="{y:.2f}" x2="{axis_x}" '
            f'y2="{y:.2f}" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{axis_x - 7}" y="{y + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{v:.4g}</text>'
        )
    for i, (label, five) in enumerate(zip(labels, fives)):
        p025, q1, med, q3, p975 = five
        cx = m_left + slot * i + slot / 2
        x0, x1 = cx - box_w / 2, cx + box_w / 2
        y_lo, y_q1 = ycoord(p025), ycoord(q1)
        y_med, y_q3, y_hi = ycoord(med), ycoord(q3), ycoord(p975)
        parts.append(
            f'<g data-label="{label}" data-lo="{fmt(p025)}" data-q1="{fmt(q1)}" '
            f'data-median="{fmt(med)}" data-q3="{fmt(q3)}" data-hi="{fmt(p975)}">'
        )
        parts.append(
            f'<line x1="{cx:.2f}" y1="{y_lo:.2f}" x2="{cx:.2f}" '
            f'y2="{y_q1:.2f}" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<line x1="{cx:.2f}" y1="{y_q3:.2f}" x2="{cx:.2f}" '
            f'y2="{y_hi:.2f}" stroke="black" stroke-width="1"/>'
        )
        for yv in (y_lo, y_hi):
            parts.append(
                f'<line x1="{cx - 8:.2f}" y1="{yv:.2f}" x2="{cx + 8:.2f}" '
                f'y2="{yv:.2f}" stroke="black" stroke-width="1"/>'
            )
        parts.append(
            f'<rect x="{x0:.2f}" y="{y_q3:.2f}" width="{box_w}" '
            f'height="{max(y_q1 - y_q3, 0.1):.2f}" fill="none" '
            f'stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<line x1="{x0:.2f}" y1="{y_med:.2f}" x2="{x1:.2f}" '
            f'y2="{y_med:.2f}" stroke="black" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{cx:.2f}" y="{height - 26}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{label}</text>'
        )
        parts.append("</g>")
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
