"""Delimited output and figure rendering for solve/compare runs."""

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

CLASSES = ("s_u_sld", "s_u_mld", "s_d_sld", "s_d_mld")
CLASS_LABELS = {
    "s_u_sld": "legacy UL",
    "s_u_mld": "client UL",
    "s_d_sld": "AP DL to legacy",
    "s_d_mld": "AP DL to client",
}

SOLVE_HEADER = (
    "n_mld", "n_sld", "gamma", "n_a", "engine",
    "s_u_sld", "s_u_mld", "s_d_sld", "s_d_mld",
    "iterations", "residual",
)

COMPARE_HEADER = (
    "point", "n_mld", "n_sld", "gamma", "n_a",
    "ana_s_u_sld", "ana_s_u_mld", "ana_s_d_sld", "ana_s_d_mld",
    "sim_mean_s_u_sld", "sim_mean_s_u_mld", "sim_mean_s_d_sld", "sim_mean_s_d_mld",
    "sim_std_s_u_sld", "sim_std_s_u_mld", "sim_std_s_d_sld", "sim_std_s_d_mld",
    "err_pct_s_u_sld", "err_pct_s_u_mld", "err_pct_s_d_sld", "err_pct_s_d_mld",
    "flagged",
)

# relative error is meaningless for the near-zero classes; below this level
# points are compared on the absolute scale instead
ABS_FLOOR_MBPS = 0.5
SLD_UL_TOL_PCT = 15.0


def write_solve_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SOLVE_HEADER)
        for r in rows:
            writer.writerow([r.get(k, "") for k in SOLVE_HEADER])
    return Path(path)


def compare_row(point, cfg, ana, sim_reports):
    """Assemble one compare-CSV row from a report and its simulated replicas."""
    row = {
        "point": point,
        "n_mld": cfg.n_mld,
        "n_sld": cfg.n_sld,
        "gamma": cfg.gamma,
        "n_a": cfg.phy.n_a,
    }
    for cls in CLASSES:
        row[f"ana_{cls}"] = getattr(ana, cls) if ana else ""
    if sim_reports:
        n = len(sim_reports)
        for cls in CLASSES:
            vals = [getattr(r, cls) for r in sim_reports]
            mean = sum(vals) / n
            var = sum((v - mean) ** 2 for v in vals) / n
            row[f"sim_mean_{cls}"] = mean
            row[f"sim_std_{cls}"] = var**0.5
    else:
        for cls in CLASSES:
            row[f"sim_mean_{cls}"] = row[f"sim_std_{cls}"] = ""
    flags = []
    for cls in CLASSES:
        ana_v, sim_v = row[f"ana_{cls}"], row[f"sim_mean_{cls}"]
        if ana_v == "" or sim_v == "":
            row[f"err_pct_{cls}"] = ""
            continue
        if max(ana_v, sim_v) < ABS_FLOOR_MBPS:
            row[f"err_pct_{cls}"] = ""
            continue
        err = abs(sim_v - ana_v) / max(ana_v, 1e-12) * 100.0
        row[f"err_pct_{cls}"] = err
        if cls == "s_u_sld" and err > SLD_UL_TOL_PCT:
            flags.append(cls)
    row["flagged"] = ";".join(flags)
    return row


def write_compare_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COMPARE_HEADER)
        for r in rows:
            writer.writerow([r.get(k, "") for k in COMPARE_HEADER])
    return Path(path)


def figure_path(csv_path):
    p = Path(csv_path)
    return p.with_suffix(".png")


def render_solve_figure(path, report):
    """Bar chart of the four per-device per-link throughput classes."""
    fig, ax = plt.subplots(figsize=(6, 4))
    vals = [max(getattr(report, c), 1e-7) for c in CLASSES]
    ax.bar([CLASS_LABELS[c] for c in CLASSES], vals, color="tab:blue")
    ax.set_yscale("log")
    ax.set_ylabel("throughput [Mbps]")
    ax.set_title(
        f"n_mld={report.scenario.n_mld}, n_sld={report.scenario.n_sld}, "
        f"gamma={report.scenario.gamma:.3f}, n_a={report.scenario.phy.n_a}"
    )
    ax.tick_params(axis="x", rotation=20)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_compare_figure(path, rows, axis_label):
    """Per-class throughput versus sweep point: analysis lines, sim markers."""
    fig, ax = plt.subplots(figsize=(7, 5))
    xs = [r["point"] for r in rows]
    colors = dict(zip(CLASSES, ("tab:blue", "tab:orange", "tab:green", "tab:red")))
    for cls in CLASSES:
        ana = [r[f"ana_{cls}"] for r in rows]
        if all(v != "" for v in ana):
            ax.plot(xs, [max(v, 1e-7) for v in ana], "-o", ms=4,
                    color=colors[cls], label=f"{CLASS_LABELS[cls]} (analysis)")
        sim = [r[f"sim_mean_{cls}"] for r in rows]
        if all(v != "" for v in sim):
            err = [r[f"sim_std_{cls}"] for r in rows]
            ax.errorbar(xs, [max(v, 1e-7) for v in sim], yerr=err, fmt="s--", ms=4,
                        color=colors[cls], alpha=0.6,
                        label=f"{CLASS_LABELS[cls]} (sim)")
    ax.set_yscale("log")
    ax.set_xlabel(axis_label)
    ax.set_ylabel("per-device per-link throughput [Mbps]")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
