"""Renders analysis results into the run directory: features.csv,
report.json, report.md, and the accompanying figures."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGURE_DPI = 120


def write_reports(result, out_dir, config_snapshot: dict) -> dict:
    """Write all report artifacts; returns the report dict that went into
    report.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    result.feature_table.to_csv(out / "features.csv", index=False)

    report = build_report_dict(result, config_snapshot)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)

    figures = render_figures(result, out)
    with open(out / "report.md", "w", encoding="utf-8") as fh:
        fh.write(render_markdown(report, figures))
    with open(out / "config.json", "w", encoding="utf-8") as fh:
        json.dump(config_snapshot, fh, indent=1, sort_keys=True)
    return report


def build_report_dict(result, config_snapshot: dict) -> dict:
    comparisons = [c.to_dict() for c in result.comparisons]
    n_comp = max(len(comparisons), 1)
    for c in comparisons:
        c["p_bonferroni"] = min(1.0, c["p_permutation"] * n_comp)
    return {
        "config": config_snapshot,
        "n_fixations": len(result.fixations),
        "n_words_fixated": len(result.word_metrics),
        "n_sentences": len(result.sentences),
        "top_sentences": list(result.top_sentences),
        "n_epochs_excluded": len(result.exclusions),
        "n_epochs_rejected": len(result.artifact_rejections),
        "clock_models": {
            kind: {
                "intercept_s": model.intercept,
                "slope": model.slope,
                "fit_residual_rms_s": model.fit_residual_rms,
                "n_points": model.n_points,
            }
            for kind, model in result.clock_models.items()
        },
        "comparisons": comparisons,
        "correlations": (
            result.correlations.to_dict(orient="records")
            if result.correlations is not None
            else []
        ),
        "classifier": result.classifier,
        "erp": {
            cond: {"n_epochs": r.n_epochs, "n400_amplitude_uv": r.n400_amplitude_uv}
            for cond, r in result.erp.items()
        },
    }


def render_figures(result, out_dir: Path) -> list[str]:
    figures = []

    if result.fixations:
        fig, ax = plt.subplots(figsize=(5, 3.2))
        durations = [f.duration_ms for f in result.fixations]
        ax.hist(durations, bins=30, color="#4878b0", edgecolor="white")
        ax.set_xlabel("fixation duration (ms)")
        ax.set_ylabel("count")
        ax.set_title("Fixation durations")
        fig.tight_layout()
        fig.savefig(out_dir / "fixation_durations.png", dpi=FIGURE_DPI)
        plt.close(fig)
        figures.append("fixation_durations.png")

    if result.erp_difference is not None and result.erp_times_ms is not None:
        fig, ax = plt.subplots(figsize=(5.5, 3.2))
        wave = result.erp_difference.mean(axis=0)
        ax.plot(result.erp_times_ms, wave, color="#b04848")
        ax.axvspan(300, 500, color="0.9")
        ax.axhline(0, color="0.5", lw=0.8)
        ax.set_xlabel("time from word onset (ms)")
        ax.set_ylabel("amplitude (µV)")
        ax.set_title("Difference wave (incongruent - congruent)")
        fig.tight_layout()
        fig.savefig(out_dir / "erp_difference.png", dpi=FIGURE_DPI)
        plt.close(fig)
        figures.append("erp_difference.png")

    table = result.feature_table
    if table is not None and len(table):
        sub = table[table["congruence"].isin(["congruent", "incongruent"])]
        if len(sub):
            fig, ax = plt.subplots(figsize=(4.5, 3.2))
            groups = [
                sub.loc[sub["congruence"] == c, "theta_parietal_uv2"].dropna()
                for c in ("congruent", "incongruent")
            ]
            ax.boxplot(groups, tick_labels=["congruent", "incongruent"])
            ax.set_ylabel("parietal theta power (µV²)")
            ax.set_title("Theta power by congruence")
            fig.tight_layout()
            fig.savefig(out_dir / "theta_by_condition.png", dpi=FIGURE_DPI)
            plt.close(fig)
            figures.append("theta_by_condition.png")

    return figures


def render_markdown(report: dict, figures: list[str]) -> str:
    lines = ["# Session analysis report", ""]
    lines.append(
        f"Fixations: {report['n_fixations']} | words fixated: {report['n_words_fixated']}"
        f" | sentences: {report['n_sentences']}"
    )
    lines.append(
        f"Epochs excluded at bounds: {report['n_epochs_excluded']}"
        f" | rejected as artifacts: {report['n_epochs_rejected']}"
    )
    lines.append("")
    lines.append("## Congruent vs incongruent comparisons")
    lines.append("")
    lines.append(
        "| feature | mean congruent | mean incongruent | t | p (perm) | p (Bonf.) | d | BF10 |"
    )
    lines.append("|---|---|---|---|---|---|---|---|")
    for c in report["comparisons"]:
        lines.append(
            f"| {c['feature_name']} | {c['mean_congruent']:.3f} | {c['mean_incongruent']:.3f} "
            f"| {c['t_statistic']:.3f} | {c['p_permutation']:.4f} | {c['p_bonferroni']:.4f} "
            f"| {c['cohens_d']:.3f} | {c['bayes_factor_10']:.3g} |"
        )
    if report["correlations"]:
        lines.append("")
        lines.append("## Cross-modal correlations")
        lines.append("")
        lines.append("| EEG feature | gaze feature | Pearson r | Spearman rho |")
        lines.append("|---|---|---|---|")
        for r in report["correlations"]:
            lines.append(
                f"| {r['eeg_feature']} | {r['gaze_feature']} "
                f"| {r['pearson_r']:.3f} | {r['spearman_rho']:.3f} |"
            )
    if report["classifier"]:
        lines.append("")
        lines.append("## Congruence classifier")
        lines.append("")
        lines.append(
            f"CV accuracy {report['classifier']['cv_accuracy']:.3f}, "
            f"CV AUC {report['classifier']['cv_auc']:.3f}"
        )
    if figures:
        lines.append("")
        lines.append("## Figures")
        lines.append("")
        for name in figures:
            lines.append(f"![{name}]({name})")
    lines.append("")
    return "\n".join(lines)
