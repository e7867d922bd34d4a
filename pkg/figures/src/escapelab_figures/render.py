"""Standard figures from escapelab run files.

Kinds: escape-fit, limit-set, h-convergence, measure-compare,
remainder-curve.  Figures are parameterized by the run files alone and the
annotated values are read from them verbatim, so re-rendering the same
inputs reproduces the same image bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .records import FigureInputError, column, load_run

KINDS = ("escape-fit", "limit-set", "h-convergence", "measure-compare", "remainder-curve")

STYLE = {
    "figure.figsize": (6.0, 4.2),
    "figure.dpi": 130,
    "savefig.dpi": 130,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "escapelab",  # deterministic SVG element ids
}


@dataclass
class FigureJob:
    kind: str
    runs: list
    out_path: str
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FigureInputError(f"unknown figure kind {self.kind!r}")
        if not self.runs:
            raise FigureInputError("at least one run file is required")


def render(job: FigureJob):
    """Render the figure; returns (out_path, annotations dict)."""
    records = [load_run(path) for path in job.runs]
    with plt.rc_context({**STYLE, **job.style}):
        fig, ax = plt.subplots()
        annotations = _RENDERERS[job.kind](ax, records)
        fig.tight_layout()
        fig.savefig(job.out_path, metadata=_stable_metadata(job.out_path))
        plt.close(fig)
    return job.out_path, annotations


def _stable_metadata(path):
    # matplotlib embeds a creation date in SVG output; pin it away
    if path.endswith(".svg"):
        return {"Date": None}
    return {"Software": "escapelab-figures"}


def _escape_fit(ax, records):
    rec = records[0]
    t = np.array(column(rec, "t"))
    mu = np.array(column(rec, "measure"))
    err = np.array(column(rec, "stderr"))
    pos = mu > 0
    ax.errorbar(
        t[pos], np.log(mu[pos]), yerr=err[pos] / mu[pos], fmt="o", ms=3.5,
        label="log mu_L(T(t))",
    )
    summary = rec.get("summary", {})
    q = summary.get("Q")
    annotations = {}
    if q is not None:
        anchor = float(np.log(mu[pos][0]))
        ax.plot(t, anchor + q * (t - t[pos][0]), "-", label=f"fitted Q = {q:.4f}")
        annotations["Q"] = q
    ref = summary.get("delta_minus_n")
    if ref is not None:
        anchor = float(np.log(mu[pos][0]))
        ax.plot(
            t, anchor + ref * (t - t[pos][0]), "--",
            label=f"reference delta - n = {ref:.4f}",
        )
        annotations["delta_minus_n"] = ref
    ax.set_xlabel("t")
    ax.set_ylabel("log trapped measure")
    ax.legend()
    ax.set_title("escape rate fit")
    return annotations


def _limit_set(ax, records):
    rec = records[0]
    x = np.array(column(rec, "x"))
    y = np.array(column(rec, "y"))
    ax.scatter(x, y, s=1.0, linewidths=0)
    circle = np.linspace(0, 2 * np.pi, 512)
    ax.plot(np.cos(circle), np.sin(circle), lw=0.5, color="k")
    ax.set_aspect("equal")
    ax.set_title(f"limit set sample ({len(x)} points)")
    return {"points": len(x)}


def _h_convergence(ax, records):
    rec = records[0]
    h = np.array(column(rec, "h"))
    err = np.array(column(rec, "abs_error"))
    ax.loglog(h, np.maximum(err, 1e-300), "o-", label="|matrix element - mu_xi|")
    summary = rec.get("summary", {})
    annotations = {"saturated": bool(summary.get("saturated", False))}
    order = summary.get("fitted_order")
    if order is not None:
        ax.loglog(h, err[0] * (h / h[0]) ** order, "--", label=f"fitted order = {order:.3f}")
        annotations["fitted_order"] = order
        ax.legend(title=f"order {order:.3f}")
    else:
        ax.legend(title="saturated (exact regime)")
    ax.set_xlabel("h")
    ax.set_ylabel("absolute error")
    ax.set_title("h-convergence of plane-wave matrix elements")
    return annotations


def _measure_compare(ax, records):
    rec = records[0]
    pair = np.array(column(rec, "pair"))
    gs = np.array(column(rec, "group_sum"))
    pf = np.array(column(rec, "pushforward"))
    rel = np.array(column(rec, "rel_gap"))
    width = 0.38
    ax.bar(pair - width / 2, gs, width, label="group sum")
    ax.bar(pair + width / 2, pf, width, label="pushforward")
    worst = float(np.max(rel))
    ax.set_xlabel("(xi, a) pair")
    ax.set_ylabel("mu_xi(a)")
    ax.set_title(f"dual-oracle comparison (worst rel gap {worst:.2e})")
    ax.legend()
    return {"worst_rel_gap": worst}


def _remainder_curve(ax, records):
    rec = records[0]
    h = np.array(column(rec, "h"))
    r = np.array(column(rec, "r_2lambda0"))
    ratio = np.array(column(rec, "lower_bound_ratio"))
    ax.loglog(h, r, "o-", label="r(h, 2 Lambda0)")
    ax.loglog(h, np.sqrt(h) * ratio.min(), "--", label="fitted c sqrt(h)")
    ax.set_xlabel("h")
    ax.set_ylabel("interpolated remainder")
    ax.set_title("remainder interpolation and trapped lower bound")
    ax.legend()
    return {"fitted_c": float(ratio.min())}


_RENDERERS = {
    "escape-fit": _escape_fit,
    "limit-set": _limit_set,
    "h-convergence": _h_convergence,
    "measure-compare": _measure_compare,
    "remainder-curve": _remainder_curve,
}
