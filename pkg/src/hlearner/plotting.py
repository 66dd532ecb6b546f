"""Static chart emission for sweep results.

Charts are written as SVG with a fixed hash salt and no embedded date, so
the same result table always produces the same bytes. Each learner's line
is tagged with gid "series-<learner>" and its standard-error band with
"band-<learner>", which makes the emitted document easy to inspect and to
assert on in tests.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import ResultTable

__all__ = ["emit_plot"]

_AXIS_LABELS = {
    "n": "training records",
    "k": "treatment components",
    "m": "outcomes",
}

_COLORS = {
    "hlearner": "tab:blue",
    "slearner": "tab:orange",
    "xslearner": "tab:green",
}


def emit_plot(table: ResultTable, path, title: str | None = None):
    """Line chart of mean composite PEHE per learner over the sweep axis,
    with a shaded band of one standard error."""
    if not table.agg:
        raise ValueError("no aggregate rows to plot")
    with plt.rc_context({"svg.hashsalt": "hlearner"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        learners = sorted({a.learner for a in table.agg})
        for i, learner in enumerate(learners):
            rows = sorted(
                (a for a in table.agg if a.learner == learner),
                key=lambda a: a.axis_value,
            )
            x = [a.axis_value for a in rows]
            mean = [a.mean_pehe for a in rows]
            lo = [a.mean_pehe - a.stderr_pehe for a in rows]
            hi = [a.mean_pehe + a.stderr_pehe for a in rows]
            color = _COLORS.get(learner, f"C{i}")
            ax.plot(x, mean, marker="o", color=color, label=learner, gid=f"series-{learner}")
            ax.fill_between(x, lo, hi, color=color, alpha=0.2, gid=f"band-{learner}")
        ax.set_xlabel(_AXIS_LABELS.get(table.axis, table.axis))
        ax.set_ylabel("composite PEHE")
        if title:
            ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
