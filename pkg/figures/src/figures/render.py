"""Figure building and rendering.

build_figure returns (matplotlib Figure, data model); the model is a plain
dict derived only from the inputs, so identical inputs give identical models
regardless of backend. render saves the figure and closes it.
"""

import glob
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  backend must be pinned first

from . import schemas  # noqa: E402

KINDS = ("mmd-curve", "metric-bars", "ks-box")
BAR_METRICS = ("esjd", "min_ess", "min_ess_per_sec")

_CYCLE = ("tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple",
          "tab:brown", "tab:pink", "tab:gray")


class InputError(ValueError):
    pass


@dataclass
class FigureSpec:
    kind: str
    inputs: str
    out_path: str
    log_y: bool = False
    labels: dict = field(default_factory=dict)  # series label -> color

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")


def _expand(spec):
    paths = sorted(glob.glob(spec.inputs))
    if not paths:
        raise InputError(f"no input files match {spec.inputs!r}")
    return paths


def _series_label(path, config):
    kernel = config.get("kernel")
    if kernel in ("lmrmhmc", "lmlmc"):
        return f"{kernel} a1={config.get('alpha1')}"
    if kernel:
        return str(kernel)
    return os.path.basename(os.path.dirname(path)) or os.path.basename(path)


def _file_label(path):
    return os.path.basename(os.path.dirname(path)) or os.path.basename(path)


def _color(spec, label, i):
    return spec.labels.get(label, _CYCLE[i % len(_CYCLE)])


def build_figure(spec):
    paths = _expand(spec)
    if spec.kind == "mmd-curve":
        series = []
        for i, path in enumerate(paths):
            curve = schemas.read_curve(path)
            label = _series_label(path, curve["config"])
            series.append({
                "label": label,
                "color": _color(spec, label, i),
                "steps": curve["steps"].tolist(),
                "values": curve["values"].tolist(),
            })
        model = {"kind": spec.kind, "series": series, "log_y": True}
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for s in series:
            ax.plot(s["steps"], s["values"], label=s["label"], color=s["color"])
        ax.set_yscale("log")
        ax.set_xlabel("step")
        ax.set_ylabel("|MMD^2_u|")
        ax.legend()
        return fig, model

    if spec.kind == "metric-bars":
        labels = [_file_label(p) for p in paths]
        rows = [schemas.read_metrics(p) for p in paths]
        values = {m: [r[m] for r in rows] for m in BAR_METRICS}
        model = {"kind": spec.kind, "labels": labels, "metrics": list(BAR_METRICS),
                 "values": values, "log_y": spec.log_y}
        fig, axes = plt.subplots(1, len(BAR_METRICS), figsize=(4 * len(BAR_METRICS), 4))
        x = range(len(labels))
        for ax, metric in zip(axes, BAR_METRICS):
            ax.bar(x, values[metric],
                   color=[_color(spec, lbl, i) for i, lbl in enumerate(labels)])
            ax.set_xticks(list(x), labels, rotation=30, ha="right")
            ax.set_title(metric)
            if spec.log_y:
                ax.set_yscale("log")
        fig.tight_layout()
        return fig, model

    labels = [_file_label(p) for p in paths]
    stats = [schemas.read_ks_statistics(p) for p in paths]
    model = {"kind": spec.kind, "labels": labels,
             "statistics": [s.tolist() for s in stats], "log_y": spec.log_y}
    fig, ax = plt.subplots(figsize=(1.5 + 1.2 * len(labels), 4.5))
    ax.boxplot(stats, tick_labels=labels)
    ax.set_ylabel("KS statistic")
    if spec.log_y:
        ax.set_yscale("log")
    return fig, model


def render(spec):
    """Build and save the figure; returns the output path."""
    fig, _ = build_figure(spec)
    out_dir = os.path.dirname(spec.out_path)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    fig.savefig(spec.out_path, dpi=150)
    plt.close(fig)
    return spec.out_path
