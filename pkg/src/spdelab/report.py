"""Delimited output, JSON verdicts and figure rendering.

CSV files carry a header row and floats at 17 significant digits, so a rerun
of the same config byte-reproduces them.  Each report path also renders a
matplotlib figure next to its CSV for quick inspection.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


@dataclass
class Verdict:
    name: str
    measured: float
    expected: float
    tolerance: float
    passed: bool

    def to_json(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def band_verdict(name: str, measured: float, expected: float, tolerance: float) -> Verdict:
    return Verdict(
        name=name,
        measured=float(measured),
        expected=float(expected),
        tolerance=float(tolerance),
        passed=bool(abs(measured - expected) <= tolerance),
    )


def write_verdicts(path, verdicts) -> bool:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = [v.to_json() for v in verdicts]
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return all(v.passed for v in verdicts)


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonify) + "\n")
    return path


def _jsonify(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------


def save_lines(path, x, ys, labels=None, xlabel="", ylabel="", title="", logx=False, logy=False,
               yerr=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    for i, y in enumerate(ys):
        label = labels[i] if labels else None
        if yerr is not None:
            ax.errorbar(x, y, yerr=np.atleast_2d(yerr)[i], label=label, capsize=2)
        else:
            ax.plot(x, y, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if labels:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_heatmap(path, values, extent, xlabel="x", ylabel="t", title=""):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    im = ax.imshow(values, aspect="auto", origin="lower", extent=extent, cmap="viridis")
    fig.colorbar(im, ax=ax)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
