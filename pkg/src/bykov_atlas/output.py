"""File emission: provenance headers, byte-stable CSV/JSON, atomic writes and minimal SVG plots."""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from .errors import EmptyDataset

TOOL = "bykov-atlas"
SVG_GENERATOR = f"{TOOL} svg 1"


def config_hash(config: Mapping[str, Any]) -> str:
    """sha256 of the config serialized canonically (sorted keys, no whitespace)."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Provenance:
    config_sha256: str
    seed: int
    extra: tuple[tuple[str, Any], ...] = ()

    @classmethod
    def of(cls, config: Mapping[str, Any], seed: int, **extra) -> "Provenance":
        return cls(config_hash(config), int(seed), tuple(sorted(extra.items())))

    def as_dict(self) -> dict:
        d = {"tool": TOOL, "version": __version__, "config_sha256": self.config_sha256, "seed": self.seed}
        d.update({k: _jsonable(v) for k, v in self.extra})
        return d

    def lines(self) -> list[str]:
        return [f"{k}: {format_value(v)}" for k, v in self.as_dict().items()]


def format_value(v: Any) -> str:
    """Shortest round-trip text for floats; lower-case booleans; plain text otherwise."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return repr(f)
    if v is None:
        return ""
    if isinstance(v, (list, tuple)):
        return " ".join(format_value(x) for x in v)
    return str(v)


def _jsonable(v: Any):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else None
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, Mapping):
        return {str(k): _jsonable(v[k]) for k in sorted(v, key=str)}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def atomic_write(path: str, text: str) -> None:
    """Write the whole file to a temp file in the same directory, then rename over ``path``."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(columns: Sequence[str], rows: Iterable[Mapping[str, Any]], prov: Provenance) -> str:
    out = [f"# {line}" for line in prov.lines()]
    out.append(",".join(columns))
    for r in rows:
        out.append(",".join(format_value(r[c]) for c in columns))
    return "\n".join(out) + "\n"


def json_text(payload: Mapping[str, Any], prov: Provenance) -> str:
    # provenance leads the document; nested keys are sorted by _jsonable
    doc = {"provenance": _jsonable(prov.as_dict()), "data": _jsonable(payload)}
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Mapping[str, Any]], prov: Provenance) -> None:
    atomic_write(path, csv_text(columns, list(rows), prov))


def write_json(path: str, payload: Mapping[str, Any], prov: Provenance) -> None:
    atomic_write(path, json_text(payload, prov))


# ---------------------------------------------------------------------------
# SVG

W, H, MARGIN = 640, 420, 60


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def emit_svg(dataset: Mapping[str, Any], plot_kind: str, *, title: str = "", prov: Provenance | None = None) -> str:
    """Standalone SVG for one of the plot kinds.

    ``dataset`` holds arrays "x" and "y" (NaN breaks a curve), optional axis labels
    "xlabel"/"ylabel", and for profiles an optional list of "marks" (indices drawn
    as red dots). Curves use a log x axis when every x is positive and
    ``dataset["log_x"]`` is true; ladders are scatter plots; profiles are polylines.
    """
    if plot_kind not in ("curve", "ladder", "profile"):
        raise ValueError(f"unknown plot kind {plot_kind!r}")
    x = np.asarray(dataset.get("x", []), dtype=float)
    y = np.asarray(dataset.get("y", []), dtype=float)
    ok = np.isfinite(x) & np.isfinite(y)
    if x.size == 0 or not np.any(ok):
        raise EmptyDataset()
    log_x = bool(dataset.get("log_x", False)) and plot_kind == "curve" and np.all(x[ok] > 0)
    xt = np.log10(x) if log_x else x.copy()
    xmin, xmax = float(np.min(xt[ok])), float(np.max(xt[ok]))
    ymin, ymax = float(np.min(y[ok])), float(np.max(y[ok]))
    if xmax == xmin:
        xmin, xmax = xmin - 1, xmax + 1
    if ymax == ymin:
        ymin, ymax = ymin - 1, ymax + 1

    def px(v):
        return MARGIN + (v - xmin) / (xmax - xmin) * (W - 2 * MARGIN)

    def py(v):
        return H - MARGIN - (v - ymin) / (ymax - ymin) * (H - 2 * MARGIN)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f"<!-- generator: {SVG_GENERATOR} -->",
    ]
    if prov is not None:
        for line in prov.lines():
            parts.append(f"<!-- {line} -->")
    parts.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">')
    parts.append(f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>')
    if title:
        parts.append(f'<text x="{W // 2}" y="24" text-anchor="middle" font-size="14">{title}</text>')
    # axes
    x0, y0 = MARGIN, H - MARGIN
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{W - MARGIN}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{MARGIN}" stroke="black"/>')
    for t in _ticks(xmin, xmax):
        label = f"1e{t:.1f}" if log_x else _fmt(t)
        parts.append(f'<text x="{_fmt(px(t))}" y="{y0 + 18}" text-anchor="middle" font-size="10">{label}</text>')
    for t in _ticks(ymin, ymax):
        parts.append(f'<text x="{x0 - 6}" y="{_fmt(py(t) + 3)}" text-anchor="end" font-size="10">{_fmt(t)}</text>')
    if dataset.get("xlabel"):
        parts.append(f'<text x="{W // 2}" y="{H - 16}" text-anchor="middle" font-size="12">{dataset["xlabel"]}</text>')
    if dataset.get("ylabel"):
        parts.append(f'<text x="16" y="{H // 2}" text-anchor="middle" font-size="12" '
                     f'transform="rotate(-90 16 {H // 2})">{dataset["ylabel"]}</text>')

    if plot_kind == "ladder":
        for xi, yi in zip(xt[ok], y[ok]):
            parts.append(f'<circle cx="{_fmt(px(xi))}" cy="{_fmt(py(yi))}" r="2.5" fill="navy"/>')
    else:
        run: list[str] = []
        runs: list[list[str]] = []
        for xi, yi, good in zip(xt, y, ok):
            if good:
                run.append(f"{_fmt(px(xi))},{_fmt(py(yi))}")
            elif run:
                runs.append(run)
                run = []
        if run:
            runs.append(run)
        for r in runs:
            parts.append(f'<polyline fill="none" stroke="navy" stroke-width="1" points="{" ".join(r)}"/>')
        for i in dataset.get("marks", []):
            if ok[i]:
                parts.append(f'<circle cx="{_fmt(px(xt[i]))}" cy="{_fmt(py(y[i]))}" r="3" fill="red"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(path: str, dataset: Mapping[str, Any], plot_kind: str, *, title: str = "", prov: Provenance | None = None) -> None:
    atomic_write(path, emit_svg(dataset, plot_kind, title=title, prov=prov))
