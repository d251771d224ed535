"""Plot-data series and figures from a run report."""

from __future__ import annotations

import json
import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .report import write_csv  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.5),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 7,
    "lines.markersize": 3,
}


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def _numeric(v):
    return [float(x) if isinstance(x, (int, float)) else float("nan") for x in v]


def emit_plotdata(report, out_dir=None) -> list[Path]:
    """Write one ``(x, y)`` CSV per series and one PNG per probe with series.

    ``report`` is a report dict or a path to ``report.json``; files go next to
    it unless ``out_dir`` is given.  A report without series writes nothing.
    """
    if not isinstance(report, dict):
        path = Path(report)
        base = path.parent
        report = json.loads(path.read_text(encoding="utf-8"))
    else:
        base = Path(".")
    out = Path(out_dir) if out_dir is not None else base / "plotdata"
    written = []
    probes = [p for p in report.get("probes", []) if p.get("series")]
    if not probes:
        return written
    out.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(STYLE):
        for p in probes:
            fig, ax = plt.subplots()
            logx = logy = True
            for name, s in sorted(p["series"].items()):
                x, y = _numeric(s["x"]), _numeric(s["y"])
                f = out / f"{_safe(p['id'])}__{_safe(name)}.csv"
                write_csv(f, (s.get("xlabel", "x"), s.get("ylabel", "y")), zip(x, y))
                written.append(f)
                pts = sorted((a, b) for a, b in zip(x, y) if a == a and b == b)
                logx &= all(a > 0 for a, _ in pts)
                logy &= all(b > 0 for _, b in pts)
                if pts:
                    ax.plot(*zip(*pts), marker="o", label=name)
                ax.set_xlabel(s.get("xlabel", "x"))
                ax.set_ylabel(s.get("ylabel", "y"))
            if logx:
                ax.set_xscale("log")
            if logy:
                ax.set_yscale("log")
            ax.set_title(f"{p['id']} ({p['type']})")
            if len(p["series"]) <= 12:
                ax.legend(loc="best")
            fig.tight_layout()
            png = out / f"{_safe(p['id'])}.png"
            fig.savefig(png, metadata={"Software": None})
            plt.close(fig)
            written.append(png)
    return written
