"""Figure specifications loaded from JSON.

Three kinds are supported, each reading only the documented matmed CSV
contracts (no statistics are recomputed here):

* ``scatter``:      one simharness scatter export (truth vs mean estimate)
* ``heatmap``:      posterior-probability panels (per kappa/sample size)
* ``grid-heatmap``: probability panels per (p0, q0) with VE/DIC annotations
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

KINDS = ("scatter", "heatmap", "grid-heatmap")

REQUIRED_COLUMNS = {
    "scatter": ["truth", "mean_estimate", "sd_estimate"],
    "heatmap": ["row", "col", "probability"],
    "grid-heatmap": ["row", "col", "probability"],
}


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class Panel:
    path: Path
    label: str = ""
    p0: int | None = None
    q0: int | None = None


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    output: Path
    panels: tuple
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    ncols: int = 3
    summary: Path | None = None   # grid_summary.csv for grid-heatmap

    def validate(self) -> "FigureSpec":
        if self.kind not in KINDS:
            raise SpecError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.panels:
            raise SpecError("at least one input panel is required")
        for panel in self.panels:
            if not Path(panel.path).exists():
                raise SpecError(f"input file does not exist: {panel.path}")
        if self.summary is not None and not Path(self.summary).exists():
            raise SpecError(f"summary file does not exist: {self.summary}")
        if self.kind == "scatter" and len(self.panels) != 1:
            raise SpecError("scatter takes exactly one input")
        return self


def load_spec(path) -> FigureSpec:
    with open(path) as fh:
        raw = json.load(fh)
    unknown = set(raw) - {"kind", "output", "inputs", "input", "title", "xlabel",
                          "ylabel", "ncols", "summary"}
    if unknown:
        raise SpecError(f"unknown spec keys: {sorted(unknown)}")
    if "input" in raw:
        inputs = [{"path": raw["input"]}]
    else:
        inputs = raw.get("inputs", [])
        if isinstance(inputs, list) and inputs and isinstance(inputs[0], str):
            inputs = [{"path": p} for p in inputs]
    panels = tuple(Panel(path=Path(d["path"]), label=d.get("label", ""),
                         p0=d.get("p0"), q0=d.get("q0")) for d in inputs)
    spec = FigureSpec(
        kind=raw.get("kind", ""),
        output=Path(raw.get("output", "figure.png")),
        panels=panels,
        title=raw.get("title", ""),
        xlabel=raw.get("xlabel", ""),
        ylabel=raw.get("ylabel", ""),
        ncols=int(raw.get("ncols", 3)),
        summary=Path(raw["summary"]) if raw.get("summary") else None,
    )
    return spec.validate()
