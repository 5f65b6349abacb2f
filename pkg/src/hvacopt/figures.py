"""Matplotlib rendering of run artifacts to image files.

Figures land next to the delimited trajectory output: per-zone temperatures
against set points and comfort bands, flow rates against the (possibly
event-stepped) total cap, multiplier/price traces, and the comfort-vs-energy
tradeoff curve for parameter sweeps.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .simulate import RunArtifact

_DPI = 140


def _zone_cycle(n: int):
    cmap = plt.get_cmap("tab10")
    return [cmap(i % 10) for i in range(n)]


def render_temperatures(artifact: RunArtifact, path: Path) -> Path:
    sc = artifact.scenario
    table = artifact.table
    t = table.data["t_hours"]
    temps = table.per_zone("temp")
    colors = _zone_cycle(sc.net.n_zones)
    fig, ax = plt.subplots(figsize=(9, 4.5))
    for i, z in enumerate(sc.net.zones):
        ax.plot(t, temps[:, i], color=colors[i], lw=1.2, label=f"zone {i}")
        ax.axhline(z.set_point, color=colors[i], ls=":", lw=0.7, alpha=0.6)
    if "target_0" in table.data:
        targets = table.per_zone("target")
        for i in range(sc.net.n_zones):
            ax.plot(t, targets[:, i], color=colors[i], ls="--", lw=0.8, alpha=0.7)
    lo = min(z.comfort_min for z in sc.net.zones)
    hi = max(z.comfort_max for z in sc.net.zones)
    ax.axhspan(lo, hi, color="0.92", zorder=0)
    for ev in sc.events:
        ax.axvline(ev.time_hours, color="0.4", ls="-.", lw=0.8)
    ax.set_xlabel("time (h)")
    ax.set_ylabel("temperature (degC)")
    ax.set_title(f"{sc.name}: zone temperatures (dashed: controller targets)")
    ax.legend(loc="best", fontsize=8, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def render_flows(artifact: RunArtifact, path: Path) -> Path:
    sc = artifact.scenario
    table = artifact.table
    t = table.data["t_hours"]
    flows = table.per_zone("flow")
    colors = _zone_cycle(sc.net.n_zones)
    fig, ax = plt.subplots(figsize=(9, 4.5))
    for i in range(sc.net.n_zones):
        ax.plot(t, flows[:, i], color=colors[i], lw=1.0, label=f"zone {i}")
    ax.plot(t, table.data["total_flow"], color="k", lw=1.5, label="total")
    caps = np.array([sc.context_at(th).total_flow_cap for th in t])
    ax.plot(t, caps, color="r", ls="--", lw=1.0, label="cap")
    for ev in sc.events:
        ax.axvline(ev.time_hours, color="0.4", ls="-.", lw=0.8)
    ax.set_xlabel("time (h)")
    ax.set_ylabel("flow (kg/s)")
    ax.set_title(f"{sc.name}: supply flow rates")
    ax.legend(loc="best", fontsize=8, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def render_duals(artifact: RunArtifact, path: Path) -> Path:
    sc = artifact.scenario
    table = artifact.table
    t = table.data["t_hours"]
    fig, ax = plt.subplots(figsize=(9, 4.5))
    colors = _zone_cycle(sc.net.n_zones)
    if "flow_match_0" in table.data:
        fm = table.per_zone("flow_match")
        for i in range(sc.net.n_zones):
            ax.plot(t, fm[:, i], color=colors[i], lw=1.0,
                    label=f"flow-match dual {i}")
    if "price" in table.data:
        ax.plot(t, table.data["price"], color="purple", lw=1.2, label="fan price")
    if "cap_price" in table.data:
        ax.plot(t, table.data["cap_price"], color="k", lw=1.2, label="cap price")
    for ev in sc.events:
        ax.axvline(ev.time_hours, color="0.4", ls="-.", lw=0.8)
    ax.set_xlabel("time (h)")
    ax.set_ylabel("multiplier / price (p.u.)")
    ax.set_title(f"{sc.name}: multipliers and broadcast price")
    ax.legend(loc="best", fontsize=8, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def render_artifact(artifact: RunArtifact, out_dir: str | Path) -> list[Path]:
    """Write the standard figure set for one run; returns the file paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = artifact.scenario.name
    paths = [
        render_temperatures(artifact, out / f"{name}_temperatures.png"),
        render_flows(artifact, out / f"{name}_flows.png"),
    ]
    if artifact.table.controller in ("method1", "method2"):
        paths.append(render_duals(artifact, out / f"{name}_duals.png"))
    return paths


def render_tradeoff(points, param: str, out_dir: str | Path, name: str) -> Path:
    """Comfort-vs-energy curve across a parameter sweep."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}_tradeoff.png"
    fig, ax = plt.subplots(figsize=(6, 4.5))
    xs = [p.energy_proxy_kw for p in points]
    ys = [p.comfort_deviation for p in points]
    ax.plot(xs, ys, "o-", color="tab:blue")
    for p, x, y in zip(points, xs, ys):
        ax.annotate(f"{param}={p.value:g}", (x, y), textcoords="offset points",
                    xytext=(6, 4), fontsize=8)
    ax.set_xlabel("energy proxy (kW)")
    ax.set_ylabel("mean comfort deviation (degC)")
    ax.set_title(f"comfort vs energy across {param}")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path
