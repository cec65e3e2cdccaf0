"""Figure rendering for completed result stores.

Reads the delimited outputs of a run and writes PNG figures next to them
under ``figures/``.  Rendering is a pure post-processing step: it never
recomputes experiment data.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .store import ResultStore

__all__ = ["render_report"]


def render_report(store: ResultStore) -> list:
    """Render the figures appropriate to the store's experiment kind."""
    config = store.read_json("config.json")
    kind = config.get("kind")
    out = []
    if kind in ("lln", "cutconv"):
        out.append(_convergence_figure(store, kind))
    if kind == "nu":
        out.extend(_nu_figures(store))
    if kind in ("maxflow", "mincut"):
        out.extend(_field_figures(store, config, kind))
    if kind == "divergence":
        out.append(_divergence_figure(store))
    return [p for p in out if p is not None]


def _save(fig, store: ResultStore, name: str) -> Path:
    path = store.root / "figures" / name
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def _per_n(rows, header, col):
    i_n = header.index("n")
    i_c = header.index(col)
    acc = defaultdict(list)
    for row in rows:
        if row[i_c] != "":
            acc[int(row[i_n])].append(float(row[i_c]))
    return acc


def _mean_se(values):
    m = sum(values) / len(values)
    if len(values) > 1:
        var = sum((v - m) ** 2 for v in values) / (len(values) - 1)
        return m, math.sqrt(var / len(values))
    return m, 0.0


def _convergence_figure(store: ResultStore, kind: str) -> Path:
    header, rows = store.read_csv("results.csv")
    summary = store.read_json("summary.json")
    col = "phi_rescaled" if kind == "lln" else "dist_to_ref"
    acc = _per_n(rows, header, col)
    ns = sorted(acc)
    means, errs = zip(*[_mean_se(acc[n]) for n in ns])
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.errorbar(ns, means, yerr=errs, marker="o", capsize=3)
    capa = summary.get("capa_ref", {}).get("value")
    if kind == "lln" and capa is not None:
        ax.axhline(capa, color="tab:red", ls="--", lw=1, label="capa(F_ref)")
        ax.legend()
    ax.set_xlabel("n")
    ax.set_ylabel("flow / n^(d-1)" if kind == "lln" else "symmetric-difference volume")
    ax.set_xscale("log", base=2)
    title = "rescaled maximal flow" if kind == "lln" else "cut region distance"
    ax.set_title(title)
    return _save(fig, store, "convergence.png")


def _nu_figures(store: ResultStore) -> list:
    header, rows = store.read_csv("nu_estimates.csv")
    d = sum(1 for h in header if h.startswith("v_"))
    i_n = header.index("n")
    i_mean = header.index("mean")
    i_err = header.index("stderr")
    series = defaultdict(list)
    for row in rows:
        v = tuple(float(row[i]) for i in range(d))
        series[v].append((int(row[i_n]), float(row[i_mean]), float(row[i_err])))
    out = []
    fig, ax = plt.subplots(figsize=(5, 3.4))
    for v, pts in sorted(series.items()):
        pts.sort()
        ns = [p[0] for p in pts]
        ax.errorbar(
            ns, [p[1] for p in pts], yerr=[p[2] for p in pts],
            marker="o", capsize=3, label=f"v=({', '.join(f'{x:.3g}' for x in v)})",
        )
    ax.set_xlabel("n")
    ax.set_ylabel("tau / (n^(d-1) area)")
    ax.set_xscale("log", base=2)
    ax.set_title("flow constant estimates")
    ax.legend(fontsize=8)
    out.append(_save(fig, store, "nu_convergence.png"))
    if d == 2 and len(series) >= 3:
        fig = plt.figure(figsize=(4.2, 4.2))
        ax = fig.add_subplot(projection="polar")
        angles, values = [], []
        for v, pts in sorted(series.items()):
            pts.sort()
            theta = math.atan2(v[1], v[0])
            val = pts[-1][1]
            for t in (theta, theta + math.pi):
                angles.append(t % (2 * math.pi))
                values.append(val)
        order = sorted(range(len(angles)), key=lambda i: angles[i])
        angles = [angles[i] for i in order] + [angles[order[0]] + 2 * math.pi]
        values = [values[i] for i in order] + [values[order[0]]]
        ax.plot(angles, values, marker="o")
        ax.set_title("directional flow constant", pad=18)
        out.append(_save(fig, store, "nu_polar.png"))
    return out


def _domain_outline(ax, config):
    dom = config.get("domain")
    if isinstance(dom, str):
        try:
            with open(dom) as fh:
                dom = json.load(fh)
        except OSError:
            return
    if not isinstance(dom, dict) or dom.get("body", {}).get("type") != "boxes":
        return
    for b in dom["body"]["data"]:
        lo = [float(x) for x in b["lo"]]
        hi = [float(x) for x in b["hi"]]
        ax.add_patch(
            plt.Rectangle(
                lo, hi[0] - lo[0], hi[1] - lo[1],
                fill=False, ec="0.6", lw=0.8,
            )
        )


def _field_figures(store: ResultStore, config, kind: str) -> list:
    out = []
    streams = sorted(store.root.glob("stream_*.csv"))
    if streams:
        header, rows = store.read_csv(streams[-1].name)
        if len(header) == 4:  # d = 2
            fig, ax = plt.subplots(figsize=(4.6, 4.6))
            _domain_outline(ax, config)
            n = _n_from_tag(streams[-1].stem)
            xs, ys, us, vs = [], [], [], []
            for row in rows:
                a = int(row[0]) - 1
                k1, k2, f = int(row[1]), int(row[2]), float(row[3])
                if f == 0.0:
                    continue
                cx = (k1 + (0.5 if a == 0 else 0.0)) / n
                cy = (k2 + (0.5 if a == 1 else 0.0)) / n
                xs.append(cx)
                ys.append(cy)
                us.append(f if a == 0 else 0.0)
                vs.append(f if a == 1 else 0.0)
            if xs:
                ax.quiver(xs, ys, us, vs, angles="xy", scale_units="xy",
                          scale=max(abs(v) for v in us + vs) * n, width=0.003)
            ax.set_aspect("equal")
            ax.set_title(f"stream field ({streams[-1].stem})")
            ax.autoscale_view()
            out.append(_save(fig, store, "stream_field.png"))
    plaq_files = sorted((store.root / "geometry").glob("plaquettes_*.json"))
    if kind == "mincut" and plaq_files:
        recs = json.loads(plaq_files[-1].read_text())
        if recs and len(recs[0]["center"]) == 2:
            fig, ax = plt.subplots(figsize=(4.6, 4.6))
            _domain_outline(ax, config)
            for r in recs:
                cx, cy = r["center"]
                half = r["side"] / 2.0
                if r["axis"] == 1:  # plaquette normal along x: vertical segment
                    ax.plot([cx, cx], [cy - half, cy + half], "r-", lw=1.6)
                else:
                    ax.plot([cx - half, cx + half], [cy, cy], "r-", lw=1.6)
            ax.set_aspect("equal")
            ax.set_title(f"minimal cutset plaquettes ({plaq_files[-1].stem})")
            ax.autoscale_view()
            out.append(_save(fig, store, "cutset_plaquettes.png"))
    return out


def _n_from_tag(stem: str) -> int:
    for part in stem.split("_"):
        if part.startswith("n") and part[1:].isdigit():
            return int(part[1:])
    return 1


def _divergence_figure(store: ResultStore) -> Path:
    header, rows = store.read_csv("divergence.csv")
    res = _per_n(rows, header, "residual")
    bnd = _per_n(rows, header, "bound")
    ns = sorted(res)
    means = [sum(res[n]) / len(res[n]) for n in ns]
    bounds = [bnd[n][0] for n in ns]
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.loglog(ns, means, "o-", label="mean residual")
    ax.loglog(ns, bounds, "s--", label="Taylor bound")
    ax.set_xlabel("n")
    ax.set_ylabel("residual")
    ax.set_title("divergence identity residual")
    ax.legend()
    return _save(fig, store, "divergence.png")
