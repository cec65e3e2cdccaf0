"""Experiment orchestration: configs in, result stores out.

A config document names an experiment kind, a domain file, a capacity law, a
scale list, a replicate count and a master seed.  Runs are reproducible from
the stored config snapshot: all randomness derives from the seed through the
counter-based sampler, and result rows are reduced in deterministic key order
whatever the thread count.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

from .capacity import LawSpec, check_hypotheses, sample
from .continuum import (
    CSV_HEADER,
    CandidateSet,
    cut_convergence,
    lln_experiment,
)
from .cutset import cut_region, min_cutset, plaquettes
from .cylinders import nu_table
from .geometry import Box, DomainSpec, Halfspace, Polytope, RegionUnion
from .lattice import discretize
from .maxflow import max_flow
from .store import ResultStore
from .streams import cubic_bump, divergence_residual

__all__ = [
    "ConfigError",
    "load_domain",
    "load_config",
    "run",
    "EXPERIMENT_KINDS",
]

EXPERIMENT_KINDS = ("maxflow", "mincut", "nu", "lln", "cutconv", "divergence")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Document parsing
# ---------------------------------------------------------------------------


def _parse_region(doc: dict):
    t = doc.get("type")
    if t == "box":
        return Box.make(doc["lo"], doc["hi"])
    if t == "halfspace":
        return Halfspace.make(doc["a"], doc["b"])
    if t == "polytope":
        return Polytope.make(doc["A"], doc["b"])
    if t == "union":
        return RegionUnion.make([_parse_region(p) for p in doc["parts"]])
    raise ConfigError(f"unknown region type {t!r}")


def load_domain(doc_or_path) -> DomainSpec:
    """Domain from a JSON document: {d, body:{type,data}, gamma1, gamma2}."""
    if isinstance(doc_or_path, (str, Path)):
        try:
            with open(doc_or_path) as fh:
                doc = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"domain file not found: {doc_or_path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"domain file is not valid JSON: {exc}") from exc
    else:
        doc = doc_or_path
    try:
        d = int(doc["d"])
        body_doc = doc["body"]
        if body_doc["type"] == "boxes":
            body = [Box.make(b["lo"], b["hi"]) for b in body_doc["data"]]
        elif body_doc["type"] == "polytope":
            body = Polytope.make(body_doc["A"], body_doc["b"])
        else:
            raise ConfigError(f"unknown body type {body_doc['type']!r}")
        gamma1 = [_parse_region(r) for r in doc.get("gamma1", [])]
        gamma2 = [_parse_region(r) for r in doc.get("gamma2", [])]
        return DomainSpec.make(d, body, gamma1, gamma2)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed domain document: {exc}") from exc


def _load_reference(doc_or_path, spec: DomainSpec) -> CandidateSet:
    if isinstance(doc_or_path, (str, Path)):
        try:
            with open(doc_or_path) as fh:
                doc = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"reference-set file not found: {doc_or_path}") from exc
    else:
        doc = doc_or_path
    boxes = [Box.make(b["lo"], b["hi"]) for b in doc["boxes"]]
    return CandidateSet.make(boxes, spec)


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if cfg.get("kind") not in EXPERIMENT_KINDS:
        raise ConfigError(
            f"kind must be one of {EXPERIMENT_KINDS}, got {cfg.get('kind')!r}"
        )
    if "master_seed" not in cfg:
        raise ConfigError("master_seed is required (no implicit entropy)")
    n_list = cfg.get("n_list", [])
    if cfg["kind"] != "nu" and (not n_list or list(n_list) != sorted(set(n_list))):
        raise ConfigError("n_list must be a strictly increasing list of scales")
    base = Path(path).parent
    for key in ("domain", "reference_set"):
        if isinstance(cfg.get(key), str) and not Path(cfg[key]).is_absolute():
            cfg[key] = str(base / cfg[key])
    return cfg


# ---------------------------------------------------------------------------
# Experiment drivers
# ---------------------------------------------------------------------------


def run(config: dict, out_dir=None, threads: "int | None" = None) -> ResultStore:
    """Dispatch an experiment config and persist all outputs.

    Relative output directories are rooted under $FPPLAB_OUT_ROOT when that
    variable is set.
    """
    kind = config["kind"]
    law = LawSpec.from_config(config["law"])
    seed = int(config["master_seed"])
    threads = threads if threads is not None else int(config.get("threads", 1))
    out = Path(out_dir if out_dir is not None else config.get("out_dir", "out"))
    root = os.environ.get("FPPLAB_OUT_ROOT")
    if root and not out.is_absolute():
        out = Path(root) / out
    store = ResultStore(out)
    snapshot = dict(config)
    snapshot["threads"] = threads
    if isinstance(snapshot.get("domain"), dict):
        pass
    store.snapshot_config(snapshot)

    if kind == "nu":
        _run_nu(config, law, seed, store)
        return store

    spec = load_domain(config["domain"])
    if kind in ("maxflow", "mincut"):
        _run_instances(config, spec, law, seed, store, kind, threads)
    elif kind == "lln":
        _run_lln(config, spec, law, seed, store, threads)
    elif kind == "cutconv":
        _run_cutconv(config, spec, law, seed, store, threads)
    elif kind == "divergence":
        _run_divergence(config, spec, law, seed, store, threads)
    return store


def _grid(config):
    n_list = [int(n) for n in config["n_list"]]
    reps = int(config.get("replicates", 1))
    return [(n, r) for n in n_list for r in range(reps)]


def _map_jobs(jobs, fn, threads: int) -> dict:
    results = {}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = {key: pool.submit(fn, *key) for key in jobs}
            for key, fut in futs.items():
                results[key] = fut.result()
    else:
        for key in jobs:
            results[key] = fn(*key)
    return results


def _run_instances(config, spec, law, seed, store, kind, threads):
    mode = config.get("mode", "exact")

    def solve(n, rep):
        disc = discretize(spec, n)
        caps = sample(law, disc.network, seed, rep)
        stream, result = max_flow(disc, caps, mode=mode)
        cut = min_cutset(disc, caps, stream) if kind == "mincut" else None
        return disc, caps, stream, result, cut

    results = _map_jobs(_grid(config), solve, threads)

    rows = []
    timings = []
    for (n, rep) in sorted(results):
        disc, caps, stream, result, cut = results[(n, rep)]
        row = {
            "n": n,
            "seed": seed,
            "replicate": rep,
            **result.as_dict(),
        }
        timings.append((n, seed, rep, row.pop("runtime_ms")))
        if cut is not None:
            row["cut_capacity"] = float(cut.capacity)
            row["cut_card"] = cut.cardinality
        rows.append(row)
        axis, coords = disc.network.edge_keys()
        tag = f"n{n}_r{rep}"
        kd_header = [f"k_{i + 1}" for i in range(disc.d)]
        store.write_csv(
            f"stream_{tag}.csv",
            ["axis", *kd_header, "f"],
            (
                (int(axis[e]) + 1, *map(int, coords[e]), float(stream.flows[e]))
                for e in range(disc.network.num_edges)
            ),
        )
        store.write_json(
            f"flow_result_{tag}.json",
            {"seed": seed, "replicate": rep, **result.as_dict()},
        )
        if config.get("coarse_resolution"):
            from .streams import coarse_grain

            field = coarse_grain(stream, int(config["coarse_resolution"]), spec)
            store.write_csv(
                f"coarse_field_{tag}.csv",
                [*(f"b_{i + 1}" for i in range(disc.d)),
                 *(f"sigma_{i + 1}" for i in range(disc.d))],
                field.rows(),
            )
        if config.get("dump_capacities"):
            store.write_csv(
                f"capacities_{tag}.csv",
                ["axis", *kd_header, "t"],
                (
                    (int(axis[e]) + 1, *map(int, coords[e]), float(caps.value(e)))
                    for e in range(disc.network.num_edges)
                ),
            )
        if config.get("dump_vertex_classes"):
            store.write_csv(
                f"vertex_classes_{tag}.csv",
                ["class", *kd_header],
                disc.class_rows(),
            )
            store.write_csv(
                f"edges_{tag}.csv",
                ["axis", *kd_header],
                (
                    (int(axis[e]) + 1, *map(int, coords[e]))
                    for e in range(disc.network.num_edges)
                ),
            )
        if cut is not None:
            store.write_csv(
                f"cutset_{tag}.csv",
                ["axis", *kd_header, "t"],
                (
                    (int(a) + 1, *k, float(t))
                    for (a, *k, t) in cut.edge_rows()
                ),
            )
            plaq = [
                {
                    "center": [float(c) for c in center],
                    "axis": axis_ + 1,
                    "side": float(side),
                }
                for center, axis_, side in plaquettes(cut)
            ]
            store.write_json(f"geometry/plaquettes_{tag}.json", plaq)
            region = cut_region(cut, spec)
            centers = [[float(c) for c in pt] for pt in region.cube_centers()]
            store.write_json(
                f"geometry/region_{tag}.json",
                {"n": n, "cube_side": 1.0 / n, "centers": centers},
            )
    header = sorted({k for row in rows for k in row})
    store.write_csv(
        "results.csv", header, ([row.get(h, "") for h in header] for row in rows)
    )
    store.write_csv(
        "timings.csv", ["n", "seed", "replicate", "runtime_ms"], timings
    )
    store.write_json("summary.json", {"kind": kind, "rows": len(rows)})


def _nu_block(config):
    blk = config.get("nu_table", config)
    directions = [tuple(int(x) for x in v) for v in blk["directions"]]
    side_lengths = blk.get("side_lengths", ["1"])
    height = blk.get("height", "0.5")
    n_list = [int(n) for n in blk["n_list"]]
    reps = int(blk.get("replicates", 1))
    return directions, side_lengths, height, n_list, reps


def _run_nu(config, law, seed, store):
    directions, side_lengths, height, n_list, reps = _nu_block(config)
    table = nu_table(directions, side_lengths, height, n_list, reps, law, seed)
    d = len(directions[0])
    rows = []
    for e in table.entries:
        rows.extend(e.as_rows())
    store.write_csv(
        "nu_estimates.csv",
        [*(f"v_{i + 1}" for i in range(d)), "n", "mean", "stderr", "replicates"],
        rows,
    )
    payload = table.as_json()
    payload["hypotheses"] = check_hypotheses(law, d).as_dict()
    store.write_json("nu_table.json", payload)


def _run_lln(config, spec, law, seed, store, threads):
    F_ref = nu = None
    if config.get("reference_set") is not None:
        F_ref = _load_reference(config["reference_set"], spec)
    if config.get("nu_table") is not None:
        directions, side_lengths, height, n_list, reps = _nu_block(config)
        nu = nu_table(directions, side_lengths, height, n_list, reps, law, seed)
        store.write_json("nu_table.json", nu.as_json())
    report = lln_experiment(
        spec, law, [int(n) for n in config["n_list"]],
        int(config.get("replicates", 1)), seed,
        F_ref=F_ref, nu=nu, mode=config.get("mode", "exact"), threads=threads,
    )
    _write_report(store, report, "lln", config.get("record_runtimes", False))


def _run_cutconv(config, spec, law, seed, store, threads):
    if config.get("reference_set") is None:
        raise ConfigError("cutconv requires a reference_set")
    F_ref = _load_reference(config["reference_set"], spec)
    report = cut_convergence(
        spec, law, [int(n) for n in config["n_list"]], F_ref,
        int(config.get("replicates", 1)), seed,
        mode=config.get("mode", "exact"), threads=threads,
    )
    _write_report(store, report, "cutconv", config.get("record_runtimes", False))


def _write_report(store, report, kind, with_runtime=False):
    store.write_csv(
        "results.csv", CSV_HEADER,
        (r.as_csv_row(with_runtime) for r in report.rows),
    )
    store.write_csv(
        "timings.csv",
        ["n", "seed", "replicate", "runtime_ms"],
        ((r.n, r.seed, r.replicate, r.runtime_ms) for r in report.rows),
    )
    summary = {
        "kind": kind,
        "per_n": {str(n): stats for n, stats in report.summary.items()},
        "duality_violations": list(report.duality_violations),
    }
    if report.capa_ref is not None:
        summary["capa_ref"] = {
            "value": report.capa_ref.value,
            "stderr": report.capa_ref.stderr,
            "terms": report.capa_ref.terms,
        }
    store.write_json("summary.json", summary)


def _run_divergence(config, spec, law, seed, store, threads):
    mode = config.get("mode", "exact")
    blk = config.get("test_function", {})
    bump = cubic_bump(
        blk.get("center", [0.5, 0.5]),
        float(Fraction(str(blk.get("radius", "0.45")))),
        float(Fraction(str(blk.get("amplitude", "1")))),
    )

    def solve(n, rep):
        disc = discretize(spec, n)
        caps = sample(law, disc.network, seed, rep)
        stream, _ = max_flow(disc, caps, mode=mode)
        return divergence_residual(stream, bump, spec)

    results = _map_jobs(_grid(config), solve, threads)
    d = spec.d
    rows = []
    per_n: dict[int, list] = {}
    for (n, rep) in sorted(results):
        res = results[(n, rep)]
        rows.append(
            (n, seed, rep, *[repr(p) for p in res.lhs_parts],
             repr(res.rhs), repr(res.residual), repr(res.bound))
        )
        per_n.setdefault(n, []).append(res.residual)
    store.write_csv(
        "divergence.csv",
        ["n", "seed", "replicate", *(f"lhs_{i + 1}" for i in range(d)),
         "rhs", "residual", "bound"],
        rows,
    )
    means = {n: sum(v) / len(v) for n, v in per_n.items()}
    ratios = {}
    ns = sorted(means)
    for a, b in zip(ns, ns[1:]):
        if b == 2 * a and means[a] > 0:
            ratios[f"{a}->{b}"] = means[b] / means[a]
    store.write_json(
        "summary.json",
        {"kind": "divergence", "mean_residuals": {str(n): means[n] for n in ns},
         "halving_ratios": ratios, "k_bound": bump.k_bound},
    )


# ---------------------------------------------------------------------------
# Export of stored geometry
# ---------------------------------------------------------------------------


def export(store: ResultStore, what: str, fmt: str = "csv"):
    """Re-render stored geometry artifacts as CSV or JSON files."""
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown export format {fmt!r}")
    geo = store.root / "geometry"
    written = []
    if what == "cutset-plaquettes":
        files = sorted(geo.glob("plaquettes_*.json"))
        if not files:
            raise ConfigError("no plaquette artifacts in this store")
        for f in files:
            recs = json.loads(f.read_text())
            name = f.stem
            if fmt == "json":
                written.append(store.write_json(f"export/{name}.json", recs))
            else:
                d = len(recs[0]["center"]) if recs else 2
                written.append(store.write_csv(
                    f"export/{name}.csv",
                    [*(f"c_{i + 1}" for i in range(d)), "axis", "side"],
                    ((*r["center"], r["axis"], r["side"]) for r in recs),
                ))
    elif what == "regions":
        files = sorted(geo.glob("region_*.json"))
        if not files:
            raise ConfigError("no region artifacts in this store")
        for f in files:
            doc = json.loads(f.read_text())
            name = f.stem
            if fmt == "json":
                written.append(store.write_json(f"export/{name}.json", doc))
            else:
                d = len(doc["centers"][0]) if doc["centers"] else 2
                written.append(store.write_csv(
                    f"export/{name}.csv",
                    [*(f"c_{i + 1}" for i in range(d)), "side"],
                    ((*c, doc["cube_side"]) for c in doc["centers"]),
                ))
    elif what == "stream-field":
        files = sorted(store.root.glob("stream_*.csv"))
        if not files:
            raise ConfigError("no stream dumps in this store")
        for f in files:
            header, body = store.read_csv(f.name)
            if fmt == "csv":
                written.append(store.write_csv(f"export/{f.stem}.csv", header, body))
            else:
                recs = [dict(zip(header, row)) for row in body]
                written.append(store.write_json(f"export/{f.stem}.json", recs))
    else:
        raise ConfigError(f"unknown export artifact {what!r}")
    return written
