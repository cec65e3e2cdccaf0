import json
import os
from pathlib import Path

import pytest

from fpplab.cli import (
    EXIT_CONFIG,
    EXIT_EMPTY_TERMINAL,
    EXIT_OK,
    main,
)
from fpplab.store import ResultStore


SQUARE_DOMAIN = {
    "d": 2,
    "body": {"type": "boxes", "data": [{"lo": ["0", "0"], "hi": ["1", "1"]}]},
    "gamma1": [{"type": "box", "lo": ["-0.25", "0"], "hi": ["0", "1"]}],
    "gamma2": [{"type": "box", "lo": ["1", "0"], "hi": ["1.25", "1"]}],
}


def write_config(tmp_path, name, cfg, domain=SQUARE_DOMAIN):
    dom_path = tmp_path / "domain.json"
    dom_path.write_text(json.dumps(domain))
    cfg = dict(cfg)
    cfg.setdefault("domain", "domain.json")
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def test_lln_deterministic_constant(tmp_path):
    cfg = write_config(
        tmp_path, "lln.json",
        {
            "kind": "lln",
            "law": {"type": "constant", "value": "1"},
            "n_list": [4, 8],
            "replicates": 1,
            "master_seed": 1,
        },
    )
    out = tmp_path / "out"
    assert main(["lln", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    store = ResultStore(out)
    header, rows = store.read_csv("results.csv")
    i = header.index("phi_rescaled")
    i_n = header.index("n")
    for row in rows:
        n = int(row[i_n])
        assert float(row[i]) == (n + 1) / n


def test_missing_config_is_config_error(tmp_path):
    assert main(["lln", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_missing_domain_file_is_config_error(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "kind": "lln", "domain": "missing.json",
        "law": {"type": "constant", "value": "1"},
        "n_list": [2], "replicates": 1, "master_seed": 0,
    }))
    out = tmp_path / "out"
    assert main(["lln", "--config", str(cfg), "--out", str(out)]) == EXIT_CONFIG
    assert not (out / "results.csv").exists()


def test_empty_terminal_exit_code(tmp_path):
    domain = {
        "d": 2,
        "body": {"type": "boxes", "data": [{"lo": ["0", "0"], "hi": ["1", "1"]}]},
        "gamma1": [{"type": "box", "lo": ["0.4", "0.4"], "hi": ["0.6", "0.6"]}],
        "gamma2": [{"type": "box", "lo": ["1", "0"], "hi": ["1.25", "1"]}],
    }
    cfg = write_config(
        tmp_path, "lln.json",
        {
            "kind": "lln",
            "law": {"type": "constant", "value": "1"},
            "n_list": [4],
            "replicates": 1,
            "master_seed": 1,
        },
        domain=domain,
    )
    out = tmp_path / "out"
    assert main(["lln", "--config", str(cfg), "--out", str(out)]) == EXIT_EMPTY_TERMINAL


def test_nu_run_and_determinism(tmp_path):
    cfg = write_config(
        tmp_path, "nu.json",
        {
            "kind": "nu",
            "law": {"type": "constant", "value": "1"},
            "n_list": [],
            "master_seed": 5,
            "nu_table": {
                "directions": [[1, 0], [1, 1]],
                "side_lengths": ["1"],
                "height": "0.5",
                "n_list": [4, 8],
                "replicates": 1,
            },
        },
    )
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["nu", "--config", str(cfg), "--out", str(out1)]) == EXIT_OK
    assert main(["nu", "--config", str(cfg), "--out", str(out2)]) == EXIT_OK
    assert (out1 / "nu_estimates.csv").read_bytes() == (
        out2 / "nu_estimates.csv"
    ).read_bytes()
    table = json.loads((out1 / "nu_table.json").read_text())
    assert table["hypotheses"]["nu_positive_expected"] == "yes"


def test_threads_byte_identical(tmp_path):
    base = {
        "kind": "lln",
        "law": {"type": "uniform", "high": "1"},
        "n_list": [4, 8],
        "replicates": 3,
        "master_seed": 7,
    }
    cfg = write_config(tmp_path, "lln.json", base)
    outs = []
    for threads in (1, 3):
        out = tmp_path / f"out_t{threads}"
        code = main([
            "lln", "--config", str(cfg), "--out", str(out),
            "--threads", str(threads),
        ])
        assert code == EXIT_OK
        outs.append((out / "results.csv").read_bytes())
    assert outs[0] == outs[1]


def test_mincut_run_export_and_report(tmp_path):
    cfg = write_config(
        tmp_path, "mincut.json",
        {
            "kind": "mincut",
            "law": {"type": "constant", "value": "1"},
            "n_list": [4],
            "replicates": 1,
            "master_seed": 1,
        },
    )
    out = tmp_path / "out"
    assert main(["mincut", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    store = ResultStore(out)
    # five plaquettes forming a vertical interface
    plaq = json.loads((out / "geometry" / "plaquettes_n4_r0.json").read_text())
    assert len(plaq) == 5
    assert len({p["center"][0] for p in plaq}) == 1
    # export csv and json contain identical records
    assert main(["export", "--store", str(out), "--what", "cutset-plaquettes",
                 "--format", "csv"]) == EXIT_OK
    assert main(["export", "--store", str(out), "--what", "cutset-plaquettes",
                 "--format", "json"]) == EXIT_OK
    header, rows = store.read_csv("export/plaquettes_n4_r0.csv")
    recs = json.loads((out / "export" / "plaquettes_n4_r0.json").read_text())
    assert len(rows) == len(recs) == 5
    for row, rec in zip(rows, recs):
        assert [float(row[0]), float(row[1])] == rec["center"]
        assert int(row[2]) == rec["axis"]
        assert float(row[3]) == rec["side"]
    # figures render
    assert main(["report", "--store", str(out)]) == EXIT_OK
    assert (out / "figures" / "cutset_plaquettes.png").exists()
    assert (out / "figures" / "stream_field.png").exists()


def test_cutconv_run_with_reference(tmp_path):
    ref = tmp_path / "ref.json"
    ref.write_text(json.dumps(
        {"boxes": [{"lo": ["0", "0"], "hi": ["0.5", "1"]}]}
    ))
    cfg = write_config(
        tmp_path, "cc.json",
        {
            "kind": "cutconv",
            "law": {"type": "constant", "value": "1"},
            "n_list": [4, 8],
            "replicates": 1,
            "master_seed": 1,
            "reference_set": "ref.json",
        },
    )
    out = tmp_path / "out"
    assert main(["cutconv", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    store = ResultStore(out)
    header, rows = store.read_csv("results.csv")
    i = header.index("dist_RE_E")
    j = header.index("boundary_bound")
    for row in rows:
        assert float(row[i]) <= float(row[j])
    assert main(["report", "--store", str(out)]) == EXIT_OK
    assert (out / "figures" / "convergence.png").exists()


def test_divergence_run(tmp_path):
    cfg = write_config(
        tmp_path, "div.json",
        {
            "kind": "divergence",
            "law": {"type": "uniform", "high": "1"},
            "n_list": [4, 8],
            "replicates": 3,
            "master_seed": 2,
            "test_function": {"center": [0.5, 0.5], "radius": 0.45},
        },
    )
    out = tmp_path / "out"
    assert main(["divergence", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    store = ResultStore(out)
    header, rows = store.read_csv("divergence.csv")
    i_r = header.index("residual")
    i_b = header.index("bound")
    for row in rows:
        assert float(row[i_r]) <= float(row[i_b])
    assert main(["report", "--store", str(out)]) == EXIT_OK
    assert (out / "figures" / "divergence.png").exists()


def test_atomic_write_leaves_no_partials(tmp_path):
    store = ResultStore(tmp_path / "s")
    store.write_csv("a.csv", ["x"], [[1], [2]])
    leftovers = [p for p in (tmp_path / "s").rglob("*.tmp-*")]
    assert leftovers == []

    class Boom:
        def __str__(self):
            raise RuntimeError("mid-serialization failure")

    with pytest.raises(RuntimeError):
        store.write_csv("b.csv", ["x"], [[Boom()]])
    assert not (tmp_path / "s" / "b.csv").exists()


def test_out_root_env_var(tmp_path, monkeypatch):
    from fpplab.experiments import run as run_config

    monkeypatch.setenv("FPPLAB_OUT_ROOT", str(tmp_path / "root"))
    config = {
        "kind": "lln",
        "domain": SQUARE_DOMAIN,
        "law": {"type": "constant", "value": "1"},
        "n_list": [2],
        "replicates": 1,
        "master_seed": 0,
        "out_dir": "exp1",
    }
    store = run_config(config)
    assert store.root == tmp_path / "root" / "exp1"
    assert (store.root / "results.csv").exists()


def test_kind_mismatch_is_config_error(tmp_path):
    cfg = write_config(
        tmp_path, "lln.json",
        {
            "kind": "lln",
            "law": {"type": "constant", "value": "1"},
            "n_list": [4],
            "replicates": 1,
            "master_seed": 1,
        },
    )
    assert main(["maxflow", "--config", str(cfg)]) == EXIT_CONFIG
