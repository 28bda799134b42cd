import json

import numpy as np
import pytest

from oligofrag.cli import main
from oligofrag.io import (CacheError, dumps_json, format_number, load_arrays, load_solved,
                          read_csv, save_arrays, save_solved, write_csv)
from oligofrag.params import ModelError


def test_array_round_trip(tmp_path):
    arrs = {"a": np.arange(12.0).reshape(3, 4), "b": np.array([1, 2, 3]),
            "c": np.array([True, False])}
    save_arrays(tmp_path / "x.cache", {"note": "hi"}, arrs)
    head, back = load_arrays(tmp_path / "x.cache")
    assert head["note"] == "hi"
    for k in arrs:
        np.testing.assert_array_equal(back[k], arrs[k].astype(back[k].dtype))
    assert back["a"].shape == (3, 4)


def test_truncation_reports_offsets(tmp_path):
    f = tmp_path / "x.cache"
    save_arrays(f, {}, {"a": np.arange(100.0)})
    data = f.read_bytes()
    for cut in (5, 30, len(data) - 400, len(data) - 1):
        f.write_bytes(data[:cut])
        with pytest.raises(CacheError) as e:
            load_arrays(f)
        assert str(cut) in str(e.value)
    f.write_bytes(data[:len(data) - 400])
    with pytest.raises(CacheError, match="inside array 'a'"):
        load_arrays(f)
    f.write_bytes(data[:-1])
    with pytest.raises(CacheError, match="checksum"):
        load_arrays(f)


def test_corruption_and_magic(tmp_path):
    f = tmp_path / "x.cache"
    save_arrays(f, {}, {"a": np.arange(100.0)})
    data = bytearray(f.read_bytes())
    data[-100] ^= 0xFF
    f.write_bytes(bytes(data))
    with pytest.raises(CacheError, match="checksum mismatch"):
        load_arrays(f)
    f.write_bytes(b"NOTACACHE" + bytes(data[9:]))
    with pytest.raises(CacheError, match="magic"):
        load_arrays(f)
    with pytest.raises(CacheError, match="does not exist"):
        load_arrays(tmp_path / "missing.cache")


def test_solved_round_trip_and_key(tmp_path, smoke_2007):
    f = tmp_path / "s.cache"
    save_solved(f, smoke_2007, "k" * 64)
    back = load_solved(f, "k" * 64)
    np.testing.assert_array_equal(back.policy.s, smoke_2007.policy.s)
    np.testing.assert_array_equal(back.grid.Y, smoke_2007.grid.Y)
    np.testing.assert_array_equal(back.chain.transition, smoke_2007.chain.transition)
    assert back.K_high == smoke_2007.K_high
    assert back.p == smoke_2007.p
    if smoke_2007.grid_ext is not None:
        np.testing.assert_array_equal(back.policy_ext.s, smoke_2007.policy_ext.s)
    with pytest.raises(CacheError, match="does not match"):
        load_solved(f, "j" * 64)


def test_non_finite_refused(tmp_path):
    with pytest.raises(ModelError):
        dumps_json({"x": float("nan")})
    with pytest.raises(ModelError):
        format_number(np.inf)
    with pytest.raises(ModelError):
        write_csv(tmp_path / "a.csv", {"x": np.array([1.0, np.nan])})


def test_csv_round_trip(tmp_path):
    x = np.array([0.1, 1 / 3, 1e-300, -2.5e10])
    write_csv(tmp_path / "a.csv", {"x": x, "n": np.arange(4)})
    rows = read_csv(tmp_path / "a.csv")
    np.testing.assert_array_equal([float(r["x"]) for r in rows], x)
    assert [r["n"] for r in rows] == ["0", "1", "2", "3"]


# ---------------------------------------------------------------------------
# command line


def _run(tmp_path, *args, out="out"):
    return main([*args, "--out", str(tmp_path / out)])


def test_toy_fragility(tmp_path, capsys):
    assert _run(tmp_path, "fragility", "--preset", "toy") == 0
    d = json.loads((tmp_path / "out" / "toy_fragility.json").read_text())
    assert len(d["steady_states"]) == 3
    assert d["n_stable"] == 2 and d["n_unstable"] == 1
    assert len(d["chi"]) == 1
    assert d["chi"][0]["chi"] > 0
    man = json.loads((tmp_path / "out" / "toy_fragility_s0.manifest.json").read_text())
    assert man["outputs"][0]["name"] == "toy_fragility.json"
    assert "wall_clock" not in json.dumps(man)


def test_usage_errors_exit_2(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        _run(tmp_path, "fragility", "--preset", "toy", "--bogus")
    assert e.value.code == 2
    assert not (tmp_path / "out").exists()
    with pytest.raises(SystemExit) as e:
        main(["no-such-command"])
    assert e.value.code == 2
    assert _run(tmp_path, "simulate", "--preset", "toy") == 2
    assert _run(tmp_path, "fragility") == 2
    assert _run(tmp_path, "fragility", "--preset", "toy", "--set", "beta") == 2
    assert not (tmp_path / "out").exists()


def test_model_errors_exit_1_with_json(tmp_path, capsys):
    capsys.readouterr()
    assert _run(tmp_path, "fragility", "--preset", "toy", "--set", "rho=1.5") == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] in ("ParamError", "ModelError")
    assert _run(tmp_path, "simulate", "--preset", "y2007", "--scale", "smoke", "--cache",
                str(tmp_path / "none.cache")) == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "does not exist" in err["message"]


@pytest.fixture(scope="module")
def solved_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["solve-grid", "--preset", "y2007", "--scale", "smoke", "--out", str(d)]) == 0
    return d


def test_cache_hit_on_rerun(solved_dir, capsys):
    capsys.readouterr()
    before = sorted(p.name for p in solved_dir.iterdir())
    assert main(["solve-grid", "--preset", "y2007", "--scale", "smoke",
                 "--out", str(solved_dir)]) == 0
    assert "cache hit" in capsys.readouterr().out
    assert sorted(p.name for p in solved_dir.iterdir()) == before
    summary = json.loads((solved_dir / "y2007_solve_grid.json").read_text())
    assert summary["grid_shape"] == [20, 5]


def test_corrupt_cache_is_an_error(solved_dir, tmp_path):
    cache = next(solved_dir.glob("*.cache"))
    bad = tmp_path / "bad.cache"
    bad.write_bytes(cache.read_bytes()[:-7])
    rc = main(["irf", "--preset", "y2007", "--scale", "smoke", "--cache", str(bad),
               "--out", str(tmp_path / "o")])
    assert rc == 1


@pytest.mark.parametrize("cmd", [["simulate", "--T", "50", "--reps", "3"],
                                 ["irf", "--shock", "large", "--horizon", "30"],
                                 ["recessions", "--reps", "200"]])
def test_outputs_identical_across_threads(solved_dir, tmp_path, cmd):
    outs = []
    for th in ("1", "2"):
        o = tmp_path / f"t{th}"
        assert main([*cmd, "--preset", "y2007", "--scale", "smoke", "--threads", th,
                     "--seed", "7", "--out", str(o),
                     "--cache", str(next(solved_dir.glob("*.cache")))]) == 0
        outs.append({p.name: p.read_bytes() for p in o.iterdir()
                     if not p.name.endswith(".runtime.txt")})
    assert outs[0].keys() == outs[1].keys()
    for k in outs[0]:
        assert outs[0][k] == outs[1][k], k


def test_simulate_csv_columns(solved_dir, tmp_path):
    o = tmp_path / "sim"
    assert main(["simulate", "--preset", "y2007", "--scale", "smoke", "--T", "20", "--out", str(o),
                 "--cache", str(next(solved_dir.glob("*.cache")))]) == 0
    rows = read_csv(o / "y2007_simulate_s0.csv")
    assert len(rows) == 20
    assert {"rep", "t", "K", "Y", "R", "W", "L", "aggregate_markup"} <= set(rows[0])


def test_moments_fields(tmp_path):
    assert _run(tmp_path, "moments", "--preset", "y1990", "--scale", "smoke") == 0
    d = json.loads((tmp_path / "out" / "y1990_moments.json").read_text())
    for k in ("sales_weighted_markup", "cost_weighted_markup", "std_log_revenue",
              "fixed_to_total_cost_ratio", "emp_share_concentrated", "hhi_percentiles",
              "firms_per_concentrated_market"):
        assert k in d
    assert d["n_markets"] == 200
