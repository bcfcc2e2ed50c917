from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracsrc import io
from fracsrc.config import load_config, parse_config
from fracsrc.errors import DomainError
from fracsrc.fractional_calculus import DeltaTrain, GridFunction, TemporalGrid, TemporalSource

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = sorted((ROOT / "configs").glob("*.json"))


def minimal(**extra):
    d = {"operator": {"L": 1.0, "n": 19}, "alpha": 0.5, "beta": 0.75, "grid": {"T": 1.0, "n_steps": 21}}
    d.update(extra)
    return d


# {{{ serialization


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips_every_double(x):
    assert float(io.fmt(x)) == x


def test_fmt_nonfinite():
    assert [io.fmt(v) for v in (np.inf, -np.inf, np.nan)] == ["inf", "-inf", "nan"]


def test_csv_round_trip():
    t = np.linspace(0, 1, 7)
    v = np.exp(-t) / 3
    cols = io.read_csv(io.csv_text(["t", "value"], [t, v]))
    assert cols["t"].tobytes() == t.tobytes()
    assert cols["value"].tobytes() == v.tobytes()


def test_csv_rejects_ragged_and_text():
    with pytest.raises(DomainError):
        io.csv_text(["a", "b"], [np.zeros(2), np.zeros(3)])
    with pytest.raises(DomainError):
        io.read_csv("t,value\n0,x\n")
    with pytest.raises(DomainError):
        io.read_csv("")


def test_grid_function_csv_round_trip_and_grid_check():
    grid = TemporalGrid(2.0, 11)
    g = GridFunction(grid, np.sin(grid.nodes))
    back = io.grid_function_from_csv(io.grid_function_csv(g))
    assert back.grid == grid and back.values.tobytes() == g.values.tobytes()
    with pytest.raises(DomainError):
        io.grid_function_from_csv(io.grid_function_csv(g), TemporalGrid(1.0, 11))


def test_dumps_is_sorted_and_compact():
    text = io.dumps({"b": 1, "a": [0.1, True, None], "c": np.float64(2.5)})
    assert text == '{"a":[0.10000000000000001,true,null],"b":1,"c":2.5}\n'
    assert json.loads(text)["c"] == 2.5


def test_dumps_nonfinite_as_strings():
    d = json.loads(io.dumps({"x": np.inf, "y": np.nan}))
    assert d == {"x": "inf", "y": "nan"}


def test_dumps_rejects_unknown_types():
    with pytest.raises(TypeError):
        io.dumps({"x": object()})


def test_temporal_source_json_round_trip():
    grid = TemporalGrid(1.0, 5)
    src = TemporalSource(GridFunction(grid, np.linspace(0, 1, 5) / 3), DeltaTrain.from_pairs([(0.5, 2.0), (0.25, -1.0)]))
    back = io.temporal_source_from_json(io.temporal_source_json(src), grid)
    assert back.atoms == src.atoms
    assert back.regular.values.tobytes() == src.regular.values.tobytes()
    atomic = TemporalSource(atoms=DeltaTrain.from_pairs([(0.5, 1.0)]))
    assert io.temporal_source_from_json(io.temporal_source_json(atomic), grid).kind == "atomic"
    with pytest.raises(DomainError):
        io.temporal_source_from_json("{not json", grid)


# }}}


# {{{ configs


def test_minimal_config_defaults(tmp_path):
    cfg = parse_config(minimal(), base=tmp_path)
    assert cfg.frac.alpha == 0.5 and cfg.frac.beta == 0.75
    assert cfg.observation.kind == "subdomain" and cfg.noise == 0.0 and cfg.seed == 0
    assert cfg.output_dir == tmp_path / "out"


def test_unknown_key_rejected():
    with pytest.raises(DomainError, match="unknown config keys"):
        parse_config(minimal(bogus=1))


@pytest.mark.parametrize(
    "alpha,beta,needle",
    [(0.8, 0.75, "alpha <= beta"), (0.3, 0.4, "beta > 1/2")],
)
def test_chain_violation_names_inequality(alpha, beta, needle):
    with pytest.raises(DomainError, match="parameter chain violated") as exc:
        parse_config(minimal(alpha=alpha, beta=beta))
    assert needle in str(exc.value)


@pytest.mark.parametrize(
    "extra",
    [
        {"seed": -1},
        {"seed": 1.5},
        {"seed": True},
        {"noise": -0.1},
        {"noise": "a lot"},
        {"oracle_factor": 0},
        {"observation": {"type": "point"}},
        {"observation": {"type": "line"}},
        {"source": {"atoms": [[2.0, 1.0]]}},
        {"source": {"atoms": [[0.5]]}},
        {"f": [1.0, 2.0]},
    ],
)
def test_bad_values_rejected(extra):
    with pytest.raises(DomainError):
        parse_config(minimal(**extra))


def test_load_config_errors(tmp_path):
    with pytest.raises(DomainError, match="cannot read"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{", encoding="utf-8")
    with pytest.raises(DomainError, match="not valid JSON"):
        load_config(bad)


def test_relative_paths_resolve_against_config(tmp_path):
    p = tmp_path / "sub" / "c.json"
    p.parent.mkdir()
    p.write_text(json.dumps(minimal(output_dir="../res", data="d.csv")), encoding="utf-8")
    cfg = load_config(p)
    assert cfg.output_dir == tmp_path / "res"
    assert cfg.data == p.parent / "d.csv"


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    schema = json.loads((ROOT / "docs" / "config_schema.json").read_text(encoding="utf-8"))
    data = json.loads(path.read_text(encoding="utf-8"))
    jsonschema.validate(data, schema)
    load_config(path)


def test_schema_and_parser_agree_on_keys():
    schema = json.loads((ROOT / "docs" / "config_schema.json").read_text(encoding="utf-8"))
    from fracsrc.config import _TOP_KEYS

    assert set(schema["properties"]) == _TOP_KEYS


def test_sampled_f_and_source(tmp_path):
    f = list(np.linspace(1, 2, 19))
    reg = list(np.ones(21))
    cfg = parse_config(minimal(f=f, source={"regular": reg}))
    np.testing.assert_array_equal(cfg.f_values, f)
    assert cfg.temporal_source().kind == "regular"


# }}}
