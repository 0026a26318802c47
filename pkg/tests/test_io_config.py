import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mmvsar.config import (CONFIG_SCHEMA, DEFAULTS, ConfigError, config_from_dict,
                           load_config, merge_defaults)
from mmvsar.io import (format_complex, parse_complex, read_complex_csv, to_jsonable,
                       write_complex_csv, write_json, write_table_csv)

finite = st.floats(allow_nan=False, allow_infinity=False)


@given(re=finite, im=finite)
def test_complex_text_round_trip(re, im):
    z = complex(re, im)
    assert parse_complex(format_complex(z)) == z


@given(seed=st.integers(0, 2 ** 31 - 1), shape=st.tuples(st.integers(1, 6), st.integers(1, 6)))
def test_complex_csv_round_trip(tmp_path_factory, seed, shape):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal(shape) * 10.0 ** rng.integers(-12, 12, shape) + 1j * rng.standard_normal(shape)
    path = tmp_path_factory.mktemp("csv") / "m.csv"
    write_complex_csv(path, M, header=["config_hash=abc", "seed=1"])
    np.testing.assert_array_equal(read_complex_csv(path), M)


def test_complex_csv_layout(tmp_path):
    path = write_complex_csv(tmp_path / "m.csv", np.array([[1 + 2j, 0.5], [-1j, 3]]),
                             header=["seed=0"])
    assert path.read_text() == "# seed=0\n1.0,2.0;0.5,0.0\n-0.0,-1.0;3.0,0.0\n"
    (tmp_path / "bad.csv").write_text("1,0;2,0\n1,0\n")
    with pytest.raises(ValueError):
        read_complex_csv(tmp_path / "bad.csv")


def test_table_csv(tmp_path):
    path = write_table_csv(tmp_path / "t.csv", ["a", "b", "c"],
                           [(1, 0.1, True), (np.int64(2), np.float64(1e-20), False)],
                           header=["kind=x"])
    assert path.read_text() == "# kind=x\na,b,c\n1,0.1,true\n2,1e-20,false\n"


def test_jsonable_conversions(tmp_path):
    from dataclasses import dataclass

    @dataclass
    class R:
        x: float
        z: complex

    obj = {"a": np.arange(3), "b": np.float64(np.inf), "c": R(1.0, 1 + 2j), 3: (np.bool_(1),)}
    out = to_jsonable(obj)
    assert out == {"a": [0, 1, 2], "b": "inf", "c": {"x": 1.0, "z": [1.0, 2.0]}, "3": [True]}
    path = write_json(tmp_path / "s.json", obj)
    assert json.loads(path.read_text()) == out


def _minimal(**over):
    cfg = {"schema": 1, "experiment": {"kind": "imaging-comparison"}}
    cfg.update(over)
    return cfg


def test_defaults_filled():
    cfg = config_from_dict(_minimal())
    assert cfg["geometry"]["A"] == 1500.0
    assert cfg["grid"]["spacingUnits"] == 0.25
    assert cfg["geometry"]["includeEndpoint"] is True
    assert cfg.kind == "imaging-comparison" and cfg.seed == 0


def test_merge_is_deep_and_replaces_lists():
    out = merge_defaults({"geometry": {"A": 1000.0}, "experiment": {"supportSizes": [4]}})
    assert out["geometry"]["A"] == 1000.0 and out["geometry"]["h"] == DEFAULTS["geometry"]["h"]
    assert out["experiment"]["supportSizes"] == [4]
    assert DEFAULTS["geometry"]["A"] == 1500.0


def test_hash_ignores_seed_but_not_content():
    a = config_from_dict(_minimal(seed=0))
    b = config_from_dict(_minimal(seed=5))
    c = config_from_dict(_minimal(grid={"spacingUnits": 0.5}))
    assert a.hash == b.hash != c.hash
    assert len(a.hash) == 16
    assert a.with_seed(9).seed == 9 and a.with_seed(9).hash == a.hash
    assert a.with_seed(None) is a


@pytest.mark.parametrize("bad", [
    {"schema": 2, "experiment": {"kind": "imaging-comparison"}},
    {"schema": 1},
    {"schema": 1, "experiment": {"kind": "movie"}},
    _minimal(geometry={"A": -1}),
    _minimal(geometry={"wingspan": 3}),
    _minimal(segmentation={"a": 2000.0}),
    _minimal(grid={"extentUnits": 1.0, "spacingUnits": 2.0}),
    _minimal(solver={"epsilonPolicy": "sigma"}),
    _minimal(sensing={"phaseMode": "linearized", "reflectivitySampling": "antenna"}),
    _minimal(experiment={"kind": "bound-suite", "spacingUnits": [3.0, 1.0]}),
    _minimal(scene={"scatterers": [{"amplitude": 1}]}),
    _minimal(seed=-1),
])
def test_schema_violations(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    (tmp_path / "broken.json").write_text("{")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "broken.json")
    (tmp_path / "list.json").write_text("[]")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "list.json")


def test_shipped_configs_validate():
    from pathlib import Path
    root = Path(__file__).resolve().parents[1] / "configs"
    files = sorted(root.glob("*.json"))
    assert len(files) >= 6
    for f in files:
        assert load_config(f).source == str(f)


def test_schema_is_strict():
    assert CONFIG_SCHEMA["additionalProperties"] is False
