import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from liouville import io
from liouville._validation import ConfigurationError, RangeError
from liouville.clock import clock_limit
from liouville.config import EXPERIMENTS, ExperimentConfig
from liouville.experiments import PRESETS, preset
from liouville.field import DomainSpec, build_gff, rooted_shift
from liouville.multifractal import ExponentEstimate
from liouville.path import sample_path
from liouville.seeding import child_seed, child_seeds, map_replicas, resolve_workers


@pytest.fixture(scope="module")
def small_pair():
    f = build_gff(DomainSpec("unit-square", 64), seed=11)
    p = sample_path(1e-4, seed=12)
    return f, p


def test_field_round_trip(tmp_path, small_pair):
    f, _ = small_pair
    g = rooted_shift(f, (0.1, -0.2), 0.5)
    for field in (f, g):
        out = io.write_field(field, tmp_path / "f.lqgf")
        back = io.read_field(out)
        assert np.array_equal(back.values, field.values)
        assert back.kind == field.kind and back.seed == field.seed
        assert back.domain.n == field.domain.n and back.root == field.root
    assert (tmp_path / "f.lqgf").read_bytes()[:4] == io.FIELD_MAGIC


def test_field_file_rejects_bad_magic(tmp_path, small_pair):
    out = io.write_field(small_pair[0], tmp_path / "f.lqgf")
    raw = bytearray(out.read_bytes())
    raw[:4] = b"XXXX"
    out.write_bytes(bytes(raw))
    with pytest.raises(ConfigurationError):
        io.read_field(out)


def test_path_round_trip(tmp_path, small_pair):
    _, p = small_pair
    back = io.read_path(io.write_path(p, tmp_path / "p.lqgp"))
    assert np.array_equal(back.positions, p.positions)
    assert back.tau == p.tau and back.tau_index == p.tau_index and back.dt == p.dt
    with pytest.raises(ConfigurationError):
        io.read_field(tmp_path / "p.lqgp")


def test_clock_csv_columns(tmp_path, small_pair):
    f, p = small_pair
    F = clock_limit(p, f, 0.5, (0.2, 0.1))
    rows = io.read_rows_csv(io.write_clock_csv(F, tmp_path / "clock.csv"))
    assert list(rows[0]) == ["t", "F_eps0.2", "F_eps0.1", "F_limit"]
    assert len(rows) == len(F.times)
    assert float(rows[-1]["F_limit"]) == F.values[-1]


def test_estimates_csv_exact_floats(tmp_path):
    est = ExponentEstimate(1 / 3, 0.01, (0.5, 0.25), 0.99, None, "test")
    row = io.estimate_row("regularity", 1.0, 1.0, est, 7)
    rows = io.read_rows_csv(io.write_estimates_csv([row], tmp_path / "e.csv"))
    assert tuple(rows[0]) == io.ESTIMATE_COLUMNS
    assert float(rows[0]["value"]) == 1 / 3
    assert rows[0]["scales"] == "0.5;0.25"


def test_manifest_serialises_numpy(tmp_path):
    man = io.manifest(ExperimentConfig("field"), seeds={"master": np.int64(3)}, x=np.float64(0.5),
                      a=np.arange(3), flag=np.bool_(True))
    back = io.read_json(io.write_json(man, tmp_path / "m.json"))
    assert back["seeds"]["master"] == 3 and back["a"] == [0, 1, 2] and back["flag"] is True
    assert back["versions"]["numpy"] == np.__version__


# ---------------------------------------------------------------------------
# config


@settings(max_examples=100, deadline=None)
@given(experiment=st.sampled_from(EXPERIMENTS), alpha=st.floats(0, 2), gamma=st.floats(0, 2),
       n=st.integers(64, 4096), dt=st.floats(1e-9, 1.0),
       eps=st.lists(st.floats(1e-4, 1.0), min_size=1, max_size=4),
       replicas=st.integers(1, 10**5), seed=st.integers(0, 2**63 - 1),
       shape=st.sampled_from(["unit-square", "unit-disc"]),
       options=st.dictionaries(st.text(min_size=1, max_size=5),
                               st.one_of(st.integers(), st.floats(allow_nan=False), st.text(max_size=5))))
def test_config_json_round_trip(experiment, alpha, gamma, n, dt, eps, replicas, seed, shape, options):
    c = ExperimentConfig(experiment, alpha, gamma, DomainSpec(shape, n), dt, tuple(eps), replicas, seed,
                         options=options)
    back = ExperimentConfig.from_json(c.to_json())
    assert back == c
    assert json.loads(back.to_json()) == json.loads(c.to_json())


def test_config_save_load(tmp_path):
    c = preset("thick-dimension", seed=5)
    c.save(tmp_path / "c.json")
    assert ExperimentConfig.load(tmp_path / "c.json") == c


@pytest.mark.parametrize("kwargs, err", [
    ({"experiment": "nope"}, ConfigurationError),
    ({"experiment": "field", "alpha": 2.5}, RangeError),
    ({"experiment": "field", "gamma": -0.1}, RangeError),
    ({"experiment": "field", "dt": 0}, ConfigurationError),
    ({"experiment": "field", "eps_ladder": ()}, ConfigurationError),
    ({"experiment": "field", "eps_ladder": (1.5,)}, ConfigurationError),
    ({"experiment": "field", "replicas": 0}, ConfigurationError),
    ({"experiment": "field", "replicas": 2.5}, ConfigurationError),
    ({"experiment": "field", "seed": -1}, ConfigurationError),
])
def test_config_validation(kwargs, err):
    with pytest.raises(err):
        ExperimentConfig(**kwargs)


def test_presets_build_and_merge_options():
    for name in PRESETS:
        assert preset(name).experiment == name
    c = preset("thick-dimension", options={"tol": 0.2}, replicas=3)
    assert c.option("tol") == 0.2 and c.option("stride") == 16 and c.replicas == 3
    with pytest.raises(ConfigurationError):
        preset("field")


# ---------------------------------------------------------------------------
# seeding


def test_child_seed_is_pure_and_stream_separated():
    assert child_seed(1, "a", 3) == child_seed(1, "a", 3)
    seeds = child_seeds(1, "a", 50) + child_seeds(1, "b", 50) + child_seeds(2, "a", 50)
    assert len(set(seeds)) == 150
    assert all(0 <= s < 2**63 for s in seeds)


def _square(x):
    return x * x


def test_map_replicas_order_and_workers(monkeypatch):
    assert map_replicas(_square, range(10), workers=2) == [x * x for x in range(10)]
    monkeypatch.setenv("LQG_WORKERS", "3")
    assert resolve_workers() == 3 and resolve_workers(1) == 1
    monkeypatch.delenv("LQG_WORKERS")
    assert resolve_workers() == 1
