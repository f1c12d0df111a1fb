import io
import json

import numpy as np
import pytest

from strata.exceptions.model_exceptions import (
    InputDigestError,
    MissingArtifactError,
    RunLockedError,
)
from strata.models.manifest import RunManifest
from strata.renderers.csv_renderer import format_value, render_csv
from strata.renderers.json_renderer import render_json
from strata.repositories import RunDirectory
from strata.repositories.run_directory import file_digest
from strata.services.continuation import make_point


@pytest.mark.parametrize(
    "value, expected",
    [
        [None, ""],
        [True, "true"],
        [np.bool_(False), "false"],
        [0.5, "0.5"],
        [np.float64(-2.0), "-2.0"],
        [0.1 + 0.2, "0.30000000000000004"],
        [np.float64(1 / 3), "0.3333333333333333"],
        [float("nan"), "nan"],
        [float("-inf"), "-inf"],
        [np.int64(3), 3],
        ["a;b", "a;b"],
    ],
)
def test_format_value(value, expected):
    assert format_value(value) == expected


def test_render_csv():
    text = render_csv([{"a": 1, "b": 0.25}, {"a": 2, "b": None}]).getvalue()
    assert text == "a,b\n1,0.25\n2,\n"
    assert render_csv([]).getvalue() == ""


def test_render_json():
    document = json.loads(
        render_json(
            {"x": np.array([1.0, np.inf]), "n": np.int32(2), "ok": np.bool_(True)}
        )
    )
    assert document == {"n": 2, "ok": True, "x": [1.0, "inf"]}


def test_rendered_floats_read_back_exactly():
    rng = np.random.default_rng(3)
    values = rng.standard_normal(1000) * 10.0 ** rng.integers(-300, 300, 1000)
    rows = [{"v": v} for v in values]
    text = render_csv(rows).getvalue()
    np.testing.assert_array_equal(np.loadtxt(io.StringIO(text), skiprows=1), values)
    np.testing.assert_array_equal(json.loads(render_json(values)), values)


def _manifest(**kwargs) -> RunManifest:
    return RunManifest(
        config={}, strata_version="0", command="solve", started="now", **kwargs
    )


def test_manifest_roundtrip(tmp_path):
    run = RunDirectory(tmp_path)
    manifest = _manifest(output_digests={"b.csv": "2", "a.csv": "1"})
    run.write_manifest(manifest)
    assert run.has_manifest()
    loaded = run.read_manifest()
    assert loaded.outputs == ["a.csv", "b.csv"]
    assert loaded.output_digests == manifest.output_digests


def test_missing_manifest(tmp_path):
    with pytest.raises(MissingArtifactError):
        RunDirectory(tmp_path).read_manifest()


def test_lock(tmp_path):
    run = RunDirectory(tmp_path)
    with run.lock():
        with pytest.raises(RunLockedError):
            with RunDirectory(tmp_path).lock():
                pass
    # released on exit
    with run.lock():
        pass
    assert not (tmp_path / ".lock").exists()


def test_digests(tmp_path):
    run = RunDirectory(tmp_path)
    digest = run.write_json("spectrum.json", {"F_cr": 1.0})
    assert digest == file_digest(tmp_path / "spectrum.json")
    assert digest == run.digest("spectrum.json")
    manifest = _manifest(output_digests={"spectrum.json": digest})
    run.verify_outputs(manifest, ["spectrum.json"])
    (tmp_path / "spectrum.json").write_text("{}")
    with pytest.raises(InputDigestError):
        run.verify_outputs(manifest, ["spectrum.json"])
    with pytest.raises(MissingArtifactError):
        file_digest(tmp_path / "absent.toml")


def test_point_roundtrip(tmp_path, constant_wave, constant_grid):
    run = RunDirectory(tmp_path)
    digests = run.save_point(4, constant_wave, constant_grid, {"epsilon": 0.04})
    assert set(digests) == {"points/point_0004.csv", "points/point_0004.json"}
    assert run.point_indices() == [4]
    state, grid, meta = run.load_point(4)
    np.testing.assert_array_equal(state.w, constant_wave.w)
    np.testing.assert_array_equal(grid.q_nodes, constant_grid.q_nodes)
    np.testing.assert_array_equal(grid.p_nodes, constant_grid.p_nodes)
    assert grid.Np == constant_grid.Np
    assert state.converged
    assert state.F == constant_wave.F
    assert state.residual_norm == constant_wave.residual_norm
    assert meta["epsilon"] == 0.04


def test_truncated_point(tmp_path, constant_wave, constant_grid):
    run = RunDirectory(tmp_path)
    run.save_point(0, constant_wave, constant_grid)
    path = tmp_path / "points" / "point_0000.csv"
    path.write_text("\n".join(path.read_text().splitlines()[:-5]) + "\n")
    with pytest.raises(MissingArtifactError):
        run.load_point(0)


def test_continuation_point_roundtrip(
    tmp_path, constant_wave, constant_bg, constant_grid, constant_spec
):
    point = make_point(constant_wave, constant_bg, constant_grid, constant_spec, 0.0)
    run = RunDirectory(tmp_path)
    run.save_continuation_point(0, point)
    loaded = run.load_continuation_point(0)
    assert loaded.s == 0.0
    assert loaded.monitors == point.monitors
    assert loaded.tangent is None


def test_plain_point_is_not_a_continuation_point(
    tmp_path, constant_wave, constant_grid
):
    run = RunDirectory(tmp_path)
    run.save_point(0, constant_wave, constant_grid)
    with pytest.raises(MissingArtifactError):
        run.load_continuation_point(0)
