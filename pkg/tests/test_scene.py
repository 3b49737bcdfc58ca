import numpy as np
import pytest
from hypothesis import given, strategies as st

from splatbalance.errors import InvariantError, SceneFormatError
from splatbalance.scene import (Camera, Cluster, Gaussian, Rng, Scene, SyntheticSpec, covariance_from_factors,
                                generate_synthetic_scene, load_scene, look_from, save_scene)

from conftest import random_scene

HEADER = "balancegs-scene v1"


def _write(tmp_path, body_lines, count=None):
    p = tmp_path / "s.scene"
    lines = [HEADER, f"count {len(body_lines) if count is None else count}"] + body_lines
    p.write_text("\n".join(lines) + "\n")
    return p


REC = "0 0 0 0.1 0.1 0.1 1 0 0 0 0.5 0.2 0.3 0.4"


def test_load_two_gaussians_bbox(tmp_path):
    p = _write(tmp_path, [REC, "1 2 3 0.1 0.2 0.3 1 0 0 0 1 1 1 1"])
    s = load_scene(p)
    assert len(s) == 2
    lo, hi = s.bbox
    assert np.array_equal(lo, [0, 0, 0]) and np.array_equal(hi, [1, 2, 3])
    assert not s.bbox_degenerate


def test_load_bad_opacity_names_field(tmp_path):
    p = _write(tmp_path, ["0 0 0 0.1 0.1 0.1 1 0 0 0 1.5 0.2 0.3 0.4"])
    with pytest.raises(InvariantError) as e:
        load_scene(p)
    assert e.value.field == "opacity"


@pytest.mark.parametrize("rec,field", [
    ("0 0 0 0 0.1 0.1 1 0 0 0 0.5 0.2 0.3 0.4", "scale"),
    ("0 0 0 0.1 0.1 0.1 0 0 0 0 0.5 0.2 0.3 0.4", "rotation"),
    ("0 0 0 0.1 0.1 0.1 1 0 0 0 0.5 0.2 1.3 0.4", "color.g"),
    ("0 0 nan 0.1 0.1 0.1 1 0 0 0 0.5 0.2 0.3 0.4", "z"),
])
def test_invariant_errors_name_field(tmp_path, rec, field):
    with pytest.raises(InvariantError) as e:
        load_scene(_write(tmp_path, [rec]))
    assert e.value.field == field


def test_empty_body(tmp_path):
    s = load_scene(_write(tmp_path, []))
    assert len(s) == 0 and s.bbox_degenerate


def test_parse_error_line_numbers(tmp_path):
    with pytest.raises(SceneFormatError) as e:
        load_scene(_write(tmp_path, [REC, "0 0 0 0.1"]))
    assert e.value.line == 4
    with pytest.raises(SceneFormatError) as e:
        load_scene(_write(tmp_path, [REC, "0 0 x 0.1 0.1 0.1 1 0 0 0 0.5 0.2 0.3 0.4"]))
    assert e.value.line == 4
    with pytest.raises(SceneFormatError) as e:
        load_scene(_write(tmp_path, [REC], count=3))
    bad = tmp_path / "h.scene"
    bad.write_text("not a scene\n")
    with pytest.raises(SceneFormatError) as e:
        load_scene(bad)
    assert e.value.line == 1


def test_missing_file():
    with pytest.raises(OSError):
        load_scene("/nonexistent/dir/x.scene")


def test_round_trip_100(tmp_path):
    s = random_scene(3, n=100)
    p = tmp_path / "r.scene"
    save_scene(s, p)
    t = load_scene(p)
    assert s.equals(t)  # repr floats round-trip exactly, which implies the 1e-6 bound and order


def test_save_unwritable_path(tmp_path):
    blocker = tmp_path / "plain_file"
    blocker.write_text("")
    with pytest.raises(OSError):
        save_scene(random_scene(1, 3), blocker / "x.scene")


def test_contrast_spec_counts():
    spec = SyntheticSpec([Cluster(10000, (0, 0, 0), 1.0), Cluster(100, (10, 0, 0), 1.0)], seed=7)
    s = generate_synthetic_scene(spec)
    assert len(s) == 10100
    inA = np.all(np.abs(s.means) <= 0.5, axis=1)
    inB = np.all(np.abs(s.means - [10, 0, 0]) <= 0.5, axis=1)
    assert inA.sum() == 10000 and inB.sum() == 100
    assert generate_synthetic_scene(spec).equals(s)


def test_synthetic_errors():
    with pytest.raises(ValueError):
        generate_synthetic_scene(SyntheticSpec([]))
    with pytest.raises(ValueError):
        generate_synthetic_scene(SyntheticSpec([Cluster(10, (0, 0, 0), 0.0)]))


def test_gaussian_normalizes_and_clamps():
    g = Gaussian((0, 0, 0), (1, 1, 1), (2, 0, 0, 0), 1.7, (1.2, -0.1, 0.5))
    assert abs(np.linalg.norm(g.rotation) - 1) <= 1e-12
    assert g.opacity == 1.0 and g.color == (1.0, 0.0, 0.5)
    with pytest.raises(InvariantError):
        Gaussian((0, 0, 0), (1, 0, 1))


def test_camera_invariants():
    with pytest.raises(InvariantError):
        look_from((0, 0, 5), 100, 64)
    v = np.eye(4)
    v[0, 0] = 2.0
    with pytest.raises(InvariantError):
        Camera(v, 64.0, 64.0, 64, 64)


def test_rng_determinism_and_fork():
    a, b = Rng(42), Rng(42)
    assert np.array_equal(a.uniform(size=10), b.uniform(size=10))
    assert np.array_equal(a.normal(size=10), b.normal(size=10))
    f1, f2 = Rng(5).fork(2)
    assert not np.array_equal(f1.uniform(size=4), f2.uniform(size=4))


def test_rng_normal_distribution():
    x = Rng(9).normal(2.0, 3.0, 200000)
    assert abs(x.mean() - 2.0) < 0.03 and abs(x.std() - 3.0) < 0.03


@given(st.lists(st.floats(0.01, 10.0), min_size=3, max_size=3),
       st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda q: sum(v * v for v in q) > 1e-3))
def test_covariance_spd(scale, quat):
    q = np.array(quat) / np.linalg.norm(quat)
    cov = covariance_from_factors(np.array([scale]), q[None])[0]
    assert np.allclose(cov, cov.T, atol=1e-12 * max(scale) ** 2)
    np.linalg.cholesky(cov)
    # eigenvalues are the squared scales
    assert np.allclose(np.sort(np.linalg.eigvalsh(cov)), np.sort(np.square(scale)), rtol=1e-8)


def test_scene_read_only_and_take():
    s = random_scene(2, 10)
    with pytest.raises(ValueError):
        s.means[0, 0] = 1.0
    t = s.take([3, 1])
    assert np.array_equal(t.means[0], s.means[3]) and len(t) == 2
