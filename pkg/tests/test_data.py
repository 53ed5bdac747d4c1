import numpy as np
import pytest

from pvd.data import (
    SHAPE_KINDS,
    denormalize,
    load_cloud,
    load_dir,
    load_pvpc,
    load_xyz,
    make_partial,
    normalize,
    partial_pair,
    resample_points,
    save_cloud,
    save_pvpc,
    save_xyz,
    synth_primitives,
)
from pvd.errors import DataError


def test_xyz_round_trip_exact(tmp_path):
    pc = np.random.default_rng(0).standard_normal((17, 3))
    p = tmp_path / "a.xyz"
    save_xyz(p, pc)
    back = load_xyz(p)
    assert np.array_equal(back, pc)  # %.17g is lossless for float64


def test_xyz_skips_blank_and_comment_lines(tmp_path):
    p = tmp_path / "b.xyz"
    p.write_text("# header\n\n1 2 3\n  \n# mid\n4 5 6\n")
    pc = load_xyz(p)
    assert np.array_equal(pc, [[1, 2, 3], [4, 5, 6]])


def test_xyz_bad_field_count_reports_line(tmp_path):
    p = tmp_path / "c.xyz"
    p.write_text("1 2 3\n4 5\n")
    with pytest.raises(DataError, match=r":2: expected 3 fields"):
        load_xyz(p)


def test_xyz_non_numeric_rejected(tmp_path):
    p = tmp_path / "d.xyz"
    p.write_text("1 2 zebra\n")
    with pytest.raises(DataError):
        load_xyz(p)


def test_xyz_non_finite_rejected(tmp_path):
    p = tmp_path / "e.xyz"
    p.write_text("1 2 nan\n")
    with pytest.raises(DataError):
        load_xyz(p)


def test_xyz_empty_rejected(tmp_path):
    p = tmp_path / "f.xyz"
    p.write_text("# nothing here\n")
    with pytest.raises(DataError):
        load_xyz(p)


def test_pvpc_round_trip(tmp_path):
    pc = np.random.default_rng(1).standard_normal((9, 3)).astype(np.float32)
    p = tmp_path / "a.pvpc"
    save_pvpc(p, pc)
    back = load_pvpc(p)
    assert back.dtype == np.float64
    assert np.array_equal(back, pc.astype(np.float64))


def test_pvpc_bad_magic(tmp_path):
    p = tmp_path / "bad.pvpc"
    p.write_bytes(b"XXXX" + b"\x00" * 16)
    with pytest.raises(DataError):
        load_pvpc(p)


def test_pvpc_truncated_payload(tmp_path):
    pc = np.zeros((4, 3))
    p = tmp_path / "t.pvpc"
    save_pvpc(p, pc)
    raw = p.read_bytes()
    p.write_bytes(raw[:-5])
    with pytest.raises(DataError):
        load_pvpc(p)


def test_load_cloud_dispatches_on_extension(tmp_path):
    pc = np.random.default_rng(2).standard_normal((5, 3))
    save_cloud(tmp_path / "x.xyz", pc)
    save_cloud(tmp_path / "x.pvpc", pc)
    assert np.array_equal(load_cloud(tmp_path / "x.xyz"), pc)
    assert np.allclose(load_cloud(tmp_path / "x.pvpc"), pc, atol=1e-6)
    with pytest.raises(DataError):
        load_cloud(tmp_path / "x.obj")


def test_load_dir_sorted(tmp_path):
    for name in ("c.xyz", "a.xyz", "b.pvpc"):
        save_cloud(tmp_path / name, np.full((2, 3), float(ord(name[0]))))
    clouds = load_dir(tmp_path)
    firsts = [c[0, 0] for c in clouds]
    assert firsts == [float(ord("a")), float(ord("b")), float(ord("c"))]


def test_load_dir_missing(tmp_path):
    with pytest.raises(DataError):
        load_dir(tmp_path / "nope")
    with pytest.raises(DataError):
        load_dir(tmp_path)  # exists but holds no clouds


def test_normalize_unit_radius_and_round_trip():
    pc = np.random.default_rng(3).standard_normal((30, 3)) * 5 + 2
    out, rec = normalize(pc)
    assert np.allclose(out.mean(axis=0), 0.0, atol=1e-12)
    assert np.linalg.norm(out, axis=1).max() == pytest.approx(1.0)
    assert np.allclose(denormalize(out, rec), pc, atol=1e-12)


def test_normalize_degenerate_cloud():
    pc = np.tile([[2.0, 2.0, 2.0]], (4, 1))
    out, rec = normalize(pc)
    assert np.allclose(out, 0.0)
    assert rec["scale"] == 1.0


@pytest.mark.parametrize("kind", SHAPE_KINDS)
def test_synth_shapes_and_determinism(kind):
    a = synth_primitives(kind, 100, seed=5)
    b = synth_primitives(kind, 100, seed=5)
    c = synth_primitives(kind, 100, seed=6)
    assert a.shape == (100, 3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_synth_sphere_on_unit_sphere():
    pc = synth_primitives("sphere", 200, seed=0)
    assert np.allclose(np.linalg.norm(pc, axis=1), 1.0, atol=1e-12)


def test_synth_cube_on_surface():
    pc = synth_primitives("cube", 200, seed=0)
    assert np.all(np.abs(pc) <= 1.0 + 1e-12)
    assert np.allclose(np.abs(pc).max(axis=1), 1.0)


def test_synth_cylinder_bounds():
    pc = synth_primitives("cylinder", 500, seed=0)
    r = np.linalg.norm(pc[:, :2], axis=1)
    assert np.all(r <= 1.0 + 1e-12)
    assert np.all(np.abs(pc[:, 2]) <= 1.0 + 1e-12)
    on_side = np.isclose(r, 1.0)
    on_cap = np.isclose(np.abs(pc[:, 2]), 1.0)
    assert np.all(on_side | on_cap)
    # area weighting: side is 2/3 of the total area
    assert 0.5 < on_side.mean() < 0.8


def test_synth_torus_tube_radius():
    pc = synth_primitives("torus", 300, seed=0)
    ring = np.linalg.norm(pc[:, :2], axis=1)
    tube = np.sqrt((ring - 1.0) ** 2 + pc[:, 2] ** 2)
    assert np.allclose(tube, 0.4, atol=1e-12)


def test_synth_bad_kind_and_n():
    with pytest.raises(ValueError):
        synth_primitives("pyramid", 10, 0)
    with pytest.raises(ValueError):
        synth_primitives("sphere", 0, 0)


def test_partial_pair_structure():
    pc = np.arange(30, dtype=float).reshape(10, 3)
    arranged, m = partial_pair(pc, [0.0, 0.0, 1.0], 0.4)
    assert m == 4
    assert arranged.shape == (10, 3)
    # the arranged cloud is a permutation of the input
    assert np.array_equal(np.sort(arranged.ravel()), np.sort(pc.ravel()))
    # kept rows all project at least as high as every dropped row
    proj_kept = arranged[:m, 2]
    proj_drop = arranged[m:, 2]
    assert proj_kept.min() >= proj_drop.max()


def test_partial_pair_preserves_block_order():
    pc = np.array([[0.0, 0, 3], [0, 0, 1], [0, 0, 2], [0, 0, 0]])
    arranged, m = partial_pair(pc, [0.0, 0.0, 1.0], 0.5)
    assert m == 2
    # kept: rows with z=3 and z=2, in original order (index 0 then 2)
    assert np.array_equal(arranged[:2], [[0, 0, 3], [0, 0, 2]])
    assert np.array_equal(arranged[2:], [[0, 0, 1], [0, 0, 0]])


def test_partial_pair_m_clamped():
    pc = np.random.default_rng(4).standard_normal((5, 3))
    _, m_low = partial_pair(pc, [1.0, 0, 0], 0.01)
    _, m_high = partial_pair(pc, [1.0, 0, 0], 0.99)
    assert m_low == 1
    assert m_high == 4
    with pytest.raises(ValueError):
        partial_pair(pc, [1.0, 0, 0], 0.0)


def test_make_partial_task():
    pc = synth_primitives("sphere", 20, seed=1)
    task = make_partial(pc, [0.0, 0.0, 1.0], 0.5)
    assert task.m == 10
    assert task.n_free == 10
    assert task.n_total == 20


def test_resample_points():
    pc = np.arange(60, dtype=float).reshape(20, 3)
    out = resample_points(pc, 7, seed=0)
    assert out.shape == (7, 3)
    rows = {tuple(r) for r in out}
    all_rows = {tuple(r) for r in pc}
    assert rows <= all_rows and len(rows) == 7
    with pytest.raises(ValueError):
        resample_points(pc, 21, seed=0)
