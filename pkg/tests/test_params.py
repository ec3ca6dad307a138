import numpy as np
import pytest

from valopt.params import ParamVector, load_checkpoint, save_checkpoint, zeros_like

LAYOUT = (("a.w", (2, 3)), ("a.b", (3,)), ("b.w", (3, 1)))


def test_layout_size_enforced():
    ParamVector(np.zeros(12), LAYOUT)
    with pytest.raises(ValueError, match="shape"):
        ParamVector(np.zeros(11), LAYOUT)


def test_tensor_views_share_memory():
    pv = ParamVector(np.arange(12, dtype=float), LAYOUT)
    assert pv.tensor("a.w").shape == (2, 3)
    assert pv.tensor("a.w")[1, 2] == 5.0
    assert list(pv.values[pv.slot("a.b")]) == [6.0, 7.0, 8.0]
    pv.tensor("b.w")[0, 0] = -1.0
    assert pv.values[9] == -1.0


def test_dot_requires_same_layout():
    pv = zeros_like(LAYOUT)
    other = ParamVector(np.zeros(4), (("x", (4,)),))
    with pytest.raises(ValueError, match="layout"):
        pv.dot(other)


def test_checkpoint_roundtrip_bit_identical(tmp_path):
    rng = np.random.default_rng(3)
    pv = ParamVector(rng.standard_normal(12) * 1e-7 + rng.standard_normal(12), LAYOUT)
    path = tmp_path / "ckpt.txt"
    save_checkpoint(pv, path)
    back = load_checkpoint(path)
    assert back.layout == pv.layout
    assert np.array_equal(back.values, pv.values)
    # a second write of the loaded vector is byte-identical
    path2 = tmp_path / "ckpt2.txt"
    save_checkpoint(back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_checkpoint_header_format(tmp_path):
    pv = ParamVector(np.zeros(12), LAYOUT)
    path = tmp_path / "ckpt.txt"
    save_checkpoint(pv, path)
    header = path.read_text().splitlines()[0]
    assert header == "a.w:2x3,a.b:3,b.w:3x1"
