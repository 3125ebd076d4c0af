import numpy as np
import pytest

from orbitconv.segnet import D4
from orbitconv.synth import SynthConfig, generate, orientation_holdout_split


def test_deterministic():
    a = generate(SynthConfig(seed=3, count=5, size=24))
    b = generate(SynthConfig(seed=3, count=5, size=24))
    assert a[0].tobytes() == b[0].tobytes() and a[1].tobytes() == b[1].tobytes()


def test_images_depend_only_on_seed_and_index():
    short = generate(SynthConfig(seed=3, count=2, size=24))
    long = generate(SynthConfig(seed=3, count=6, size=24))
    assert np.array_equal(short[0], long[0][:2])


def test_shapes_and_ranges():
    x, y = generate(SynthConfig(seed=0, count=4, size=20))
    assert x.shape == (4, 1, 20, 20) and y.shape == (4, 20, 20)
    assert x.min() >= 0.0 and x.max() <= 1.0
    assert set(np.unique(y)) <= {0, 1}


def test_clean_horizontal_stroke_ridge_on_label_row():
    cfg = SynthConfig(seed=1, count=1, size=32, strokes=(1, 1), arc_fraction=0.0, blobs=(0, 0),
                      noise=0.0, orientations=(0.0,))
    x, y = generate(cfg)
    rows, cols = np.nonzero(y[0])
    assert len(set(rows)) == 1
    for c in cols:
        assert np.argmax(x[0, 0, :, c]) == rows[0]


def test_default_boundary_fraction():
    _, y = generate(SynthConfig())
    assert 0.01 < y.mean() < 0.30


def test_small_size_rejected():
    with pytest.raises(ValueError):
        SynthConfig(size=8)


def test_split_counts_and_labels():
    x, y = generate(SynthConfig(seed=2, count=10, size=16))
    tr_x, tr_y, te_x, te_y = orientation_holdout_split(x, y)
    assert len(tr_x) == 8 and len(te_x) == 16 and len(te_y) == 16
    assert np.array_equal(tr_x, x[:8])
    for j, src in enumerate(range(8, 10)):
        for k, g in enumerate(D4):
            assert np.array_equal(te_y[8 * j + k], g.apply(y[src]))
            assert np.array_equal(te_x[8 * j + k], g.apply(x[src]))
        assert np.array_equal(te_x[8 * j], x[src])


def test_split_too_small():
    x, y = generate(SynthConfig(seed=2, count=9, size=16))
    with pytest.raises(ValueError):
        orientation_holdout_split(x, y)
