import numpy as np
import pytest

from depthstitch import (
    DepthMap,
    DepthSequence,
    LatentSequence,
    spatial_differentials,
    temporal_differentials,
)


def test_depth_map_defaults_valid_to_finite():
    values = np.array([[1.0, np.nan], [np.inf, 4.0]])
    m = DepthMap(values)
    assert m.valid.tolist() == [[True, False], [False, True]]


def test_depth_map_rejects_invalid_marked_valid():
    values = np.array([[1.0, np.nan]])
    valid = np.array([[True, True]])
    with pytest.raises(ValueError):
        DepthMap(values, valid)


def test_depth_map_arrays_are_read_only():
    m = DepthMap(np.ones((2, 2)))
    with pytest.raises(ValueError):
        m.values[0, 0] = 5.0
    with pytest.raises(ValueError):
        m.valid[0, 0] = False


def test_depth_map_copies_input():
    src = np.ones((2, 2))
    m = DepthMap(src)
    src[0, 0] = 99.0
    assert m.values[0, 0] == 1.0


def test_depth_map_rejects_wrong_rank():
    with pytest.raises(ValueError):
        DepthMap(np.ones(4))
    with pytest.raises(ValueError):
        DepthMap(np.ones((2, 2, 2)))


def test_depth_sequence_shape_and_accessors():
    frames = [DepthMap(np.full((3, 4), float(i))) for i in range(5)]
    seq = DepthSequence.from_frames(frames)
    assert seq.frame_count == 5
    assert seq.frame_shape == (3, 4)
    assert seq.frame(2).values[0, 0] == 2.0
    assert len(seq.frames()) == 5


def test_depth_sequence_rejects_mismatched_frames():
    with pytest.raises(ValueError):
        DepthSequence.from_frames([DepthMap(np.ones((2, 2))), DepthMap(np.ones((2, 3)))])


def test_depth_sequence_rejects_empty():
    with pytest.raises(ValueError):
        DepthSequence.from_frames([])


def test_latent_sequence_requires_rank_4_finite():
    LatentSequence(np.zeros((2, 3, 4, 5)))
    with pytest.raises(ValueError):
        LatentSequence(np.zeros((3, 4, 5)))
    bad = np.zeros((1, 1, 2, 2))
    bad[0, 0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        LatentSequence(bad)


def test_spatial_differentials_worked_example():
    # single frame, single channel, 2x2 block [[0, 1], [2, 3]]
    lat = LatentSequence(np.array([[[[0.0, 1.0], [2.0, 3.0]]]]))
    dh, dw = spatial_differentials(lat)
    assert dh.shape == (1, 1, 1, 2)
    assert dw.shape == (1, 1, 2, 1)
    np.testing.assert_array_equal(dh[0, 0], [[2.0, 2.0]])
    np.testing.assert_array_equal(dw[0, 0], [[1.0], [1.0]])


def test_spatial_differentials_match_loop_oracle():
    rng = np.random.default_rng(11)
    vals = rng.normal(size=(2, 3, 5, 4))
    dh, dw = spatial_differentials(LatentSequence(vals))
    for f in range(2):
        for c in range(3):
            for i in range(4):
                for j in range(4):
                    assert dh[f, c, i, j] == vals[f, c, i + 1, j] - vals[f, c, i, j]
            for i in range(5):
                for j in range(3):
                    assert dw[f, c, i, j] == vals[f, c, i, j + 1] - vals[f, c, i, j]


def test_temporal_differentials_match_loop_oracle():
    rng = np.random.default_rng(12)
    vals = rng.normal(size=(4, 2, 3, 3))
    dt = temporal_differentials(LatentSequence(vals))
    assert dt.shape == (3, 2, 3, 3)
    for f in range(3):
        for idx in np.ndindex(2, 3, 3):
            assert dt[(f,) + idx] == vals[(f + 1,) + idx] - vals[(f,) + idx]


def test_temporal_differentials_single_frame_is_empty():
    dt = temporal_differentials(LatentSequence(np.ones((1, 2, 3, 3))))
    assert dt.shape == (0, 2, 3, 3)
    assert dt.size == 0


def test_differentials_are_linear():
    rng = np.random.default_rng(13)
    a = rng.normal(size=(2, 1, 4, 4))
    b = rng.normal(size=(2, 1, 4, 4))
    dh_sum, dw_sum = spatial_differentials(LatentSequence(a + b))
    dh_a, dw_a = spatial_differentials(LatentSequence(a))
    dh_b, dw_b = spatial_differentials(LatentSequence(b))
    np.testing.assert_allclose(dh_sum, dh_a + dh_b, rtol=0, atol=1e-15)
    np.testing.assert_allclose(dw_sum, dw_a + dw_b, rtol=0, atol=1e-15)


def test_differentials_ignore_constant_shift():
    # dyadic-lattice values keep a + 7.25 exact, so the shift cancels bit-for-bit
    rng = np.random.default_rng(14)
    a = rng.integers(-4096, 4096, size=(3, 2, 4, 4)) / 2.0**20
    dh, dw = spatial_differentials(LatentSequence(a))
    dh2, dw2 = spatial_differentials(LatentSequence(a + 7.25))
    np.testing.assert_array_equal(dh, dh2)
    np.testing.assert_array_equal(dw, dw2)
    dt = temporal_differentials(LatentSequence(a))
    dt2 = temporal_differentials(LatentSequence(a + 7.25))
    np.testing.assert_array_equal(dt, dt2)
