import numpy as np
import pytest

from aircomp import mappings
from aircomp.mappings import (
    ExtendedAffineMapping,
    mapping_from_id,
    segment_index,
    unit_affine,
    unit_augmented_affine,
)

CONTINUOUS_IDS = ["affine", "aa", "extended:2", "extended:4", "extended:6"]


def test_unit_affine_coefficients():
    m = unit_affine(-1, 1)
    assert m.a == 0.5 and m.b == 0.5 and m.c == 2.0
    m01 = unit_affine(0, 1)
    assert m01.a == 1.0 and m01.b == 0.0
    assert m.w_min == 0.0 and m.w_max == 1.0


def test_unit_affine_boundary_and_range_error():
    m = unit_affine(-1, 1)
    assert m.encode(-1.0)[0] == 0.0
    assert m.encode(0.0)[0] == 0.5
    with pytest.raises(ValueError):
        unit_affine(2, 2)
    with pytest.raises(ValueError):
        m.encode(1.5)


def test_unit_augmented_affine_coefficients():
    m = unit_augmented_affine(-1, 1)
    assert np.allclose(m.A, np.eye(2))
    assert np.allclose(m.c, [1.0, -1.0])
    m2 = unit_augmented_affine(-2, 2)
    assert np.allclose(m2.encode(2.0), [1.0, 0.0])
    assert np.allclose(m.encode(-0.3), [0.0, 0.3])
    for bad in [(0, 1), (-1, 0), (0.5, 1)]:
        with pytest.raises(ValueError):
            unit_augmented_affine(*bad)


def test_affine_constraint_validation():
    with pytest.raises(ValueError):
        mappings.AffineMapping(a=0.5, b=0.5, c=3.0, x_min=-1, x_max=1)
    with pytest.raises(ValueError):
        mappings.AugmentedAffineMapping(
            A=np.eye(2), b=np.zeros(2), c=np.array([2.0, -1.0]), x_min=-1, x_max=1
        )
    # constructed instances satisfy the constraints to 1e-12
    m = unit_affine(-3, 7)
    assert abs(m.c * m.a - 1) < 1e-12
    aa = unit_augmented_affine(-3, 7)
    assert np.max(np.abs(aa.c @ aa.A - [1, -1])) < 1e-12


def test_aa_decode_example():
    m = unit_augmented_affine(-1, 1)
    assert m.decode([6.0, 4.0], K=10) == pytest.approx(2.0)


def test_extended_encode_examples():
    m = ExtendedAffineMapping(4)
    w = m.encode(0.7)
    assert w.shape == (6,)
    assert np.allclose(w[:4], [0.0, 0.4, 0.0, 0.0])
    assert np.allclose(w[4:], [1.0, 0.0])  # transmitted indicators for segments 2 and 4
    w = m.encode(-1.0)
    assert w[3] == pytest.approx(1.0) and w[5] == 1.0


def test_extended_decode_example():
    m = ExtendedAffineMapping(4)
    total = m.encode(0.7) + m.encode(-1.0)
    assert m.decode(total, K=2) == pytest.approx(-0.3)


def test_segment_index_examples():
    assert segment_index(4, 0.25) == 1
    assert segment_index(4, 0.5) == 1
    assert segment_index(4, -0.75) == 4
    assert segment_index(4, 0.0) == 1
    assert segment_index(4, -0.5) == 3
    assert segment_index(4, 1.0) == 2
    assert segment_index(4, -1.0) == 4
    with pytest.raises(ValueError):
        segment_index(3, 0.1)
    with pytest.raises(ValueError):
        segment_index(4, 1.5)


def test_mv_decoders():
    mva = mapping_from_id("mv-a")
    assert mva.decode([6.0], K=11) == 1.0
    assert mva.decode([5.0], K=11) == -1.0
    mvaa = mapping_from_id("mv-aa")
    assert mvaa.decode([3.0, 8.0], K=11) == -1.0
    with pytest.raises(ValueError):
        mva.encode(0.3)


def test_count_decoder_rounds_half_up():
    m = mapping_from_id("count")
    assert m.decode([3.5], K=10) == 4
    assert m.decode([3.49], K=10) == 3
    assert m.decode([-0.7], K=10) == 0
    assert m.decode([12.3], K=10) == 10
    assert np.array_equal(m.encode(np.array([1.0, -1.0]))[:, 0], [1.0, 0.0])


@pytest.mark.parametrize("map_id", CONTINUOUS_IDS)
def test_roundtrip_exactness(map_id):
    # noiseless identity: decode(sum encode(x_k)) == sum x_k for K up to 50
    rng = np.random.default_rng(101)
    m = mapping_from_id(map_id)
    for K in (1, 2, 7, 50):
        x = rng.uniform(m.x_min, m.x_max, (200, K))
        w_sum = m.encode(x).sum(axis=-2)
        assert np.max(np.abs(m.decode(w_sum, K) - x.sum(axis=-1))) <= 1e-9 * K


@pytest.mark.parametrize("map_id", CONTINUOUS_IDS + ["mv-a", "mv-aa", "count"])
def test_non_negativity_and_range(map_id):
    rng = np.random.default_rng(202)
    m = mapping_from_id(map_id)
    if map_id.startswith("mv") or map_id == "count":
        x = np.where(rng.random(100_000) < 0.5, 1.0, -1.0)
    else:
        x = rng.uniform(m.x_min, m.x_max, 100_000)
    w = m.encode(x)
    assert w.min() >= 0.0
    assert w.max() <= m.w_max + 1e-12


def test_extended_single_active_indicator():
    rng = np.random.default_rng(303)
    for N in (2, 4, 8):
        m = ExtendedAffineMapping(N)
        x = rng.uniform(-1, 1, 5000)
        w = m.encode(x)
        cont_active = (w[:, :N] > 0).sum(axis=1)
        assert np.all(cont_active <= 1)
        # reconstruct full indicator vector: exactly one segment active per value
        seg = segment_index(N, x)
        assert np.all((seg >= 1) & (seg <= N))
        if N > 2:
            ind = w[:, N:]
            assert np.all(ind.sum(axis=1) <= 1.0)


def test_extended_n2_equals_unit_aa():
    m2 = ExtendedAffineMapping(2)
    aa = unit_augmented_affine(-1, 1)
    x = np.linspace(-1, 1, 401)
    assert np.allclose(m2.encode(x), aa.encode(x), atol=0)
    rng = np.random.default_rng(404)
    xs = rng.uniform(-1, 1, (1000, 5))
    w2 = m2.encode(xs).sum(axis=-2)
    waa = aa.encode(xs).sum(axis=-2)
    assert np.allclose(m2.decode(w2, 5), aa.decode(waa, 5), atol=0)


def test_decode_dimension_mismatch():
    m = unit_augmented_affine(-1, 1)
    with pytest.raises(ValueError):
        m.decode([1.0, 2.0, 3.0], K=2)


def test_mapping_from_id_unknown():
    with pytest.raises(ValueError):
        mapping_from_id("chirp")
