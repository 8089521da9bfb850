import numpy as np
import pytest
from scipy import ndimage

from oscar.errors import BadK, NoForeground, Not2D, NotDivisible
from oscar.partitioning import (
    BACKGROUND,
    atlas_partition,
    average_sobel,
    grid_partition,
    slic_partition,
)

from _oracles import oracle_sobel_magnitude

PLUS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


def check_invariants(partition):
    labels = partition.labels
    fg = labels[labels != BACKGROUND]
    assert partition.n_regions >= 1
    assert fg.min() >= 0 and fg.max() == partition.n_regions - 1
    sizes = np.bincount(fg.ravel(), minlength=partition.n_regions)
    assert (sizes > 0).all()
    np.testing.assert_array_equal(sizes, partition.region_sizes)
    partition.validate()


def check_connectivity(partition):
    for r in range(partition.n_regions):
        _, n_comp = ndimage.label(partition.labels == r, structure=PLUS)
        assert n_comp == 1, f"region {r} split into {n_comp} components"


def test_grid_hand_example():
    part = grid_partition((4, 4), (2, 2))
    assert part.n_regions == 4
    np.testing.assert_array_equal(part.region_sizes, [4, 4, 4, 4])
    np.testing.assert_array_equal(
        part.labels, [[0, 0, 1, 1], [0, 0, 1, 1], [2, 2, 3, 3], [2, 2, 3, 3]]
    )


def test_grid_raster_order():
    part = grid_partition((4, 6), (2, 2))
    assert part.labels[0, 0] == 0
    assert part.labels[0, 2] == 1
    assert part.labels[2, 0] == 3


def test_grid_not_divisible():
    with pytest.raises(NotDivisible):
        grid_partition((5, 4), (2, 2))


def test_sobel_matches_hand_convolution():
    # vertical step: left half 0, right half 1, on a 6x6 image
    step = np.zeros((6, 6))
    step[:, 3:] = 1.0
    got = average_sobel([step])
    expected = oracle_sobel_magnitude(step)
    np.testing.assert_allclose(got, expected, atol=1e-12)
    # maximal response on the step columns, zero far from the step
    assert got[:, 2:4].min() > 0
    np.testing.assert_array_equal(got[:, 0], 0.0)
    np.testing.assert_array_equal(got[:, 5], 0.0)


def test_sobel_averages_images():
    rng = np.random.default_rng(0)
    imgs = [rng.random((6, 6)) for _ in range(3)]
    expected = np.mean([oracle_sobel_magnitude(im) for im in imgs], axis=0)
    np.testing.assert_allclose(average_sobel(imgs), expected, atol=1e-12)


def test_slic_uniform_image_gives_equal_quadrants():
    part = slic_partition(np.zeros((8, 8)), k=4)
    assert part.n_regions == 4
    np.testing.assert_array_equal(part.region_sizes, [16, 16, 16, 16])
    check_connectivity(part)


def test_slic_deterministic():
    rng = np.random.default_rng(13)
    edge = rng.random((40, 40))
    a = slic_partition(edge, k=16)
    b = slic_partition(edge, k=16)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_slic_k_one():
    part = slic_partition(np.zeros((5, 7)), k=1)
    assert part.n_regions == 1
    assert part.region_sizes[0] == 35


def test_slic_bad_k():
    with pytest.raises(BadK):
        slic_partition(np.zeros((4, 4)), k=0)
    with pytest.raises(BadK):
        slic_partition(np.zeros((4, 4)), k=17)


def test_slic_not_2d():
    with pytest.raises(Not2D):
        slic_partition(np.zeros((4, 4, 3)), k=2)


def test_slic_invariants_fuzzed():
    rng = np.random.default_rng(99)
    for _ in range(15):
        h = int(rng.integers(8, 48))
        w = int(rng.integers(8, 48))
        k = int(rng.integers(2, max(3, min(h * w // 8, 24))))
        part = slic_partition(rng.random((h, w)), k=k)
        check_invariants(part)
        check_connectivity(part)
        assert (part.labels != BACKGROUND).all()


def test_atlas_reindexes_ascending():
    atlas = np.array([[7, 7, 0], [3, 3, 0], [9, 9, 9]])
    part = atlas_partition(atlas, background=0)
    assert part.n_regions == 3
    # 3 -> 0, 7 -> 1, 9 -> 2; background pixels -> -1
    np.testing.assert_array_equal(
        part.labels, [[1, 1, BACKGROUND], [0, 0, BACKGROUND], [2, 2, 2]]
    )
    np.testing.assert_array_equal(part.region_sizes, [2, 2, 3])


def test_atlas_all_background():
    with pytest.raises(NoForeground):
        atlas_partition(np.zeros((3, 3), dtype=int), background=0)
