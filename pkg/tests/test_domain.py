import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randjulia import domain
from randjulia.domain import (
    Circle,
    Constant,
    Disk,
    DiskAt,
    Explicit,
    MainCardioid,
    Periodic,
    Random,
    RegionUnion,
    SamplingFault,
    bounding_radius,
    contains,
    contains_array,
    sample,
    sample_array,
    sequence_array,
    sequence_at,
    uniforms,
)

N = 100_000
REGIONS = [
    Disk(1.0),
    Disk(0.25),
    Circle(0.5),
    MainCardioid(),
    DiskAt(2 + 0j, 0.1),
    RegionUnion((Disk(0.25), DiskAt(0.5, 0.1))),
]


def test_contains_examples():
    assert contains(MainCardioid(), 0)
    assert not contains(MainCardioid(), 0.26)
    assert not contains(Disk(1.0), 1 + 0j)
    assert contains(Disk(1.0), 0.999)
    assert contains(Circle(0.5), 0.5j)
    assert contains(Circle(0.5), 0.5 + 1e-13)
    assert not contains(Circle(0.5), 0.5 + 1e-11)
    assert contains(DiskAt(2 + 0j, 0.1), 2.05)
    assert not contains(DiskAt(2 + 0j, 0.1), 2.1)


def test_cardioid_boundary_points():
    # c = mu/2 - mu**2/4 on |mu| = 1 is the boundary, slightly inside is a member
    for theta in np.linspace(0.1, 2 * math.pi - 0.1, 37):
        mu = np.exp(1j * theta)
        assert contains(MainCardioid(), domain.cardioid_point(0.999 * mu))
        assert not contains(MainCardioid(), domain.cardioid_point(1.001 * mu))
    assert contains(MainCardioid(), -0.7499)
    assert not contains(MainCardioid(), -0.7501)


def test_cardioid_contains_quarter_disk_grid():
    xs = np.linspace(-0.25, 0.25, 32)
    grid = (xs[None, :] + 1j * xs[:, None]).ravel()
    grid = grid[np.abs(grid) < 0.25]
    assert grid.size >= 700
    ring = 0.2499 * np.exp(2j * np.pi * np.arange(300) / 300)
    assert contains_array(MainCardioid(), np.concatenate([grid, ring])).all()


@pytest.mark.parametrize(
    "region, expected",
    [
        (Disk(0.5), 0.5),
        (MainCardioid(), 0.75),
        (RegionUnion((Disk(0.25), DiskAt(0.5, 0.1))), 0.6),
        (Circle(0.3), 0.3),
        (DiskAt(3 + 4j, 1.0), 6.0),
    ],
)
def test_bounding_radius(region, expected):
    assert bounding_radius(region) == pytest.approx(expected, abs=1e-15)


def test_cardioid_bounding_radius_is_attained():
    mu = np.exp(1j * np.linspace(0, 2 * math.pi, 100_001))
    assert np.abs(domain.cardioid_point(mu)).max() == pytest.approx(0.75, abs=1e-9)


@pytest.mark.parametrize("region", REGIONS, ids=repr)
def test_samples_lie_in_region(region):
    c = sample_array(region, 7, np.arange(N), 3)
    assert contains_array(region, c).all()
    assert np.all(np.abs(c) <= bounding_radius(region) * (1 + 1e-15))


def test_circle_samples_exact_radius():
    c = sample_array(Circle(0.5), 11, np.arange(N), 0)
    assert np.max(np.abs(np.abs(c) - 0.5)) <= 1e-15


def test_circle_angles_uniform():
    c = sample_array(Circle(1.0), 5, np.arange(N), 0)
    hist, _ = np.histogram(np.angle(c), bins=8, range=(-math.pi, math.pi))
    assert np.all(np.abs(hist / N - 1 / 8) < 0.01)


def test_disk_mean_modulus():
    c = sample_array(Disk(1.0), 42, np.arange(N), 0)
    assert np.mean(np.abs(c)) == pytest.approx(2 / 3, abs=0.01)


def test_disk_half_area_fraction():
    R = 0.8
    c = sample_array(Disk(R), 3, 0, np.arange(N))
    assert np.mean(np.abs(c) < R / math.sqrt(2)) == pytest.approx(0.5, abs=0.01)


def test_union_overlap_not_double_weighted():
    # two unit disks at distance 1: lens area / union area
    lens = 2 * math.acos(0.5) - 0.5 * math.sqrt(3)
    frac = lens / (2 * math.pi - lens)
    region = RegionUnion((Disk(1.0), DiskAt(1 + 0j, 1.0)))
    c = sample_array(region, 9, np.arange(N), 0)
    in_both = (np.abs(c) < 1) & (np.abs(c - 1) < 1)
    assert in_both.mean() == pytest.approx(frac, abs=0.01)


def test_cardioid_sampling_covers_area_uniformly():
    # main cardioid area is 3*pi/8; the quarter disk holds pi/16 of it
    c = sample_array(MainCardioid(), 21, np.arange(N), 0)
    assert np.mean(np.abs(c) < 0.25) == pytest.approx((math.pi / 16) / (3 * math.pi / 8), abs=0.01)


def test_sample_reproducible_and_vector_consistent():
    a = sample(Disk(1.0), 42, 5, 17)
    b = sample(Disk(1.0), 42, 5, 17)
    assert a == b
    vec = sample_array(Disk(1.0), 42, np.array([4, 5, 6]), 17)
    assert vec[1] == a
    assert sample(Disk(1.0), 43, 5, 17) != a
    assert sample(Disk(1.0), 42, 6, 17) != a


def test_sampling_fault_on_cap(monkeypatch):
    monkeypatch.setattr(domain, "MAX_REJECTIONS", 50)
    far = RegionUnion((DiskAt(0j, 1e-9), DiskAt(100 + 0j, 1e-9)))
    with pytest.raises(SamplingFault):
        sample(far, 0, 0, 0)


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 2**64 - 1),
    stream=st.integers(0, 2**40),
    draw=st.integers(0, 2**40),
)
def test_uniforms_pure_and_in_range(seed, stream, draw):
    u1 = uniforms(seed, np.array([stream]), np.array([draw]), np.array([0, 1, 2]))
    u2 = uniforms(seed, np.array([stream]), np.array([draw]), np.array([0, 1, 2]))
    assert np.array_equal(u1, u2)
    assert np.all((u1 >= 0) & (u1 < 1))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**63), stream=st.integers(0, 10**6), draw=st.integers(0, 10**6))
def test_sample_bitwise_stable(seed, stream, draw):
    for region in (Disk(1.0), Circle(0.5), MainCardioid()):
        a = sample(region, seed, stream, draw)
        b = sample_array(region, seed, np.array([stream, stream]), np.array([draw, draw]))
        assert a == b[0] == b[1]
        assert contains(region, a)


def test_region_validation():
    with pytest.raises(ValueError):
        Disk(0.0)
    with pytest.raises(ValueError):
        Circle(-1.0)
    with pytest.raises(ValueError):
        RegionUnion(())
    with pytest.raises(ValueError):
        DiskAt(complex("nan"), 1.0)


def test_sequence_at_examples():
    ex = Explicit((-2,), 0)
    assert sequence_at(ex, 0) == -2
    assert sequence_at(ex, 5) == 0
    a, b = 0.1 + 0.2j, -0.3
    assert sequence_at(Periodic((a, b)), 3) == b
    assert sequence_at(Periodic((a, b)), 4) == a
    for i in (0, 7, 10**6):
        assert sequence_at(Constant(0.3), i) == 0.3


def test_random_sequence_is_region_sampler():
    seq = Random(Disk(1.0), 99, 4)
    for i in range(5):
        assert sequence_at(seq, i) == sample(Disk(1.0), 99, 4, i)
    arr = sequence_array(seq, np.arange(5))
    assert np.array_equal(arr, [sequence_at(seq, i) for i in range(5)])


def test_shift_is_index_offset():
    seq = Random(MainCardioid(), 1, 0)
    k = 7
    shifted = sequence_array(seq, np.arange(10) + k)
    assert np.array_equal(shifted, sequence_array(seq, np.arange(k, k + 10)))


def test_cardioid_bounding_box_encloses_region():
    mu = np.exp(1j * np.linspace(0, 2 * math.pi, 20_001))
    c = domain.cardioid_point(mu)
    x0, x1, y0, y1 = domain._bounding_box(MainCardioid())
    assert x0 <= c.real.min() and c.real.max() <= x1
    assert y0 <= c.imag.min() and c.imag.max() <= y1
    assert c.real.max() == pytest.approx(0.375, abs=1e-6)
