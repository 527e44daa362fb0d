import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dwtrec.errors import EmptySignal, ExcessiveDepth, ShapeMismatch, UnsupportedWavelet
from dwtrec.wavelets import (
    SUPPORTED_WAVELETS,
    CoeffPyramid,
    coeff_lengths,
    dwt_single,
    load_filter_bank,
    max_level,
    mwd,
    mwd_matrix,
    reconstruct,
    reconstruct_matrix,
)

S = 0.7071067811865476


def brute_dwt(x, f):
    """O(n * FL) convolution written out, then the odd samples."""
    n, FL = len(x), len(f)
    full = [sum(f[k] * x[t - k] for k in range(FL) if 0 <= t - k < n) for t in range(n + FL - 1)]
    return np.array(full[1::2])


def test_haar_bank():
    fb = load_filter_bank("haar")
    np.testing.assert_array_equal(fb.L, [S, S])
    np.testing.assert_array_equal(fb.H, [S, -S])
    assert fb.FL == 2


@pytest.mark.parametrize("name", SUPPORTED_WAVELETS)
def test_bank_invariants(name):
    fb = load_filter_bank(name)
    FL = fb.FL
    assert FL % 2 == 0 and len(fb.H) == len(fb.l) == len(fb.h) == FL
    assert abs(np.sum(fb.L**2) - 1) <= 1e-10
    assert abs(np.sum(fb.H)) <= 1e-10
    for k in range(FL):
        assert fb.H[k] == (-1) ** k * fb.L[FL - 1 - k]
        assert fb.l[k] == fb.L[FL - 1 - k]
        assert fb.h[k] == fb.H[FL - 1 - k]


def test_sym6_length():
    assert load_filter_bank("sym6").FL == 12


@pytest.mark.parametrize("name", SUPPORTED_WAVELETS)
def test_banks_match_pywavelets(name):
    pywt = pytest.importorskip("pywt")
    w = pywt.Wavelet(name)
    fb = load_filter_bank(name)
    np.testing.assert_allclose(fb.L, w.dec_lo, atol=1e-15)
    # the high-pass sign convention here is the negative of PyWavelets'
    np.testing.assert_allclose(fb.H, -np.array(w.dec_hi), atol=1e-15)


def test_filter_arrays_are_read_only():
    fb = load_filter_bank("sym4")
    with pytest.raises(ValueError):
        fb.L[0] = 1.0


def test_unknown_wavelet():
    with pytest.raises(UnsupportedWavelet, match="haar"):
        load_filter_bank("db99")


@pytest.mark.parametrize("N, FL, gamma, expected", [
    (50, 12, 3, [30, 20, 15]),
    (4, 2, 1, [2]),
    (1, 2, 1, [1]),
    (4, 2, 2, [2, 1]),
])
def test_coeff_lengths(N, FL, gamma, expected):
    assert coeff_lengths(N, FL, gamma) == expected


def test_excessive_depth():
    assert max_level(50, 12) == 6
    coeff_lengths(50, 12, 6)
    with pytest.raises(ExcessiveDepth):
        coeff_lengths(50, 12, 7)
    with pytest.raises(ExcessiveDepth):
        coeff_lengths(4, 2, 3)
    with pytest.raises(ExcessiveDepth):
        coeff_lengths(1, 12, 1)


def test_dwt_single_hand_values():
    fb = load_filter_bank("haar")
    A, D = dwt_single([1, 2, 3, 4], fb)
    np.testing.assert_allclose(A, [2.1213203, 4.9497475], atol=1e-7)
    np.testing.assert_allclose(D, [0.7071068, 0.7071068], atol=1e-7)
    A, D = dwt_single([5], fb)
    np.testing.assert_allclose(A, [3.5355339], atol=1e-7)
    np.testing.assert_allclose(D, [-3.5355339], atol=1e-7)


@pytest.mark.parametrize("name", SUPPORTED_WAVELETS)
@pytest.mark.parametrize("n", [1, 2, 7, 30])
def test_dwt_single_matches_brute_force(name, n, rng):
    fb = load_filter_bank(name)
    x = rng.normal(size=n)
    A, D = dwt_single(x, fb)
    np.testing.assert_allclose(A, brute_dwt(x, fb.L), atol=1e-13)
    np.testing.assert_allclose(D, brute_dwt(x, fb.H), atol=1e-13)


def test_dwt_matches_pywavelets_zero_mode(rng):
    pywt = pytest.importorskip("pywt")
    x = rng.normal(size=37)
    for name in SUPPORTED_WAVELETS:
        A, D = dwt_single(x, load_filter_bank(name))
        cA, cD = pywt.dwt(x, name, mode="zero")
        np.testing.assert_allclose(A, cA, atol=1e-12)
        np.testing.assert_allclose(D, -cD, atol=1e-12)


def test_empty_signal():
    with pytest.raises(EmptySignal):
        dwt_single([], load_filter_bank("haar"))
    with pytest.raises(EmptySignal):
        mwd([], load_filter_bank("haar"), 1)


@pytest.mark.parametrize("name", SUPPORTED_WAVELETS)
def test_constant_interior_details_vanish(name):
    fb = load_filter_bank(name)
    n, FL = 64, fb.FL
    D = dwt_single(np.full(n, 3.7), fb)[1]
    # D[j] reads x[2j+1-FL+1 .. 2j+1]; keep windows entirely inside the signal
    interior = [j for j in range(len(D)) if 2 * j + 1 - (FL - 1) >= 0 and 2 * j + 1 <= n - 1]
    assert interior
    assert np.max(np.abs(D[interior])) <= 1e-10


def test_haar_energy(rng):
    fb = load_filter_bank("haar")
    for n in (2, 8, 64, 256):
        x = rng.normal(size=n)
        A, D = dwt_single(x, fb)
        assert abs(np.sum(A**2) + np.sum(D**2) - np.sum(x**2)) <= 1e-10


def test_mwd_lengths_sym6():
    p = mwd(np.arange(50.0), load_filter_bank("sym6"), 3)
    assert p.lengths() == [30, 20, 15]
    assert len(p.approx) == 15 and len(p.details) == 3


def test_mwd_single_level_equals_dwt(rng):
    fb = load_filter_bank("coif2")
    x = rng.normal(size=19)
    p = mwd(x, fb, 1)
    A, D = dwt_single(x, fb)
    np.testing.assert_array_equal(p.approx, A)
    np.testing.assert_array_equal(p.details[0], D)


def test_mwd_two_level_haar():
    p = mwd([1, 2, 3, 4], load_filter_bank("haar"), 2)
    np.testing.assert_allclose(p.approx, [5.0], atol=1e-12)
    # sign follows H = [1, -1] / sqrt(2)
    np.testing.assert_allclose(p.detail(2), [2.0], atol=1e-12)
    np.testing.assert_allclose(p.detail(1), [S, S], atol=1e-7)


def test_reconstruct_haar_exact():
    fb = load_filter_bank("haar")
    np.testing.assert_allclose(reconstruct(mwd([1, 2, 3, 4], fb, 1), fb), [1, 2, 3, 4], atol=1e-10)


def test_reconstruct_sym6_random(rng):
    fb = load_filter_bank("sym6")
    for _ in range(100):
        x = rng.normal(size=50)
        y = reconstruct(mwd(x, fb, 3), fb)
        assert np.linalg.norm(y - x) / np.linalg.norm(x) <= 1e-8


def test_reconstruct_rejects_bad_lengths(rng):
    fb = load_filter_bank("sym6")
    p = mwd(rng.normal(size=50), fb, 3)
    p.details[-1] = np.append(p.details[-1], 0.0)
    with pytest.raises(ShapeMismatch, match="level 1"):
        reconstruct(p, fb)


def test_reconstruct_rejects_wrong_gamma(rng):
    fb = load_filter_bank("haar")
    p = mwd(rng.normal(size=16), fb, 2)
    bad = CoeffPyramid(3, p.original_length, p.approx, p.details)
    with pytest.raises((ShapeMismatch, ExcessiveDepth)):
        reconstruct(bad, fb)


@settings(max_examples=200, deadline=None)
@given(
    name=st.sampled_from(SUPPORTED_WAVELETS),
    n=st.integers(1, 200),
    data=st.data(),
)
def test_length_law_and_round_trip(name, n, data):
    fb = load_filter_bank(name)
    top = max_level(n, fb.FL)
    if top == 0:
        with pytest.raises(ExcessiveDepth):
            mwd(np.ones(n), fb, 1)
        return
    gamma = data.draw(st.integers(1, top))
    x = np.asarray(data.draw(st.lists(st.floats(-1e3, 1e3), min_size=n, max_size=n)))
    p = mwd(x, fb, gamma)
    assert p.lengths() == coeff_lengths(n, fb.FL, gamma)
    assert len(p.approx) == p.lengths()[-1]
    y = reconstruct(p, fb)
    scale = max(np.linalg.norm(x), 1e-300)
    assert np.linalg.norm(y - x) <= 1e-8 * scale + 1e-12


def test_matrix_variants(rng):
    fb = load_filter_bank("sym4")
    X = rng.normal(size=(40, 5))
    p = mwd_matrix(X, fb, 2)
    for j in range(5):
        pj = mwd(X[:, j], fb, 2)
        np.testing.assert_array_equal(p.approx[:, j], pj.approx)
        for a, b in zip(p.details, pj.details):
            np.testing.assert_array_equal(a[:, j], b)
    Y = reconstruct_matrix(p, fb)
    assert np.linalg.norm(Y - X) / np.linalg.norm(X) <= 1e-8


def test_matrix_single_column_matches_sequence(rng):
    fb = load_filter_bank("haar")
    x = rng.normal(size=12)
    p = mwd_matrix(x[:, None], fb, 2)
    q = mwd(x, fb, 2)
    np.testing.assert_array_equal(p.approx[:, 0], q.approx)


def test_matrix_rejects_vectors():
    with pytest.raises(ShapeMismatch):
        mwd_matrix(np.ones(8), load_filter_bank("haar"), 1)


def test_deterministic(rng):
    fb = load_filter_bank("coif3")
    x = rng.normal(size=77)
    a, b = mwd(x, fb, 2), mwd(x.copy(), fb, 2)
    assert a.approx.tobytes() == b.approx.tobytes()
    assert reconstruct(a, fb).tobytes() == reconstruct(b, fb).tobytes()
