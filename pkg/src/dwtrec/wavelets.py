"""Orthogonal wavelet filter banks and the multi-level Mallat transform.

Conventions used throughout the package:

* convolution is full linear convolution with zero extension, so a length-n
  signal filtered by a length-FL filter gives n + FL - 1 samples;
* downsampling keeps the odd (0-based) samples of that output;
* upsampling interleaves one zero between consecutive samples;
* reconstruction keeps the centred window of the target length, dropping the
  extra sample on the right when the excess is odd.

Every function works along axis 0, so a 2-D array is transformed column by
column.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySignal, ExcessiveDepth, ShapeMismatch, UnsupportedWavelet

_SQRT_HALF = 0.7071067811865476

# Decomposition low-pass filters of the standard orthogonal constructions.
_LOW_PASS = {
    "haar": (_SQRT_HALF, _SQRT_HALF),
    "sym4": (
        -0.07576571478927333,
        -0.02963552764599851,
        0.49761866763201545,
        0.8037387518059161,
        0.29785779560527736,
        -0.09921954357684722,
        -0.012603967262037833,
        0.0322231006040427,
    ),
    "sym6": (
        0.015404109327027373,
        0.0034907120842174702,
        -0.11799011114819057,
        -0.048311742585633,
        0.4910559419267466,
        0.787641141030194,
        0.3379294217276218,
        -0.07263752278646252,
        -0.021060292512300564,
        0.04472490177066578,
        0.0017677118642428036,
        -0.007800708325034148,
    ),
    "sym8": (
        -0.0033824159510061256,
        -0.0005421323317911481,
        0.03169508781149298,
        0.007607487324917605,
        -0.1432942383508097,
        -0.061273359067658524,
        0.4813596512583722,
        0.7771857517005235,
        0.3644418948353314,
        -0.05194583810770904,
        -0.027219029917056003,
        0.049137179673607506,
        0.003808752013890615,
        -0.01495225833704823,
        -0.0003029205147213668,
        0.0018899503327594609,
    ),
    "coif2": (
        -0.000720549445520347,
        -0.0018232088709110323,
        0.005611434819368834,
        0.02368017194684777,
        -0.05943441864643109,
        -0.07648859907828076,
        0.4170051844232391,
        0.8127236354494135,
        0.3861100668227629,
        -0.0673725547237256,
        -0.04146493678687178,
        0.01638733646320364,
    ),
    "coif3": (
        -3.459977319727278e-05,
        -7.0983302506379e-05,
        0.0004662169598204029,
        0.0011175187708306303,
        -0.0025745176881367972,
        -0.009007976136730624,
        0.015880544863669452,
        0.03455502757329774,
        -0.08230192710629983,
        -0.07179982161915484,
        0.42848347637737,
        0.7937772226260872,
        0.40517690240911824,
        -0.06112339000297255,
        -0.06577191128146936,
        0.023452696142077168,
        0.007782596425672746,
        -0.003793512864380802,
    ),
}

SUPPORTED_WAVELETS = tuple(_LOW_PASS)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FilterBank:
    """Decomposition (L, H) and reconstruction (l, h) filters of one wavelet."""

    name: str
    L: np.ndarray
    H: np.ndarray
    l: np.ndarray  # noqa: E741
    h: np.ndarray

    @property
    def FL(self) -> int:
        return len(self.L)

    @classmethod
    def from_low_pass(cls, name: str, low_pass) -> "FilterBank":
        L = np.asarray(low_pass, dtype=np.float64)
        FL = len(L)
        signs = (-1.0) ** np.arange(FL)
        H = signs * L[::-1]
        return cls(name, _frozen(L), _frozen(H), _frozen(L[::-1]), _frozen(H[::-1]))

    def check(self, tol: float = 1e-10) -> None:
        """Raise ValueError if any filter-bank invariant is violated."""
        FL = self.FL
        if FL < 2 or FL % 2:
            raise ValueError(f"{self.name}: filter length {FL} must be even and >= 2")
        for f in (self.H, self.l, self.h):
            if len(f) != FL:
                raise ValueError(f"{self.name}: filters differ in length")
        if abs(np.sum(self.L**2) - 1.0) > tol:
            raise ValueError(f"{self.name}: low-pass energy is not 1")
        if abs(np.sum(self.H)) > tol:
            raise ValueError(f"{self.name}: high-pass does not sum to 0")
        k = np.arange(FL)
        if not np.array_equal(self.H, (-1.0) ** k * self.L[::-1]):
            raise ValueError(f"{self.name}: quadrature-mirror relation broken")
        if not (np.array_equal(self.l, self.L[::-1]) and np.array_equal(self.h, self.H[::-1])):
            raise ValueError(f"{self.name}: reconstruction filters are not time reversals")


_BANKS: dict[str, FilterBank] = {}
for _name, _taps in _LOW_PASS.items():
    _bank = FilterBank.from_low_pass(_name, _taps)
    _bank.check()
    _BANKS[_name] = _bank


def load_filter_bank(name: str) -> FilterBank:
    try:
        return _BANKS[name]
    except KeyError:
        valid = ", ".join(SUPPORTED_WAVELETS)
        raise UnsupportedWavelet(f"unknown wavelet {name!r}; supported: {valid}") from None


def coeff_lengths(N: int, FL: int, gamma: int) -> list[int]:
    """Per-level coefficient lengths ``[length_1, ..., length_gamma]``.

    ``length_i = (length_{i-1} + FL - 1) // 2`` with ``length_0 = N``.

    A decomposition is too deep (``ExcessiveDepth``) when the first level
    sees fewer than FL/2 samples, or when a later level would not shorten
    its input any more. The latter happens once the input is no longer than
    FL - 1, the fixed point of the recurrence; past it the coefficients
    describe mostly zero padding.
    """
    if N < 1 or FL < 1 or gamma < 1:
        raise ValueError(f"N, FL and gamma must be positive (got {N}, {FL}, {gamma})")
    if 2 * N < FL:
        raise ExcessiveDepth(f"signal of length {N} is shorter than half the filter ({FL})")
    lengths = []
    prev = N
    for level in range(1, gamma + 1):
        if level > 1 and prev <= FL - 1:
            raise ExcessiveDepth(
                f"level {level} would not shorten a length-{prev} input "
                f"(filter length {FL}); max level for N={N} is {level - 1}"
            )
        prev = (prev + FL - 1) // 2
        lengths.append(prev)
    return lengths


def max_level(N: int, FL: int) -> int:
    """Deepest gamma accepted by ``coeff_lengths`` (0 if none)."""
    if 2 * N < FL:
        return 0
    level, prev = 1, (N + FL - 1) // 2
    while prev > FL - 1:
        prev = (prev + FL - 1) // 2
        level += 1
    return level


def _full_conv(x: np.ndarray, f: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    out = np.zeros((n + len(f) - 1,) + x.shape[1:])
    for k, tap in enumerate(f):
        out[k:k + n] += tap * x
    return out


def _upsample(x: np.ndarray) -> np.ndarray:
    out = np.zeros((2 * x.shape[0] - 1,) + x.shape[1:])
    out[::2] = x
    return out


def centerkeep(y: np.ndarray, target: int) -> np.ndarray:
    excess = y.shape[0] - target
    if excess < 0:
        raise ShapeMismatch(f"cannot keep {target} samples out of {y.shape[0]}")
    start = excess // 2
    return y[start:start + target]


def dwt_single(x, fb: FilterBank) -> tuple[np.ndarray, np.ndarray]:
    """One Mallat step: low-pass and high-pass, each followed by downsampling."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[0] == 0:
        raise EmptySignal("cannot decompose an empty signal")
    A = _full_conv(x, fb.L)[1::2]
    D = _full_conv(x, fb.H)[1::2]
    return A, D


@dataclass
class CoeffPyramid:
    gamma: int
    original_length: int
    approx: np.ndarray
    details: list = field(default_factory=list)  # D^gamma, ..., D^1

    def detail(self, level: int) -> np.ndarray:
        """Detail block D^level (level 1 is the finest)."""
        return self.details[self.gamma - level]

    def lengths(self) -> list[int]:
        return [self.detail(i).shape[0] for i in range(1, self.gamma + 1)]


def mwd(x, fb: FilterBank, gamma: int) -> CoeffPyramid:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[0] == 0:
        raise EmptySignal("cannot decompose an empty signal")
    coeff_lengths(x.shape[0], fb.FL, gamma)
    A = x
    details = []
    for _ in range(gamma):
        A, D = dwt_single(A, fb)
        details.append(D)
    details.reverse()
    return CoeffPyramid(gamma, x.shape[0], A, details)


def reconstruct(p: CoeffPyramid, fb: FilterBank) -> np.ndarray:
    expected = coeff_lengths(p.original_length, fb.FL, p.gamma)
    if len(p.details) != p.gamma:
        raise ShapeMismatch(f"pyramid has {len(p.details)} detail blocks, gamma is {p.gamma}")
    for level, want in enumerate(expected, start=1):
        got = p.detail(level).shape[0]
        if got != want:
            raise ShapeMismatch(f"detail level {level} has length {got}, expected {want}")
    if p.approx.shape[0] != expected[-1]:
        raise ShapeMismatch(
            f"approximation has length {p.approx.shape[0]}, expected {expected[-1]}"
        )
    targets = [p.original_length] + expected[:-1]
    A = np.asarray(p.approx, dtype=np.float64)
    for level in range(p.gamma, 0, -1):
        D = p.detail(level)
        if D.shape[1:] != A.shape[1:]:
            raise ShapeMismatch(f"detail level {level} has trailing shape {D.shape[1:]}")
        y = _full_conv(_upsample(A), fb.l) + _full_conv(_upsample(D), fb.h)
        A = centerkeep(y, targets[level - 1])
    return A


def mwd_matrix(X, fb: FilterBank, gamma: int) -> CoeffPyramid:
    """Column-wise ``mwd`` of an [N x d] matrix; coefficient blocks are [length_i x d]."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeMismatch(f"expected a 2-D matrix, got shape {X.shape}")
    return mwd(X, fb, gamma)


def reconstruct_matrix(p: CoeffPyramid, fb: FilterBank) -> np.ndarray:
    if np.ndim(p.approx) != 2:
        raise ShapeMismatch("matrix pyramid expected")
    return reconstruct(p, fb)
