"""2-D dual-tree complex wavelet transform with perfect reconstruction.

The first decomposition level uses the biorthogonal 9,7-tap filter pair of
Antonini, Barlaud, Mathieu & Daubechies (IEEE Trans. Image Proc. 1(2), 1992);
levels two and up use the 14-tap quarter-shift filters from Kingsbury's
"Image Processing with Complex Wavelets" (Phil. Trans. R. Soc. Lond. A,
1999), where the second tree is the time-reverse of the first. Both trees of
a level-1 stage are phases of one non-decimated filtering; higher levels
extend each tree symmetrically with data from the opposite tree, which is
what makes the finite-length transform exactly invertible.

The 2-D transform applies the dual-tree stage separably along both axes,
carrying the four tree combinations as real arrays, and pairs them into six
oriented complex subbands per level through a unitary sum/difference map.
The final scaling coefficients of the four trees are interleaved into one
coarse "lowpass" field (tree a on even rows/columns).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

# Antonini 9,7-tap biorthogonal pair (level-1 analysis).
BIORT_HI = np.array([
    0.0456358815571251, -0.0287717631142493, -0.2956358815571280,
    0.5575435262285023, -0.2956358815571233, -0.0287717631142531,
    0.0456358815571261])
BIORT_LO = np.array([
    0.0267487574108101, -0.0168641184428747, -0.0782232665289905,
    0.2668641184428729, 0.6029490182363593, 0.2668641184428769,
    -0.0782232665289884, -0.0168641184428753, 0.0267487574108096])

# Level-1 synthesis filters: the opposite filter with alternate signs flipped.
INV_BIORT_HI = BIORT_LO.copy()
INV_BIORT_HI[1::2] *= -1
INV_BIORT_LO = BIORT_HI.copy()
INV_BIORT_LO[0::2] *= -1

# 14-tap quarter-shift prototype H_L (Kingsbury 1999, section 6).
_HL14 = np.array([
    0.0032531427636532, -0.0038832119991585, 0.0346603468448535,
    -0.0388728012688278, -0.1172038876991153, 0.2752953846688820,
    0.7561456438925225, 0.5688104207121227, 0.0118660920337970,
    -0.1067118046866654, 0.0238253847949203, 0.0170252238815540,
    -0.0054394759372741, -0.0045568956284755])

H00B = _HL14.copy()            # tree-b lowpass: H_L itself
H00A = H00B[::-1].copy()       # tree-a lowpass: z^-1 H_L(z^-1)
_odd = (len(_HL14) // 2 + 1) % 2
H01A = _HL14.copy()            # tree-a highpass: H_L(-z)
H01A[_odd::2] *= -1
H01B = H01A[::-1].copy()       # tree-b highpass: z^-1 H_L(-z^-1)

_QPRE = (len(H01A) - 1) // 2
_QPOST = len(H01A) // 2

_SQRT_HALF = np.sqrt(0.5)

TREES = ("a", "b")
BANDS = ("lh", "hl", "hh")  # (axis0, axis1) filter selection, l = lowpass


def _extend_axis0(a: np.ndarray, pre: int, ext: np.ndarray, post: int) -> np.ndarray:
    """Prepend/append `pre`/`post` rows of extension data to `a`.

    When the requested extension is longer than `ext`, the extension tiles
    alternating copies of `a` and `ext` (needed once the coarsest level is
    shorter than the filter).
    """
    parts = []
    if pre > 0:
        if pre > len(ext):
            reps = int(np.ceil(pre / (len(ext) + len(a))))
            pool = np.concatenate((a, ext) * reps, axis=0)
            parts.append(pool[-pre:])
        else:
            parts.append(ext[-pre:])
    parts.append(a)
    if post > 0:
        if post > len(ext):
            reps = int(np.ceil(post / (len(ext) + len(a))))
            pool = np.concatenate((ext, a) * reps, axis=0)
            parts.append(pool[:post])
        else:
            parts.append(ext[:post])
    return np.concatenate(parts, axis=0)


def _conv_valid_axis0(a: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """np.convolve(..., mode='valid') applied down axis 0 of a 2-D array."""
    k = len(kernel)
    out_len = a.shape[0] - k + 1
    out = np.zeros((out_len, a.shape[1]))
    for i in range(k):
        out += kernel[k - 1 - i] * a[i:i + out_len]
    return out


def _filt(a, kernel, ext=None, pre=None, post=None):
    if pre is None:
        pre = (len(kernel) - 1) // 2
    if post is None:
        post = len(kernel) - pre - 1
    if ext is None:
        ext = a[::-1]
    return _conv_valid_axis0(_extend_axis0(a, pre, ext, post), kernel)


def _upfilt(a, kernel, ext, pre=_QPRE, post=_QPOST):
    """Symmetric-extend, upsample by two (zero-interlace) and filter."""
    extended = _extend_axis0(a, (pre + 1) // 2, ext, post // 2)
    expanded = np.zeros((2 * a.shape[0] + pre + post, a.shape[1]))
    expanded[(pre + 1) % 2::2] = extended
    return _conv_valid_axis0(expanded, kernel)


# ---------------------------------------------------------------------------
# One dual-tree stage along axis 0, and its transpose-wrapped axis-1 twin.
# Tree dicts map "a"/"b" to real 2-D arrays.

def _fwd_level1_axis0(x: np.ndarray):
    lo = _filt(x, BIORT_LO)
    hi = _filt(x, BIORT_HI)
    return {"a": lo[0::2], "b": lo[1::2]}, {"a": hi[0::2], "b": hi[1::2]}


def _inv_level1_axis0(lo: dict, hi: dict) -> np.ndarray:
    full_lo = np.empty((2 * lo["a"].shape[0], lo["a"].shape[1]))
    full_hi = np.empty_like(full_lo)
    full_lo[0::2], full_lo[1::2] = lo["a"], lo["b"]
    full_hi[0::2], full_hi[1::2] = hi["a"], hi["b"]
    return _filt(full_hi, INV_BIORT_HI) + _filt(full_lo, INV_BIORT_LO)


def _fwd_qshift_axis0(pair: dict):
    ext_a, ext_b = pair["b"][::-1], pair["a"][::-1]
    lo = {"a": _filt(pair["a"], H00A, ext_a, _QPRE, _QPOST)[::2],
          "b": _filt(pair["b"], H00B, ext_b, _QPRE, _QPOST)[::2]}
    hi = {"a": _filt(pair["a"], H01A, ext_a, _QPRE, _QPOST)[::2],
          "b": _filt(pair["b"], H01B, ext_b, _QPRE, _QPOST)[::2]}
    return lo, hi


def _inv_qshift_axis0(lo: dict, hi: dict) -> dict:
    # synthesis filters and extension data both come from the opposite tree
    return {
        "a": _upfilt(lo["a"], H00B, lo["b"][::-1])
        + _upfilt(hi["a"], H01B, hi["b"][::-1]),
        "b": _upfilt(lo["b"], H00A, lo["a"][::-1])
        + _upfilt(hi["b"], H01A, hi["a"][::-1]),
    }


def _t(d: dict) -> dict:
    return {k: v.T for k, v in d.items()}


def _fwd_level1_axis1(x: np.ndarray):
    lo, hi = _fwd_level1_axis0(x.T)
    return _t(lo), _t(hi)


def _inv_level1_axis1(lo: dict, hi: dict) -> np.ndarray:
    return _inv_level1_axis0(_t(lo), _t(hi)).T


def _fwd_qshift_axis1(pair: dict):
    lo, hi = _fwd_qshift_axis0(_t(pair))
    return _t(lo), _t(hi)


def _inv_qshift_axis1(lo: dict, hi: dict) -> dict:
    return _t(_inv_qshift_axis0(_t(lo), _t(hi)))


# ---------------------------------------------------------------------------
# Complex subband pairing (unitary, hence trivially invertible).

def _q2c(quads: dict) -> tuple[np.ndarray, np.ndarray]:
    zp = ((quads["aa"] - quads["bb"]) + 1j * (quads["ab"] + quads["ba"])) * _SQRT_HALF
    zm = ((quads["aa"] + quads["bb"]) + 1j * (quads["ab"] - quads["ba"])) * _SQRT_HALF
    return zp, zm


def _c2q(zp: np.ndarray, zm: np.ndarray) -> dict:
    return {
        "aa": (zp.real + zm.real) * _SQRT_HALF,
        "bb": (zm.real - zp.real) * _SQRT_HALF,
        "ab": (zp.imag + zm.imag) * _SQRT_HALF,
        "ba": (zp.imag - zm.imag) * _SQRT_HALF,
    }


# ---------------------------------------------------------------------------
# Full 2-D pyramid.

@dataclass
class WaveletPyramid:
    lowpass: np.ndarray        # interleaved scaling coefficients of the 4 trees
    levels: list[np.ndarray]   # per level: (6, m_l, m_l) complex subbands
    original_shape: tuple[int, int]

    @property
    def level_count(self) -> int:
        return len(self.levels)


def _level_split(state, first: bool):
    """One analysis level: field or 4-tree lowpass dict -> (lowpass dict, quads)."""
    if first:
        lo0, hi0 = _fwd_level1_axis0(state)
    else:
        lo0, hi0 = {}, {}
        for ty in TREES:
            lo, hi = _fwd_qshift_axis0({"a": state["a" + ty], "b": state["b" + ty]})
            for tx in TREES:
                lo0[tx + ty] = lo[tx]
                hi0[tx + ty] = hi[tx]

    low = {}
    quads = {b: {} for b in BANDS}
    for tx in TREES:
        if first:
            lo1, lh1 = _fwd_level1_axis1(lo0[tx])
            hl1, hh1 = _fwd_level1_axis1(hi0[tx])
        else:
            lo1, lh1 = _fwd_qshift_axis1({"a": lo0[tx + "a"], "b": lo0[tx + "b"]})
            hl1, hh1 = _fwd_qshift_axis1({"a": hi0[tx + "a"], "b": hi0[tx + "b"]})
        for ty in TREES:
            low[tx + ty] = lo1[ty]
            quads["lh"][tx + ty] = lh1[ty]
            quads["hl"][tx + ty] = hl1[ty]
            quads["hh"][tx + ty] = hh1[ty]
    return low, quads


def _level_merge(low: dict, level: np.ndarray, first: bool):
    """Inverse of one analysis level."""
    quads = {band: _c2q(level[2 * i], level[2 * i + 1])
             for i, band in enumerate(BANDS)}

    mid_lo, mid_hi = {}, {}
    for tx in TREES:
        lo_pair = {"a": low[tx + "a"], "b": low[tx + "b"]}
        lh_pair = {"a": quads["lh"][tx + "a"], "b": quads["lh"][tx + "b"]}
        hl_pair = {"a": quads["hl"][tx + "a"], "b": quads["hl"][tx + "b"]}
        hh_pair = {"a": quads["hh"][tx + "a"], "b": quads["hh"][tx + "b"]}
        if first:
            mid_lo[tx] = _inv_level1_axis1(lo_pair, lh_pair)
            mid_hi[tx] = _inv_level1_axis1(hl_pair, hh_pair)
        else:
            rec_lo = _inv_qshift_axis1(lo_pair, lh_pair)
            rec_hi = _inv_qshift_axis1(hl_pair, hh_pair)
            for ty in TREES:
                mid_lo[tx + ty] = rec_lo[ty]
                mid_hi[tx + ty] = rec_hi[ty]

    if first:
        return _inv_level1_axis0({"a": mid_lo["a"], "b": mid_lo["b"]},
                                 {"a": mid_hi["a"], "b": mid_hi["b"]})
    out = {}
    for ty in TREES:
        rec = _inv_qshift_axis0({"a": mid_lo["a" + ty], "b": mid_lo["b" + ty]},
                                {"a": mid_hi["a" + ty], "b": mid_hi["b" + ty]})
        out["a" + ty] = rec["a"]
        out["b" + ty] = rec["b"]
    return out


def _pad_to_multiple(field: np.ndarray, mult: int) -> np.ndarray:
    pads = []
    for size in field.shape:
        target = int(np.ceil(size / mult)) * mult
        pads.append((0, target - size))
    if all(p == (0, 0) for p in pads):
        return field
    return np.pad(field, pads, mode="symmetric")


def dtcwt_forward(field: np.ndarray, levels: int = 4) -> WaveletPyramid:
    """Decompose a 2-D field into `levels` stages of 6 complex subbands each.

    Sizes that are not multiples of 2**levels are reflect-padded up before
    the transform; the inverse crops back to the original shape.
    """
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 2:
        raise ConfigError("dtcwt_forward expects a 2-D field")
    if levels < 1:
        raise ConfigError("need at least one level")
    if min(field.shape) < 2**levels:
        raise ConfigError(f"field of shape {field.shape} is degenerate for {levels} levels")
    original_shape = field.shape
    state = _pad_to_multiple(field, 2**levels)

    out_levels = []
    for lvl in range(levels):
        state, quads = _level_split(state, first=(lvl == 0))
        bands = []
        for band in BANDS:
            zp, zm = _q2c(quads[band])
            bands.extend([zp, zm])
        out_levels.append(np.ascontiguousarray(np.stack(bands)))

    coarse = np.empty((2 * state["aa"].shape[0], 2 * state["aa"].shape[1]))
    coarse[0::2, 0::2] = state["aa"]
    coarse[0::2, 1::2] = state["ab"]
    coarse[1::2, 0::2] = state["ba"]
    coarse[1::2, 1::2] = state["bb"]
    return WaveletPyramid(lowpass=coarse, levels=out_levels,
                          original_shape=original_shape)


def dtcwt_inverse(pyramid: WaveletPyramid) -> np.ndarray:
    """Reconstruct the field from its pyramid (exact up to float roundoff)."""
    coarse = pyramid.lowpass
    low = {
        "aa": coarse[0::2, 0::2],
        "ab": coarse[0::2, 1::2],
        "ba": coarse[1::2, 0::2],
        "bb": coarse[1::2, 1::2],
    }
    for level in reversed(pyramid.levels[1:]):
        low = _level_merge(low, level, first=False)
    x = _level_merge(low, pyramid.levels[0], first=True)
    r, c = pyramid.original_shape
    return x[:r, :c]
