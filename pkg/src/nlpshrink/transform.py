"""Periodized orthogonal discrete wavelet transform.

Levels are numbered from the coarsest detail level (``l = 1``) to the finest
(``l = L``), so that hyperparameter curves decreasing in ``l`` act hardest on
the finest scales.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "WaveletFilter",
    "CoefficientPyramid",
    "filter_taps",
    "default_depth",
    "dwt",
    "idwt",
    "SUPPORTED_FILTERS",
]

_SQRT1_2 = 0.7071067811865476

# Least asymmetric Daubechies, six vanishing moments. Newton-polished against
# the orthogonality and vanishing-moment equations at 50 digits.
_SYM6 = (
    -0.0078007083250323804142,
    0.001767711864254007741,
    0.044724901770781384663,
    -0.021060292512370847992,
    -0.072637522786376583464,
    0.33792942172816583271,
    0.78764114102865099607,
    0.49105594192797373304,
    -0.048311742585698054971,
    -0.1179901111485200254,
    0.0034907120842221625153,
    0.015404109327044824299,
)

# Coiflet with five vanishing moments (30 taps).
_COIF5 = (
    -0.000212081862067494,
    0.0003585777411617577,
    0.0021782943778456947,
    -0.00415931262757864,
    -0.010131584846900276,
    0.023408322118927783,
    0.028169744270532353,
    -0.09192158806008609,
    -0.052046670253554764,
    0.42157126673075435,
    0.7742936228603274,
    0.4379823066591634,
    -0.06203775157498196,
    -0.10556315130733723,
    0.041287530472117834,
    0.032674799467057355,
    -0.019758391600965465,
    -0.009159507338676163,
    0.006761520220620417,
    0.0024315754425382886,
    -0.0016616273039298788,
    -0.0006375589261258812,
    0.0003018579416682448,
    0.00014035632812373243,
    -4.12198619242655e-05,
    -2.1270221672515614e-05,
    3.7007277113394796e-06,
    2.0612203985788783e-06,
    -1.6237995172048338e-07,
    -9.604010112767894e-08,
)

_TABLES = {"haar": (_SQRT1_2, _SQRT1_2), "sym6": _SYM6, "coif5": _COIF5}
SUPPORTED_FILTERS = tuple(_TABLES)


@dataclass(frozen=True)
class WaveletFilter:
    name: str
    lowpass: np.ndarray = field(repr=False)

    @property
    def length(self):
        return self.lowpass.size

    @property
    def highpass(self):
        # quadrature mirror: g_k = (-1)^k h_{L-1-k}
        h = self.lowpass
        signs = np.where(np.arange(h.size) % 2 == 0, 1.0, -1.0)
        return signs * h[::-1]


def filter_taps(name):
    """Return the lowpass filter named ``name`` (haar, sym6 or coif5)."""
    if isinstance(name, WaveletFilter):
        return name
    try:
        taps = _TABLES[name]
    except KeyError:
        raise ValueError(
            f"unknown wavelet {name!r}; supported filters: {', '.join(SUPPORTED_FILTERS)}"
        ) from None
    h = np.array(taps, dtype=float)
    h.flags.writeable = False
    return WaveletFilter(name, h)


@dataclass
class CoefficientPyramid:
    """Scaling coefficients of the coarsest level plus detail coefficients.

    ``details[0]`` is level 1 (coarsest), ``details[-1]`` is level L (finest).
    """

    scaling: np.ndarray
    details: list
    n: int
    filter_name: str = "haar"

    @property
    def nlevels(self):
        return len(self.details)

    def detail(self, level):
        """Detail vector at 1-based ``level``."""
        if not 1 <= level <= self.nlevels:
            raise IndexError(f"level {level} outside 1..{self.nlevels}")
        return self.details[level - 1]

    @property
    def finest(self):
        return self.details[-1]

    def copy(self):
        return CoefficientPyramid(
            self.scaling.copy(), [d.copy() for d in self.details], self.n, self.filter_name
        )

    def with_details(self, details):
        return CoefficientPyramid(
            self.scaling.copy(), [np.asarray(d, float) for d in details], self.n, self.filter_name
        )

    def flat_details(self):
        """All detail coefficients concatenated (coarse to fine) with their levels."""
        values = np.concatenate(self.details) if self.details else np.empty(0)
        levels = np.concatenate(
            [np.full(d.size, l + 1, dtype=np.int64) for l, d in enumerate(self.details)]
        ) if self.details else np.empty(0, dtype=np.int64)
        return values, levels

    def energy(self):
        return float(self.scaling @ self.scaling + sum(d @ d for d in self.details))


def _log2_exact(n):
    J = int(n).bit_length() - 1
    if n < 1 or (1 << J) != n:
        raise ValueError(f"signal length {n} is not a power of two")
    return J


def default_depth(n, wavelet):
    """Number of detail levels used when ``nlevels`` is not given.

    Haar decomposes fully. Longer filters stop while the scaling vector is
    still at least as long as the filter (at least one level).
    """
    wf = filter_taps(wavelet)
    J = _log2_exact(n)
    if wf.name == "haar":
        return J
    depth = 0
    while depth < J and (n >> (depth + 1)) >= wf.length:
        depth += 1
    return max(depth, 1)


def _analysis_step(x, h, g):
    n = x.size
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(h.size)[None, :]) % n
    block = x[idx]
    return block @ h, block @ g


def _synthesis_step(a, d, h, g):
    half = a.size
    n = 2 * half
    x = np.zeros(n)
    base = 2 * np.arange(half)
    for k in range(h.size):
        # indices are distinct for a fixed k, so plain fancy assignment is safe
        x[(base + k) % n] += a * h[k] + d * g[k]
    return x


def dwt(signal, wavelet="sym6", nlevels=None):
    """Forward periodized DWT.

    Parameters
    ----------
    signal : array_like
        Real samples; length must be a power of two, at least 8.
    wavelet : str or WaveletFilter
    nlevels : int, optional
        Detail levels to compute (1..log2(n)); defaults to :func:`default_depth`.

    Returns
    -------
    CoefficientPyramid
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise ValueError("signal must be one-dimensional")
    J = _log2_exact(x.size)
    if x.size < 8:
        raise ValueError(f"signal length {x.size} is below the minimum of 8")
    wf = filter_taps(wavelet)
    if nlevels is None:
        nlevels = default_depth(x.size, wf)
    if not 1 <= nlevels <= J:
        raise ValueError(f"nlevels must lie in 1..{J}, got {nlevels}")
    h, g = wf.lowpass, wf.highpass
    details = []
    a = x
    for _ in range(nlevels):
        a, d = _analysis_step(a, h, g)
        details.append(d)
    details.reverse()
    return CoefficientPyramid(a, details, x.size, wf.name)


def idwt(pyramid, wavelet=None):
    """Inverse of :func:`dwt`."""
    wf = filter_taps(wavelet if wavelet is not None else pyramid.filter_name)
    a = np.asarray(pyramid.scaling, dtype=float)
    size = a.size
    for level, d in enumerate(pyramid.details, start=1):
        d = np.asarray(d, dtype=float)
        if d.size != size:
            raise ValueError(
                f"detail level {level} has {d.size} coefficients, expected {size}"
            )
        a = _synthesis_step(a, d, wf.lowpass, wf.highpass)
        size *= 2
    if a.size != pyramid.n:
        raise ValueError(f"pyramid reconstructs {a.size} samples, expected {pyramid.n}")
    return a
