"""Smoothed periodograms and principal components of valuation ratios.

Density normalization: for a demeaned series of length n with DFT ``X_j``
the raw periodogram is ``|X_j|^2 / (pi n)`` at ``w_j = 2 pi j / n``, so that
the integral of the density over (0, pi] equals the sample variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import DatedSeries, Panel, format_float
from .errors import DegeneracyError, ValidationError


@dataclass(frozen=True)
class SpectrumEstimate:
    frequencies: np.ndarray
    density: np.ndarray
    method: dict = field(default_factory=dict)

    @property
    def cycle_length(self) -> np.ndarray:
        """Cycle length in periods of the input grid."""
        return 2.0 * np.pi / self.frequencies

    def integral(self) -> float:
        """Integral of the (real part of the) density over (0, pi]."""
        n = self.method["n"]
        w = np.full(len(self.frequencies), 2.0 * np.pi / n)
        if n % 2 == 0:
            w[-1] *= 0.5  # the Nyquist ordinate has no mirror image
        return float(np.sum(np.real(self.density) * w))

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        cross = np.iscomplexobj(self.density)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("frequency,cycle_length," + ("cospectrum,quadspectrum" if cross else "density") + "\n")
            for w, c, d in zip(self.frequencies, self.cycle_length, self.density):
                vals = [d.real, -d.imag] if cross else [d]
                fh.write(",".join(format_float(v) for v in [w, c, *vals]) + "\n")


def _values(s) -> np.ndarray:
    return np.asarray(s.values if isinstance(s, DatedSeries) else s, dtype=float)


def _daniell(raw_full: np.ndarray, span: int) -> np.ndarray:
    """Circular moving average of the full periodogram over ``span`` ordinates."""
    n = len(raw_full)
    h = span // 2
    if h == 0:
        return raw_full.copy()
    ext = np.concatenate([raw_full[-h:], raw_full, raw_full[:h]])
    c = np.concatenate([[0], np.cumsum(ext)])
    return (c[2 * h + 1:] - c[:-2 * h - 1]) / (2 * h + 1)


def _prepare(n: int, bandwidth):
    if n < 32:
        raise ValidationError(f"need at least 32 observations, got {n}")
    span = int(math.ceil(math.sqrt(n))) if bandwidth is None else int(bandwidth)
    if span < 1 or span >= n / 2:
        raise ValidationError(f"bandwidth must be in [1, n/2), got {span}")
    return span


def _cross_raw(x: np.ndarray, y: np.ndarray, span: int):
    n = len(x)
    X = np.fft.fft(x - x.mean())
    Y = X if y is x else np.fft.fft(y - y.mean())
    raw = X * np.conj(Y) / (np.pi * n)
    # The zero-frequency ordinate vanishes after demeaning.  Fill it with the
    # mean of its smoothing neighbours: it then equals its own smoothed value,
    # so the (0, pi] integral still matches the sample (co)variance exactly.
    h = span // 2
    if h:
        raw[0] = (raw[1:h + 1].sum() + raw[-h:].sum()).real / (2 * h)
    smooth = _daniell(raw, span)
    m = n // 2
    freqs = np.pi * (2.0 * np.arange(1, m + 1) / n)   # exact pi at the Nyquist ordinate
    return freqs, smooth[1:m + 1]


def spectral_density(series, bandwidth: int | None = None) -> SpectrumEstimate:
    """Daniell-smoothed periodogram; ``bandwidth`` is the span in ordinates."""
    x = _values(series)
    span = _prepare(len(x), bandwidth)
    freqs, d = _cross_raw(x, x, span)
    d = np.clip(d.real, 0.0, None)
    return SpectrumEstimate(freqs, d, {"window": "daniell", "span": span, "n": len(x), "taper": "none"})


def cross_spectrum(a, b, bandwidth: int | None = None) -> SpectrumEstimate:
    """Smoothed cross-periodogram; real part is the co-spectrum."""
    x, y = _values(a), _values(b)
    if isinstance(a, DatedSeries) and isinstance(b, DatedSeries) and not np.array_equal(a.dates, b.dates):
        raise ValidationError("series must be aligned")
    if x.shape != y.shape:
        raise ValidationError("series must have equal length")
    span = _prepare(len(x), bandwidth)
    freqs, d = _cross_raw(x, y, span)
    return SpectrumEstimate(freqs, d, {"window": "daniell", "span": span, "n": len(x), "taper": "none"})


def residualize(a, b):
    """Residual of ``a`` on ``b`` with an intercept."""
    x, y = _values(b), _values(a)
    if x.shape != y.shape:
        raise ValidationError("series must be aligned")
    xc = x - x.mean()
    ss = float(xc @ xc)
    if ss <= 1e-300 or np.ptp(x) == 0:
        raise DegeneracyError("regressor is constant", rank=1)
    yc = y - y.mean()
    resid = yc - (float(xc @ yc) / ss) * xc
    if isinstance(a, DatedSeries):
        return DatedSeries(a.dates, resid, a.frequency, f"{a.name}_resid", a.allow_gaps)
    return resid


@dataclass(frozen=True)
class PCAResult:
    ratios: np.ndarray
    loadings: np.ndarray
    names: tuple[str, ...] = ()

    def __iter__(self):
        return iter((self.ratios, self.loadings))

    def to_csv(self, ratio_path, loading_path=None) -> None:
        with open(ratio_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("component,ratio\n")
            for i, r in enumerate(self.ratios, 1):
                fh.write(f"{i},{format_float(r)}\n")
        if loading_path is not None:
            k = self.loadings.shape[1]
            with open(loading_path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write("variable," + ",".join(f"loading{j + 1}" for j in range(k)) + "\n")
                for nm, row in zip(self.names, self.loadings):
                    fh.write(nm + "," + ",".join(format_float(v) for v in row) + "\n")


def pca(panel, standardize: bool = True, names=None) -> PCAResult:
    """Principal components of the panel's columns.

    Loadings are the eigenvector columns; each is signed so its largest
    absolute entry is positive.
    """
    if isinstance(panel, Panel):
        names = tuple(panel.names if names is None else names)
        M = panel.matrix(names)
    else:
        M = np.asarray(panel, dtype=float)
        names = tuple(names or (f"x{j + 1}" for j in range(M.shape[1])))
    n, k = M.shape
    if k < 2 or n <= k:
        raise ValidationError(f"need at least 2 columns and more rows than columns, got {n}x{k}")
    Mc = M - M.mean(axis=0)
    sd = Mc.std(axis=0, ddof=1)
    if standardize:
        if np.any(sd == 0):
            raise ValidationError(f"constant column {names[int(np.argmin(sd))]!r} cannot be standardized")
        Mc = Mc / sd
    C = Mc.T @ Mc / (n - 1)
    w, V = np.linalg.eigh(C)
    order = np.argsort(w)[::-1]
    w = np.clip(w[order], 0.0, None)
    V = V[:, order]
    pick = np.argmax(np.abs(V), axis=0)
    V = V * np.sign(V[pick, np.arange(k)])
    return PCAResult(w / w.sum(), V, names)
