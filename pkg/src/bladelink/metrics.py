"""Distortion and compression metrics for codec evaluation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass, fields
from typing import NamedTuple

import numpy as np

from .audio import cutoff_bin
from .core import CompressedPacket, SampleBlock

DEFAULT_PEAKS = 10
DEFAULT_PEAK_TOL = 1
MAPE_FLOOR_REL = 1e-6

CSV_COLUMNS = ("dataset", "codec", "cr", "nrmse", "nmae", "mape_pct", "peak_mismatch_pct")


class UndefinedNormalizationError(ValueError):
    """The original sequence is constant, so range normalization is undefined."""


def _pair(original, reconstructed) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(original, dtype=np.float64).reshape(-1)
    b = np.asarray(reconstructed, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("need at least two samples")
    return a, b


def _range(a: np.ndarray) -> float:
    span = float(a.max() - a.min())
    if span == 0:
        raise UndefinedNormalizationError("original sequence is constant")
    return span


def nrmse(original, reconstructed) -> float:
    """Root mean square error divided by the range of the original."""
    a, b = _pair(original, reconstructed)
    return math.sqrt(float(np.mean((a - b) ** 2))) / _range(a)


def nmae(original, reconstructed) -> float:
    """Mean absolute error divided by the range of the original."""
    a, b = _pair(original, reconstructed)
    return float(np.mean(np.abs(a - b))) / _range(a)


def _magnitudes(spec) -> np.ndarray:
    coeffs = getattr(spec, "coefficients", spec)
    return np.abs(np.asarray(coeffs))


def spectral_mape(original_spec, reconstructed_spec, floor: float | None = None) -> float:
    """Mean absolute percentage error of coefficient magnitudes.

    Only bins whose original magnitude exceeds ``floor`` count; the default
    floor is 1e-6 of the largest original magnitude.
    """
    o, r = _magnitudes(original_spec), _magnitudes(reconstructed_spec)
    if o.shape != r.shape:
        raise ValueError("spectra cover different bin ranges")
    if floor is None:
        floor = MAPE_FLOOR_REL * float(o.max(initial=0.0))
    keep = o > floor
    if not keep.any():
        raise ValueError("no bin exceeds the magnitude floor")
    return float(np.mean(np.abs(o[keep] - r[keep]) / o[keep]) * 100.0)


def find_peaks(magnitude, k: int) -> np.ndarray:
    """Bins of the ``k`` largest strict local maxima, ties toward lower bins."""
    m = np.asarray(magnitude, dtype=np.float64)
    if m.size < 3:
        return np.zeros(0, dtype=np.int64)
    interior = np.flatnonzero((m[1:-1] > m[:-2]) & (m[1:-1] > m[2:])) + 1
    order = np.lexsort((interior, -m[interior]))
    return interior[order[:k]]


class PeakMismatch(NamedTuple):
    percent: float
    k: int


def peak_location_mismatch(original_spec, reconstructed_spec, k: int = DEFAULT_PEAKS,
                           tol: int = DEFAULT_PEAK_TOL) -> PeakMismatch:
    """Share of the original's top-``k`` peaks with no reconstructed peak within ``tol`` bins.

    If the original has fewer than ``k`` local maxima, ``k`` is reduced and
    the value actually used is returned alongside the percentage.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    o, r = _magnitudes(original_spec), _magnitudes(reconstructed_spec)
    po = find_peaks(o, k)
    if po.size == 0:
        raise ValueError("original spectrum has no local maxima")
    pr = find_peaks(r, po.size)
    if pr.size == 0:
        return PeakMismatch(100.0, int(po.size))
    dist = np.abs(po[:, None] - pr[None, :]).min(axis=1)
    return PeakMismatch(float(np.count_nonzero(dist > tol)) * 100.0 / po.size, int(po.size))


def compression_ratio(packet: CompressedPacket) -> float:
    return packet.original_size / packet.size


@dataclass
class MetricReport:
    dataset: str
    codec: str
    compression_ratio: float
    nrmse: float
    nmae: float
    spectral_mape: float
    peak_mismatch: float

    def row(self) -> list[str]:
        return [self.dataset, self.codec] + [_fmt(v) for v in astuple(self)[2:]]


def _fmt(v: float) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.6g}"


def _nanmean(values) -> float:
    values = [v for v in values if not math.isnan(v)]
    return float(np.mean(values)) if values else math.nan


def compare_blocks(original: SampleBlock, reconstructed: SampleBlock, *, dataset: str = "",
                   codec: str = "", cr: float = math.nan, cutoff: float | None = None,
                   k: int = DEFAULT_PEAKS, tol: int = DEFAULT_PEAK_TOL) -> MetricReport:
    """Per-block report, averaged over channels.

    Spectral metrics use the half spectrum from ``cutoff`` upward (both
    sides filtered identically); channels where a metric is undefined are
    skipped for that metric.
    """
    if original.data.shape != reconstructed.data.shape:
        raise ValueError(f"shape mismatch {original.data.shape} vs {reconstructed.data.shape}")
    n = original.samples_per_channel
    k0 = cutoff_bin(n, original.sample_rate, cutoff) if cutoff else 0
    rm, ma, mape, peaks = [], [], [], []
    for a, b in zip(original.data, reconstructed.data):
        try:
            rm.append(nrmse(a, b))
            ma.append(nmae(a, b))
        except UndefinedNormalizationError:
            pass
        sa = np.fft.rfft(a.astype(np.float64))[k0:]
        sb = np.fft.rfft(b.astype(np.float64))[k0:]
        try:
            mape.append(spectral_mape(sa, sb))
        except ValueError:
            pass
        try:
            peaks.append(peak_location_mismatch(sa, sb, k, tol).percent)
        except ValueError:
            pass
    return MetricReport(dataset, codec, cr, _nanmean(rm), _nanmean(ma), _nanmean(mape), _nanmean(peaks))


def mean_report(reports: list[MetricReport], dataset: str = "mean") -> MetricReport:
    first = reports[0] if reports else MetricReport(dataset, "", math.nan, math.nan, math.nan, math.nan, math.nan)
    cols = [f.name for f in fields(MetricReport)][2:]
    means = [_nanmean([getattr(r, c) for r in reports]) for c in cols]
    return MetricReport(dataset, first.codec, *means)


def reports_to_csv(reports: list[MetricReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()
