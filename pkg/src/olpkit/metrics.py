"""Spectral-efficiency metrics and empirical distribution summaries.

Per-user spectral efficiencies are pooled across all samples of a dataset
(every user of every drop contributes one value).  Quantiles use the
empirical estimator with linear interpolation; on the set {1, ..., 100}
the median is 50.5 and the 5th percentile is 5.95, which pins the
convention.  Losses against the optimal precoder are relative differences
of the pooled quantiles: ``(q_olp - q_x) / q_olp`` at the median (0.5) and
at the 5th percentile (the "95%-likely" coverage point).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "pooled_quantile",
    "PrecoderMetrics",
    "MetricsReport",
    "build_report",
    "cdf_rows",
]

REFERENCE_PRECODER = "olp"


def pooled_quantile(values, q: float) -> float:
    """Empirical quantile with linear interpolation between order statistics."""
    return float(np.quantile(np.asarray(values, dtype=np.float64), q, method="linear"))


@dataclass(frozen=True)
class PrecoderMetrics:
    """Pooled spectral-efficiency summary for one precoder.

    ``se_pooled`` flattens the per-sample, per-user SE values;
    ``min_sinr_per_sample`` keeps each drop's worst-user SINR.  The loss
    fields are percentages relative to the optimal precoder's pooled
    quantiles and are None when the report lacks the reference.
    """

    name: str
    se_pooled: np.ndarray
    min_sinr_per_sample: np.ndarray
    median_se: float
    p5_se: float
    median_loss_vs_olp_pct: float | None = None
    p95_likely_loss_vs_olp_pct: float | None = None


@dataclass(frozen=True)
class MetricsReport:
    precoders: dict[str, PrecoderMetrics] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out: dict = {"reference": REFERENCE_PRECODER, "precoders": {}}
        for name, pm in self.precoders.items():
            out["precoders"][name] = {
                "median_se": pm.median_se,
                "p5_se": pm.p5_se,
                "median_loss_vs_olp_pct": pm.median_loss_vs_olp_pct,
                "p95_likely_loss_vs_olp_pct": pm.p95_likely_loss_vs_olp_pct,
                "num_pooled_values": int(pm.se_pooled.size),
                "min_sinr_per_sample": pm.min_sinr_per_sample.tolist(),
            }
        return out


def build_report(se: dict[str, np.ndarray], min_sinr: dict[str, np.ndarray]) -> MetricsReport:
    """Build the report from per-precoder ``(num_samples, K)`` SE arrays."""
    reference_quantiles = None
    if REFERENCE_PRECODER in se:
        pooled_ref = np.asarray(se[REFERENCE_PRECODER]).ravel()
        reference_quantiles = (pooled_quantile(pooled_ref, 0.5), pooled_quantile(pooled_ref, 0.05))
    precoders = {}
    for name, values in se.items():
        pooled = np.asarray(values, dtype=np.float64).ravel()
        median = pooled_quantile(pooled, 0.5)
        p5 = pooled_quantile(pooled, 0.05)
        median_loss = p95_loss = None
        if reference_quantiles is not None:
            ref_median, ref_p5 = reference_quantiles
            median_loss = 100.0 * (ref_median - median) / ref_median
            p95_loss = 100.0 * (ref_p5 - p5) / ref_p5
        precoders[name] = PrecoderMetrics(
            name=name,
            se_pooled=pooled,
            min_sinr_per_sample=np.asarray(min_sinr[name], dtype=np.float64),
            median_se=median,
            p5_se=p5,
            median_loss_vs_olp_pct=median_loss,
            p95_likely_loss_vs_olp_pct=p95_loss,
        )
    return MetricsReport(precoders=precoders)


def cdf_rows(report: MetricsReport):
    """Yield ``(precoder, se, cdf)`` rows of the empirical CDFs.

    Values are sorted ascending per precoder with ``cdf = rank / n``, so
    each CDF is non-decreasing and ends at 1.
    """
    for name, pm in report.precoders.items():
        values = np.sort(pm.se_pooled)
        n = values.size
        for rank, value in enumerate(values, start=1):
            yield name, float(value), rank / n
