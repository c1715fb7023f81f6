"""Empirical tail-probability statistics over trial records."""

from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from src.core.records import TrialRecord


def clopper_pearson_upper(failures: int, trials: int, confidence: float = 0.95) -> float:
    """Exact one-sided upper confidence bound for a binomial proportion."""
    if trials < 1:
        raise ValueError("need at least one trial")
    if not 0 <= failures <= trials:
        raise ValueError(f"failure count {failures} outside [0, {trials}]")
    if failures == trials:
        return 1.0
    return float(stats.beta.ppf(confidence, failures + 1, trials - failures))


@dataclass(frozen=True)
class SummaryReport:
    method: str
    epsilon_target: float
    replications: int
    failures: int
    errors: int
    failure_rate: float
    upper_95: float
    upper_99: float
    mean_samples: float
    median_samples: float
    nominal_p: Optional[float]
    bound: str

    def to_dict(self) -> Dict:
        return asdict(self)

    @property
    def within_nominal(self) -> Optional[bool]:
        if self.nominal_p is None:
            return None
        return self.upper_95 <= self.nominal_p


def empirical_failure(
    records: Sequence[TrialRecord],
    eps_target: Optional[float] = None,
    nominal_p: Optional[float] = None,
    bound: str = "",
) -> SummaryReport:
    """Failure rate P(gap > eps) with Clopper-Pearson bounds; errored trials count as failures.

    ``eps_target`` defaults to each record's own target.
    """
    if not records:
        raise ValueError("cannot summarize an empty record list")
    failed = [
        r.error is not None or r.final_gap > (r.epsilon_target if eps_target is None else eps_target)
        for r in records
    ]
    k, n = int(sum(failed)), len(records)
    samples = np.array([r.samples_used for r in records], dtype=float)
    methods = sorted({r.method.value for r in records})
    return SummaryReport(
        method=",".join(methods),
        epsilon_target=float(records[0].epsilon_target if eps_target is None else eps_target),
        replications=n,
        failures=k,
        errors=sum(1 for r in records if r.error is not None),
        failure_rate=k / n,
        upper_95=clopper_pearson_upper(k, n, 0.95),
        upper_99=clopper_pearson_upper(k, n, 0.99),
        mean_samples=float(samples.mean()),
        median_samples=float(np.median(samples)),
        nominal_p=nominal_p,
        bound=bound,
    )


def format_report(report: SummaryReport) -> str:
    lines: List[str] = [
        f"method       {report.method}",
        f"target eps   {report.epsilon_target:.6g}",
        f"failures     {report.failures}/{report.replications} (errors: {report.errors})",
        f"rate         {report.failure_rate:.4f}  95% upper {report.upper_95:.4f}  99% upper {report.upper_99:.4f}",
        f"samples      mean {report.mean_samples:.6g}  median {report.median_samples:.6g}",
    ]
    if report.nominal_p is not None:
        verdict = "ok" if report.within_nominal else "EXCEEDS"
        lines.append(f"nominal p    {report.nominal_p:.4g} ({report.bound}) -> {verdict}")
    return "\n".join(lines)
