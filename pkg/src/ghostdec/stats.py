"""Binomial likelihood intervals for Monte Carlo failure counts.

The reported uncertainty on a rate estimate is the set of rates whose
binomial likelihood stays within a fixed factor of the maximum
likelihood; unlike normal approximations it behaves sensibly at zero
observed failures.
"""

from __future__ import annotations

import math

RELATIVE_PRECISION = 1e-10


def likelihood_interval(k: int, n: int,
                        factor: float = 1000.0) -> tuple[float, float]:
    """Rates whose likelihood is within ``factor`` of the maximum.

    The interval is {p : L(p) >= L(k/n) / factor} for the binomial
    likelihood L(p) = p^k (1-p)^(n-k).  Endpoints at k = 0 or k = n are
    closed form; otherwise they are found by bisection to relative
    precision 1e-10.
    """
    if n <= 0:
        raise ValueError("need at least one sample")
    if not 0 <= k <= n:
        raise ValueError(f"failure count {k} outside [0, {n}]")
    if factor <= 1.0:
        raise ValueError("likelihood factor must exceed 1")
    if k == 0:
        return 0.0, 1.0 - factor ** (-1.0 / n)
    if k == n:
        return factor ** (-1.0 / n), 1.0
    p_hat = k / n
    log_max = k * math.log(p_hat) + (n - k) * math.log(1.0 - p_hat)
    cut = log_max - math.log(factor)

    def above(p: float) -> bool:
        return k * math.log(p) + (n - k) * math.log(1.0 - p) >= cut

    def bisect(lo: float, hi: float, above_at_hi: bool) -> float:
        # invariant: exactly one bracket endpoint satisfies ``above``
        while hi - lo > RELATIVE_PRECISION * max(hi, 1e-300):
            mid = 0.5 * (lo + hi)
            if above(mid) == above_at_hi:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    tiny = p_hat * 1e-18
    lo = bisect(tiny, p_hat, above_at_hi=True)
    hi = bisect(p_hat, 1.0 - (1.0 - p_hat) * 1e-18, above_at_hi=False)
    return lo, hi
