"""Transmit probability of legacy single-link devices (classic DCF model)."""

from dataclasses import dataclass

from .errors import ConfigError, SingularModelError


@dataclass(frozen=True)
class SldTau:
    tau_case1: float
    tau_case2: float


def sld_tau(p, cw_min, m, allow_oversize=False):
    """Per-slot transmit probability of a saturated legacy device.

    Evaluates [ (1 - p - p(2p)^m)/(1 - 2p) * (cw_min + 1)/2 + 1/2 ]^{-1}
    through the finite geometric sum (1-p)*sum_{i<m}(2p)^i + (2p)^m, which is
    exact at the removable singularity p = 1/2.
    """
    if not 0.0 <= p < 1.0:
        raise SingularModelError(f"collision probability must lie in [0, 1), got {p}")
    if cw_min < 1 or m < 1:
        raise ConfigError("cw_min and m must be >= 1")
    geo = 0.0
    term = 1.0
    for _ in range(m):
        geo += term
        term *= 2.0 * p
    bracket = ((1.0 - p) * geo + term) * (cw_min + 1) / 2.0 + 0.5
    tau = 1.0 / bracket
    if tau > 1.0:
        if not allow_oversize:
            raise SingularModelError(
                f"tau = {tau:.6f} > 1 for p={p}, cw_min={cw_min}: outside model validity"
            )
        tau = 1.0
    return tau
