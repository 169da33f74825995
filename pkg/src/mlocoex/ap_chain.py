"""Stationary distribution and transmit probabilities of the access point's
dual-part backoff chain.

The chain has two halves sharing one window ladder: a multi-link half for
frames addressed to dual-link clients, with restart states (i',0) entered
when the sibling link is busy at counter expiry, and a single-link half for
frames addressed to legacy devices, which is a plain DCF chain. Frame
destinations split gamma / (1 - gamma) between the halves on every success.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SingularModelError
from .params import BackoffParams


@dataclass(frozen=True)
class ApChainInputs:
    p_ap_mld: float   # collision probability of multi-link-half transmissions
    p_ap_sld: float   # collision probability of single-link-half transmissions
    x_ap: float       # sibling link busy by other devices' traffic
    gamma: float      # share of frames addressed to dual-link clients
    backoff: BackoffParams

    def validate(self):
        for name in ("p_ap_mld", "p_ap_sld", "x_ap"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise SingularModelError(f"{name} must lie in [0, 1), got {v}")
        if not 0.0 <= self.gamma <= 1.0:
            raise SingularModelError(f"gamma must lie in [0, 1], got {self.gamma}")


@dataclass(frozen=True)
class ApChainDistribution:
    b_mld: list        # per stage: array of length W_i, counter-indexed
    b_sld: list
    b_mld_prime: np.ndarray  # restart states (i',0), length m + 1
    lambda1: float
    lambda2: float
    b00_mld: float
    b00_sld: float

    def total(self):
        return (
            sum(float(stage.sum()) for stage in self.b_mld)
            + sum(float(stage.sum()) for stage in self.b_sld)
            + float(self.b_mld_prime.sum())
        )


def _stage_weights(p, m):
    """Visit weights of the leftmost column: p^i below the cap, p^m/(1-p) at it."""
    g = np.array([p**i for i in range(m + 1)])
    g[m] = p**m / (1.0 - p)
    return g


def ap_lambdas(inputs):
    """Normalization aggregates of the two chain halves."""
    inputs.validate()
    bk = inputs.backoff
    p, q, x = inputs.p_ap_mld, inputs.p_ap_sld, inputs.x_ap
    c = x / (1.0 - x)
    g_mld = _stage_weights(p, bk.m)
    g_sld = _stage_weights(q, bk.m)
    lambda1 = 1.0 / (1.0 - p)
    lambda2 = 0.0
    for i in range(bk.m + 1):
        w = bk.w(i)
        lambda1 += g_mld[i] * ((w - 1) / 2.0 + c * w / 2.0 + c * w / (w - 1))
        lambda2 += g_sld[i] * (w + 1) / 2.0
    return lambda1, lambda2


def ap_stationary(inputs):
    """Closed-form stationary distribution of the full dual-part chain."""
    inputs.validate()
    bk = inputs.backoff
    p, q, x, gamma = inputs.p_ap_mld, inputs.p_ap_sld, inputs.x_ap, inputs.gamma
    c = x / (1.0 - x)
    lambda1, lambda2 = ap_lambdas(inputs)

    # gamma extremes leave a single active half; the coupled expressions
    # would divide by zero there.
    if gamma == 0.0:
        b00_mld, b00_sld = 0.0, 1.0 / lambda2
    elif gamma == 1.0:
        b00_mld, b00_sld = 1.0 / lambda1, 0.0
    else:
        b00_sld = 1.0 / (lambda1 * gamma / (1.0 - gamma) + lambda2)
        b00_mld = 1.0 / (lambda1 + lambda2 * (1.0 - gamma) / gamma)

    g_mld = _stage_weights(p, bk.m)
    g_sld = _stage_weights(q, bk.m)
    b_mld, b_sld = [], []
    b_prime = np.zeros(bk.m + 1)
    for i in range(bk.m + 1):
        w = bk.w(i)
        k = np.arange(w)
        ramp = (w - k) / w
        stage = ramp * (1.0 + c * w / (w - 1)) * g_mld[i] * b00_mld
        stage[0] = g_mld[i] * b00_mld
        b_mld.append(stage)
        b_prime[i] = c * w / (w - 1) * g_mld[i] * b00_mld
        b_sld.append(ramp * g_sld[i] * b00_sld)
    return ApChainDistribution(
        b_mld=b_mld,
        b_sld=b_sld,
        b_mld_prime=b_prime,
        lambda1=lambda1,
        lambda2=lambda2,
        b00_mld=b00_mld,
        b00_sld=b00_sld,
    )


def ap_tau(inputs):
    """Transmit probabilities (toward dual-link clients, toward legacy)."""
    dist = ap_stationary(inputs)
    tau_mld = dist.b00_mld / (1.0 - inputs.p_ap_mld)
    tau_sld = dist.b00_sld / (1.0 - inputs.p_ap_sld)
    return tau_mld, tau_sld
