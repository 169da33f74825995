"""Stationary distribution and transmit probability of a dual-link client's
backoff chain.

Besides the usual (stage, counter) states the chain carries, per stage, a
restart state (i',0) entered when either link is busy at counter expiry and a
wait state (i'',0) where the counter holds at zero until the sibling link's
counter also reaches zero (probability Y of surviving the wait). The wait
state's residence couples the chain to its own transmit probability, so the
parametric form takes tau_mld_prev as an input and a small inner iteration
resolves the self-consistent value.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, SingularModelError
from .params import BackoffParams


@dataclass(frozen=True)
class NonApChainInputs:
    p_mld: float          # case-specific collision probability
    x_mld: float          # either link busy by other devices
    y: float              # wait at zero survives until the sibling expires
    tau_mld_prev: float   # transmit probability used inside the wait-state terms
    backoff: BackoffParams

    def validate(self):
        for name in ("p_mld", "x_mld"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise SingularModelError(f"{name} must lie in [0, 1), got {v}")
        if not 0.0 <= self.y <= 1.0:
            raise SingularModelError(f"y must lie in [0, 1], got {self.y}")
        if not 0.0 <= self.tau_mld_prev <= 1.0:
            raise SingularModelError("tau_mld_prev must lie in [0, 1]")
        if 1.0 - (1.0 - self.tau_mld_prev) * (1.0 - self.y) <= 0.0:
            raise SingularModelError("wait-state residence diverges: tau = 0 with y = 0")


@dataclass(frozen=True)
class NonApChainDistribution:
    b: list                  # per stage: array of length W_i
    b_prime: np.ndarray      # restart states (i',0)
    b_dprime: np.ndarray     # wait states (i'',0)
    lambda3: float
    b00: float

    def total(self):
        return (
            sum(float(stage.sum()) for stage in self.b)
            + float(self.b_prime.sum())
            + float(self.b_dprime.sum())
        )


def _stage_weights(p, m):
    g = np.array([p**i for i in range(m + 1)])
    g[m] = p**m / (1.0 - p)
    return g


def nonap_stationary(inputs):
    """Closed-form stationary distribution for one coexistence case."""
    inputs.validate()
    bk = inputs.backoff
    p, x, y, tau = inputs.p_mld, inputs.x_mld, inputs.y, inputs.tau_mld_prev
    c = x / (1.0 - x)
    # zeta is the wait-state mass per unit of column mass; lambda3 folds in
    # the broken-wait share. Computing zeta directly keeps y = 1 regular.
    zeta = (1.0 - tau) / (1.0 - (1.0 - tau) * (1.0 - y))
    lambda3 = zeta * (1.0 - y) / (1.0 - x)

    g = _stage_weights(p, bk.m)
    norm = 1.0 / (1.0 - p) + zeta / (1.0 - p)
    for i in range(bk.m + 1):
        w = bk.w(i)
        norm += g[i] * ((w - 1) / 2.0 + (c + lambda3) * w / 2.0)
        norm += g[i] * (c * w / (w - 1) + lambda3 * (1.0 / (w - 1) + x))
    b00 = 1.0 / norm

    b = []
    b_prime = np.zeros(bk.m + 1)
    b_dprime = np.zeros(bk.m + 1)
    for i in range(bk.m + 1):
        w = bk.w(i)
        k = np.arange(w)
        stage = (w - k) / w * (1.0 + (c + lambda3) * w / (w - 1)) * g[i] * b00
        stage[0] = g[i] * b00
        b.append(stage)
        b_prime[i] = (c * w / (w - 1) + lambda3 * (1.0 / (w - 1) + x)) * g[i] * b00
        b_dprime[i] = zeta * g[i] * b00
    return NonApChainDistribution(
        b=b, b_prime=b_prime, b_dprime=b_dprime, lambda3=lambda3, b00=b00
    )


def nonap_tau(inputs):
    """Transmit probability at a fixed tau_mld_prev."""
    dist = nonap_stationary(inputs)
    return dist.b00 / (1.0 - inputs.p_mld)


def nonap_tau_selfconsistent(p_mld, x_mld, y, backoff, tol=1e-10, max_iters=10_000):
    """Resolve tau appearing inside its own wait-state terms.

    Damped iteration from the zero-collision seed 2/(W_0 + 1); the map is a
    contraction for all feasible inputs encountered in practice.
    """
    tau = 2.0 / (backoff.w0 + 1.0)
    for _ in range(max_iters):
        nxt = nonap_tau(
            NonApChainInputs(
                p_mld=p_mld, x_mld=x_mld, y=y, tau_mld_prev=tau, backoff=backoff
            )
        )
        if abs(nxt - tau) < tol:
            return nxt
        tau = 0.5 * tau + 0.5 * nxt
    raise ConvergenceError(
        f"inner tau iteration stalled at residual {abs(nxt - tau):.3e}",
        residual=abs(nxt - tau),
    )
