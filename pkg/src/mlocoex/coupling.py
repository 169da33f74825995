"""Cross-device per-slot quantities tying the chains together.

Case 1 covers slots in which the access point's head-of-line frame targets a
legacy device, case 2 those targeting a dual-link client. Event probabilities
partition each case's slot space; the last collision bucket is defined as the
residual so the partition is exact by construction.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import InconsistencyError

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class TauSet:
    tau_ap_sld: float   # AP transmitting a legacy-bound frame (case 1)
    tau_ap_mld: float   # AP transmitting a client-bound frame (case 2)
    tau_mld_1: float
    tau_mld_2: float
    tau_sld_1: float
    tau_sld_2: float


@dataclass(frozen=True)
class PSet:
    p_ap_sld: float
    p_ap_mld: float
    p_mld_1: float
    p_mld_2: float
    p_sld_1: float
    p_sld_2: float


@dataclass(frozen=True)
class SlotEventProfile:
    case: int
    p_idle: float
    tau1a: float   # AP alone, no same-destination pairing (case 1: the whole AP event)
    tau1b: float   # AP alone on both links to one client (case 2 only)
    tau2: float    # exactly one legacy device
    tau3: float    # exactly one dual-link client
    p_c1: float    # AP involved in a collision
    p_c2: float    # residual: collision among non-AP devices
    phi: float     # expected slot duration [us]

    @property
    def tau1(self):
        return self.tau1a + self.tau1b


@dataclass(frozen=True)
class BusyAlign:
    x_ap: float
    x_mld: float
    y_case1: float
    y_case2: float


def collision_probs(taus, n_mld, n_sld):
    """Per-device collision probabilities for both cases."""
    sld1 = (1.0 - taus.tau_sld_1) ** n_sld
    mld1 = (1.0 - taus.tau_mld_1) ** n_mld
    sld2 = (1.0 - taus.tau_sld_2) ** n_sld
    mld2 = (1.0 - taus.tau_mld_2) ** n_mld
    return PSet(
        p_ap_sld=1.0 - sld1 * mld1,
        p_ap_mld=1.0 - sld2 * mld2,
        p_mld_1=1.0 - (1.0 - taus.tau_ap_sld) * sld1 * _drop(mld1, taus.tau_mld_1, n_mld),
        p_mld_2=1.0 - (1.0 - taus.tau_ap_mld) * sld2 * _drop(mld2, taus.tau_mld_2, n_mld),
        p_sld_1=1.0 - (1.0 - taus.tau_ap_sld) * _drop(sld1, taus.tau_sld_1, n_sld) * mld1,
        p_sld_2=1.0 - (1.0 - taus.tau_ap_mld) * _drop(sld2, taus.tau_sld_2, n_sld) * mld2,
    )


def _drop(power, tau, n):
    """(1 - tau)^(n-1) given (1 - tau)^n, valid for n = 0 as well."""
    if n == 0:
        return 1.0
    return (1.0 - tau) ** (n - 1)


def event_profile(taus, ps, n_mld, n_sld, durations, strict_paper=False, check=True):
    """Slot-event probabilities and expected slot duration for both cases.

    With strict_paper the case-2 lone-AP events drop their no-collision factor
    and the case-1 lone-AP event uses the client-bound transmit probability,
    reproducing the source formulas verbatim.
    """
    te, ts, tc = durations.t_empty, durations.t_success, durations.t_collision

    p_idle1 = (
        (1.0 - taus.tau_ap_sld)
        * (1.0 - taus.tau_sld_1) ** n_sld
        * (1.0 - taus.tau_mld_1) ** n_mld
    )
    if strict_paper:
        tau1 = taus.tau_ap_mld * (1.0 - ps.p_ap_sld)
    else:
        tau1 = taus.tau_ap_sld * (1.0 - ps.p_ap_sld)
    tau2_1 = n_sld * taus.tau_sld_1 * (1.0 - ps.p_sld_1)
    tau3_1 = n_mld * taus.tau_mld_1 * (1.0 - ps.p_mld_1)
    pc1_1 = taus.tau_ap_sld * ps.p_ap_sld
    pc2_1 = 1.0 - p_idle1 - (tau1 + tau2_1 + tau3_1) - pc1_1
    case1 = _profile(1, p_idle1, tau1, 0.0, tau2_1, tau3_1, pc1_1, pc2_1, te, ts, tc, check)

    p_idle2 = (
        (1.0 - taus.tau_ap_mld)
        * (1.0 - taus.tau_sld_2) ** n_sld
        * (1.0 - taus.tau_mld_2) ** n_mld
    )
    if n_mld > 0 and taus.tau_ap_mld > 0.0:
        pair = taus.tau_ap_mld / n_mld
        alone = 1.0 if strict_paper else (1.0 - ps.p_ap_mld)
        tau1a = taus.tau_ap_mld * alone * (1.0 - pair)
        tau1b = taus.tau_ap_mld * alone * pair
    else:
        tau1a = tau1b = 0.0
    tau2_2 = n_sld * taus.tau_sld_2 * (1.0 - ps.p_sld_2)
    tau3_2 = n_mld * taus.tau_mld_2 * (1.0 - ps.p_mld_2)
    pc1_2 = taus.tau_ap_mld * ps.p_ap_mld
    pc2_2 = 1.0 - p_idle2 - (tau1a + tau1b + tau2_2 + tau3_2) - pc1_2
    case2 = _profile(2, p_idle2, tau1a, tau1b, tau2_2, tau3_2, pc1_2, pc2_2, te, ts, tc, check)
    return case1, case2


def _profile(case, p_idle, tau1a, tau1b, tau2, tau3, pc1, pc2, te, ts, tc, check):
    if check and pc2 < -RESIDUAL_TOL:
        raise InconsistencyError(
            f"case {case} residual collision probability {pc2:.3e} < 0: "
            "tau/p inputs are not a valid operating point"
        )
    pc2 = max(pc2, 0.0)
    phi = (
        p_idle * te
        + (tau1a + tau1b + tau2 + tau3) * (ts + te)
        + (pc1 + pc2) * (tc + te)
    )
    return SlotEventProfile(
        case=case, p_idle=p_idle, tau1a=tau1a, tau1b=tau1b,
        tau2=tau2, tau3=tau3, p_c1=pc1, p_c2=pc2, phi=phi,
    )


def busy_probs(profile1, profile2, taus, ps, gamma, durations, n_mld, n_sld, check=True):
    """Sibling-link busy probabilities seen by the AP and by a client.

    Each is the slot-time share left after removing idle air time and the
    observing device's own success and collision airtime, mixed over the
    sibling link's case by gamma. Every slot of the phi construction carries
    exactly one t_empty of idle air (the event probabilities sum to one), so
    the idle deduction is t_empty itself; deducting only p_idle * t_empty
    would leave the trailing empty slot of the device's own transmissions
    counted as busy-by-others.
    """
    te, ts, tc = durations.t_empty, durations.t_success, durations.t_collision

    busy_ap_1 = (
        profile1.phi
        - te
        - taus.tau_ap_sld * (1.0 - ps.p_ap_sld) * ts
        - taus.tau_ap_sld * ps.p_ap_sld * tc
    )
    busy_ap_2 = (
        profile2.phi
        - te
        - taus.tau_ap_mld * (1.0 - ps.p_ap_mld) * ts
        - taus.tau_ap_mld * ps.p_ap_mld * tc
    )
    # at least one of the other non-AP devices transmits alongside
    others1 = 1.0 - _drop((1.0 - taus.tau_mld_1) ** n_mld, taus.tau_mld_1, n_mld) * (
        1.0 - taus.tau_sld_1
    ) ** n_sld
    others2 = 1.0 - _drop((1.0 - taus.tau_mld_2) ** n_mld, taus.tau_mld_2, n_mld) * (
        1.0 - taus.tau_sld_2
    ) ** n_sld
    busy_mld_1 = (
        profile1.phi
        - te
        - taus.tau_mld_1 * (1.0 - ps.p_mld_1) * ts
        - taus.tau_ap_sld * taus.tau_mld_1 * tc
        - (1.0 - taus.tau_ap_sld) * taus.tau_mld_1 * others1 * tc
    )
    busy_mld_2 = (
        profile2.phi
        - te
        - taus.tau_mld_2 * (1.0 - ps.p_mld_2) * ts
        - taus.tau_ap_mld * taus.tau_mld_2 * tc
        - (1.0 - taus.tau_ap_mld) * taus.tau_mld_2 * others2 * tc
    )

    x_ap = _mix_share(busy_ap_1, busy_ap_2, profile1.phi, profile2.phi, gamma, "x_ap", check)
    x_mld = _mix_share(busy_mld_1, busy_mld_2, profile1.phi, profile2.phi, gamma, "x_mld", check)
    return x_ap, x_mld


def _mix_share(busy1, busy2, phi1, phi2, gamma, name, check):
    floor1 = -RESIDUAL_TOL * phi1
    floor2 = -RESIDUAL_TOL * phi2
    if check and (busy1 < floor1 or busy2 < floor2):
        raise InconsistencyError(f"negative busy time while deriving {name}")
    if busy1 < 0.0 or busy2 < 0.0:
        log.debug("clamping slightly negative busy time for %s", name)
    share = (1.0 - gamma) * max(busy1, 0.0) / phi1 + gamma * max(busy2, 0.0) / phi2
    if share > 1.0:
        if check and share > 1.0 + RESIDUAL_TOL:
            raise InconsistencyError(f"{name} = {share} exceeds 1")
        log.debug("clamping %s = %s to 1", name, share)
        share = 1.0
    return share


def alignment_probs(dist_case1, dist_case2, p_idle_1, p_idle_2, gamma, backoff, check=True):
    """Probability that a wait at counter zero survives until the sibling
    link's counter reaches zero, for a waiting link in case 1 and in case 2.

    Sums, over wait states (i'',0) and the sibling's (stage, counter j)
    states, the chance of j idle slots on both links, mixing the sibling's
    case by gamma. Counters beyond W_0 - 1 only contribute for stages that
    can hold them, and then only from wait stages at least as deep.
    """
    m = backoff.m
    wm = backoff.w(m)

    mix = np.zeros(wm)
    p1 = np.zeros(wm)
    p2 = np.zeros(wm)
    j = np.arange(1, wm)
    with np.errstate(under="ignore"):
        p1[1:] = p_idle_1 ** j
        p2[1:] = p_idle_2 ** j
    for i in range(m + 1):
        w = backoff.w(i)
        mix[1:w] += (1.0 - gamma) * dist_case1.b[i][1:] * p1[1:w]
        mix[1:w] += gamma * dist_case2.b[i][1:] * p2[1:w]

    ys = []
    for dist, p_self in ((dist_case1, p1), (dist_case2, p2)):
        total = dist.b_dprime.sum() * float(np.dot(p_self[1 : backoff.w0], mix[1 : backoff.w0]))
        for k in range(1, m + 1):
            lo, hi = backoff.w(k - 1), backoff.w(k)
            tail = dist.b_dprime[k:].sum()
            total += tail * float(np.dot(p_self[lo:hi], mix[lo:hi]))
        if check and not -RESIDUAL_TOL <= total <= 1.0 + RESIDUAL_TOL:
            raise InconsistencyError(f"alignment probability {total} outside [0, 1]")
        ys.append(min(max(total, 0.0), 1.0))
    return ys[0], ys[1]
