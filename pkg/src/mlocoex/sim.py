"""Slot-level discrete-event simulator of the dual-link channel-access rules.

Both links share a common slot grid of t_empty ticks. A transmission started
at a grid boundary occupies ceil(duration / t_empty) grid slots for contention
purposes, while per-link time accounting uses the exact integer-nanosecond
event durations: an idle grid slot contributes t_empty, a transmission its
exact airtime. Busy plus idle time therefore equals the accounted elapsed
time per link exactly, and measured throughput is free of grid-rounding bias.

Station rules under saturation:

* legacy devices run plain DCF on their link: decrement on idle slots, freeze
  on busy ones, transmit at counter zero;
* each AP link transmits at counter zero unless the sibling link is busy with
  other devices' traffic (then it redraws within the current stage); an
  ongoing own downlink on the sibling link blocks nothing, and one to the
  same client is joined with a truncated frame ending at the same instant;
* each client link reaching counter zero waits there until the device's other
  link also reaches zero, restarts (same stage) as soon as either link turns
  busy, and otherwise fires simultaneously on both links with a common start
  and data end time.
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .params import compute_slot_durations
from .solver import ThroughputReport

LEGACY, AP, NONAP = "legacy", "ap", "nonap"

TRACE_HEADER = ("slot", "link", "event", "kind", "device", "stage", "detail")
STATS_HEADER = (
    "kind", "device", "link", "attempts", "successes", "collisions",
    "bits_ok", "bits_ok_to_sld", "bits_ok_to_mld", "busy_restarts", "waits_broken",
)
LINK_HEADER = ("link", "busy_ns", "idle_ns", "elapsed_ns", "slots")


@dataclass
class _Counters:
    attempts: int = 0
    successes: int = 0
    collisions: int = 0
    bits_ok: int = 0
    bits_ok_to_sld: int = 0   # AP only: downlink split by destination kind
    bits_ok_to_mld: int = 0
    busy_restarts: int = 0
    waits_broken: int = 0


@dataclass
class SimStats:
    devices: dict                 # (kind, device, link) -> _Counters
    busy_ns: list
    idle_ns: list
    elapsed_ns: list
    slots: int
    nstr_violations: int
    align_violations: int
    trace: list
    meta: dict = field(default_factory=dict)


class _Station:
    __slots__ = (
        "kind", "device", "link", "stage", "k", "waiting", "wait_fresh",
        "rng", "dest_kind", "dest_id", "counters",
    )

    def __init__(self, kind, device, link, rng, counters):
        self.kind = kind
        self.device = device
        self.link = link
        self.stage = 0
        self.k = 0
        self.waiting = False
        self.wait_fresh = False
        self.rng = rng
        self.dest_kind = None
        self.dest_id = -1
        self.counters = counters


def _make_rng(seed, kind_idx, device, link):
    sid = (kind_idx << 24) | (device << 4) | link
    return np.random.Generator(np.random.Philox(key=[seed, sid]))


def run_sim(cfg, seed, duration_s, ap_mode="mld", conservative_wait=True, trace_limit=0):
    """Simulate the scenario for `duration_s` virtual seconds.

    ap_mode selects the access point behaviour: "mld" follows the dual-link
    rules, "legacy" contends as one more plain DCF station per link, "off"
    removes it. conservative_wait=False keeps a client's wait alive when the
    busyness on a link is the AP's own downlink to that very client.
    """
    if duration_s < 0:
        raise ConfigError("duration must be >= 0")
    phy, bk = cfg.phy, cfg.backoff
    slot_us = compute_slot_durations(phy)
    te = round(phy.t_empty * 1000)             # [ns]
    sifs = round(phy.sifs * 1000)
    tack = round(phy.t_ack * 1000)
    tphy = round(phy.t_phy * 1000)
    sigma = round(phy.sigma * 1000)
    data_full = round(slot_us.t_data * 1000)
    mpdu_bits = phy.l_ampdu / phy.n_a

    end_slot = math.ceil(duration_s * 1e9 / te)

    devices = {}
    stations = ([], [])  # per link

    def add(kind, kind_idx, device, link):
        counters = _Counters()
        devices[(kind, device, link)] = counters
        st = _Station(kind, device, link, _make_rng(seed, kind_idx, device, link), counters)
        st.k = int(st.rng.integers(0, bk.w0))
        stations[link].append(st)
        return st

    ap = [None, None]
    if ap_mode != "off":
        for link in (0, 1):
            ap[link] = add(AP, 0, 0, link)
            if ap_mode == "mld":
                _draw_dest(ap[link], cfg)
            else:
                ap[link].dest_kind = LEGACY
    for link in (0, 1):
        for j in range(cfg.n_sld):
            add(LEGACY, 1, j, link)
    nonap = []
    for d in range(cfg.n_mld):
        pair = [add(NONAP, 2, d, 0), add(NONAP, 2, d, 1)]
        nonap.append(pair)

    busy_until = [0, 0]
    # ongoing AP downlink per link: (dest_kind, dest_id, data_end_slot, busy_end_slot)
    ap_dl = [None, None]
    busy_ns = [0, 0]
    idle_ns = [0, 0]
    nstr_violations = 0
    align_violations = 0
    trace = []

    def log_event(slot, link, event, st, detail=""):
        if len(trace) < trace_limit:
            trace.append((slot, link, event, st.kind, st.device, st.stage, detail))

    def redraw(st, escalate):
        if escalate:
            st.stage = min(st.stage + 1, bk.m)
        st.k = int(st.rng.integers(0, bk.w(st.stage)))
        st.waiting = False
        st.wait_fresh = False

    def reset_after_success(st):
        st.stage = 0
        st.k = int(st.rng.integers(0, bk.w0))
        st.waiting = False
        st.wait_fresh = False
        if st.kind == AP and ap_mode == "mld":
            _draw_dest(st, cfg)

    def fit_mpdus(window_ns):
        """Largest MPDU count whose airtime fits the alignment window."""
        if window_ns <= tphy:
            return 0
        symbols = (window_ns - tphy) // sigma
        bits = symbols * phy.r_su
        return min(phy.n_a, int(bits // mpdu_bits))

    s = 0
    while s < end_slot:
        link_busy = (busy_until[0] > s, busy_until[1] > s)

        # resolve stations stuck at counter zero facing a busy link
        for link in (0, 1):
            for st in stations[link]:
                if st.k != 0:
                    continue
                if st.kind == NONAP and st.waiting:
                    own, other = link_busy[link], link_busy[1 - link]
                    blocked = own or other
                    if blocked and not conservative_wait:
                        blocked = _busy_by_others(
                            link, 1 - link, link_busy, ap_dl, st, s
                        )
                    if blocked:
                        if st.wait_fresh:
                            st.counters.busy_restarts += 1
                            log_event(s, link, "restart", st)
                        else:
                            st.counters.waits_broken += 1
                            log_event(s, link, "wait_break", st)
                        redraw(st, escalate=False)
                elif st.kind == AP and ap_mode == "mld" and not link_busy[link]:
                    if link_busy[1 - link]:
                        dl = ap_dl[1 - link]
                        own_dl = dl is not None and dl[3] > s
                        if not own_dl:
                            st.counters.busy_restarts += 1
                            log_event(s, link, "restart", st)
                            redraw(st, escalate=False)

        # collect transmission starts on idle links
        starts = ([], [])  # per link: (station, data_ns, bits, dest_kind)
        for link in (0, 1):
            if link_busy[link]:
                continue
            for st in stations[link]:
                if st.k != 0:
                    continue
                if st.kind == LEGACY:
                    starts[link].append((st, data_full, phy.payload_bits, None))
                elif st.kind == AP:
                    if ap_mode != "mld":
                        starts[link].append((st, data_full, phy.payload_bits, LEGACY))
                        continue
                    if not link_busy[1 - link]:
                        starts[link].append(
                            (st, data_full, phy.payload_bits, st.dest_kind)
                        )
                        continue
                    dl = ap_dl[1 - link]
                    if dl is None or dl[3] <= s:
                        continue  # blocked by others, handled above
                    if dl[0] == st.dest_kind == NONAP and dl[1] == st.dest_id:
                        window = (dl[2] - s) * te
                        q = fit_mpdus(window)
                        if q == 0:
                            st.counters.busy_restarts += 1
                            log_event(s, link, "restart", st, "no_fit")
                            redraw(st, escalate=False)
                            continue
                        if s + window // te != dl[2]:
                            align_violations += 1
                        starts[link].append((st, window, int(q * phy.l_d * 8), NONAP))
                        log_event(s, link, "aligned_join", st, f"q={q}")
                    else:
                        starts[link].append(
                            (st, data_full, phy.payload_bits, st.dest_kind)
                        )
                # waiting clients fire only through the pair path below

        # simultaneous dual-link uplink of a client whose both counters are zero
        for pair in nonap:
            a, b = pair
            if (
                a.k == 0 and b.k == 0 and a.waiting and b.waiting
                and not link_busy[0] and not link_busy[1]
            ):
                starts[0].append((a, data_full, phy.payload_bits, None))
                starts[1].append((b, data_full, phy.payload_bits, None))
                log_event(s, 0, "pair_tx", a)

        for link in (0, 1):
            if not starts[link]:
                continue
            collided = len(starts[link]) > 1
            span_ns = 0
            for st, data_ns, bits, dest_kind in starts[link]:
                st.counters.attempts += 1
                if st.kind == NONAP and not (st.waiting and pairs_fired(st, starts, link)):
                    nstr_violations += 1
                if collided:
                    dur = data_ns + sifs
                    st.counters.collisions += 1
                    log_event(s, link, "tx_collision", st, f"dur={dur}")
                    redraw(st, escalate=True)
                else:
                    dur = data_ns + 2 * sifs + tack
                    st.counters.successes += 1
                    st.counters.bits_ok += bits
                    if st.kind == AP:
                        if dest_kind == NONAP:
                            st.counters.bits_ok_to_mld += bits
                        else:
                            st.counters.bits_ok_to_sld += bits
                        ap_dl[link] = (
                            dest_kind, st.dest_id,
                            s + math.ceil(data_ns / te),
                            s + math.ceil(dur / te),
                        )
                    log_event(s, link, "tx_success", st, f"dur={dur}")
                    reset_after_success(st)
                span_ns = max(span_ns, dur)
            if collided and any(st.kind == AP for st, *_ in starts[link]):
                ap_dl[link] = None
            busy_ns[link] += span_ns
            busy_until[link] = s + math.ceil(span_ns / te)

        # jump to the next boundary where anything can change
        nxt = end_slot
        for link in (0, 1):
            if busy_until[link] > s:
                nxt = min(nxt, busy_until[link])
                continue
            for st in stations[link]:
                if st.k > 0:
                    nxt = min(nxt, s + st.k)
                elif not (st.kind == NONAP and st.waiting):
                    nxt = min(nxt, s + 1)  # redrawn to zero, re-decide next slot
        d = max(1, nxt - s)
        if s + d > end_slot:
            d = end_slot - s
            if d <= 0:
                break
        for link in (0, 1):
            if busy_until[link] > s:
                continue
            idle_ns[link] += d * te
            for st in stations[link]:
                if st.k > 0:
                    st.k -= d
                    if st.k == 0 and st.kind == NONAP:
                        st.waiting = True
                        st.wait_fresh = True
                elif st.kind == NONAP and st.waiting:
                    st.wait_fresh = False
        s += d

    stats = SimStats(
        devices=devices,
        busy_ns=busy_ns,
        idle_ns=idle_ns,
        elapsed_ns=[busy_ns[0] + idle_ns[0], busy_ns[1] + idle_ns[1]],
        slots=s,
        nstr_violations=nstr_violations,
        align_violations=align_violations,
        trace=trace,
        meta={
            "seed": seed,
            "duration_s": duration_s,
            "ap_mode": ap_mode,
            "conservative_wait": conservative_wait,
            "n_mld": cfg.n_mld,
            "n_sld": cfg.n_sld,
            "gamma": cfg.gamma,
            "n_a": phy.n_a,
        },
    )
    return stats, _report(cfg, stats, seed, duration_s)


def pairs_fired(st, starts, link):
    """True when the sibling link fires the same client at this boundary."""
    other = starts[1 - link]
    return any(o.kind == NONAP and o.device == st.device for o, *_ in other)


def _busy_by_others(link, other, link_busy, ap_dl, st, s):
    """Permissive wait rule: own-AP downlink to this client does not break it."""
    for l in (link, other):
        if not link_busy[l]:
            continue
        dl = ap_dl[l]
        if dl is not None and dl[3] > s and dl[0] == NONAP and dl[1] == st.device:
            continue
        return True
    return False


def _draw_dest(st, cfg):
    if cfg.n_mld > 0 and (cfg.n_sld == 0 or st.rng.random() < cfg.gamma):
        st.dest_kind = NONAP
        st.dest_id = int(st.rng.integers(0, cfg.n_mld))
    else:
        st.dest_kind = LEGACY
        st.dest_id = int(st.rng.integers(0, cfg.n_sld)) if cfg.n_sld else -1


def _report(cfg, stats, seed, duration_s):
    def mbps(bits, link):
        elapsed = stats.elapsed_ns[link]
        return bits * 1e3 / elapsed if elapsed else 0.0

    def class_mean(kind, attr="bits_ok"):
        vals = [
            mbps(getattr(c, attr), link)
            for (k, _, link), c in stats.devices.items()
            if k == kind
        ]
        return sum(vals) / len(vals) if vals else 0.0

    ap_sld = ap_mld = 0.0
    ap_links = [
        (link, c) for (k, _, link), c in stats.devices.items() if k == AP
    ]
    if ap_links:
        ap_sld = sum(mbps(c.bits_ok_to_sld, link) for link, c in ap_links) / len(ap_links)
        ap_mld = sum(mbps(c.bits_ok_to_mld, link) for link, c in ap_links) / len(ap_links)

    return ThroughputReport(
        s_u_sld=class_mean(LEGACY),
        s_u_mld=class_mean(NONAP),
        s_d_sld=ap_sld,
        s_d_mld=ap_mld,
        scenario=cfg,
        source="sim",
        meta=dict(stats.meta),
    )


def collision_estimate(stats, kind=LEGACY):
    """Per-transmission collision probability measured across a device class."""
    attempts = sum(c.attempts for (k, _, _), c in stats.devices.items() if k == kind)
    collisions = sum(c.collisions for (k, _, _), c in stats.devices.items() if k == kind)
    return collisions / attempts if attempts else 0.0


def trace_export(stats, path):
    """Write device/link counters to `path` and the slot trace alongside it.

    The trace lands at `<stem>_trace.csv` next to the stats file. Both files
    are byte-identical across runs with the same configuration and seed.
    """
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STATS_HEADER)
        for (kind, device, link) in sorted(stats.devices):
            c = stats.devices[(kind, device, link)]
            writer.writerow([
                kind, device, link, c.attempts, c.successes, c.collisions,
                c.bits_ok, c.bits_ok_to_sld, c.bits_ok_to_mld,
                c.busy_restarts, c.waits_broken,
            ])
        writer.writerow(LINK_HEADER)
        for link in (0, 1):
            writer.writerow([
                link, stats.busy_ns[link], stats.idle_ns[link],
                stats.elapsed_ns[link], stats.slots,
            ])
    trace_path = path.with_name(path.stem + "_trace.csv")
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        writer.writerows(stats.trace)
    return path
