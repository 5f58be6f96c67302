"""Packet-level 802.11 DCF chain simulator with optional opportunistic XOR coding.

Time is kept in integer nanoseconds so slot boundaries line up exactly and
simultaneous back-off expiries are genuine ties. All randomness comes from
per-(seed, node, purpose) ``random.Random`` streams, which keeps arrivals
identical across runs that differ only in, say, the bit error rate.
"""

from __future__ import annotations

import heapq
import random
from collections import deque
from typing import Callable, Iterable

from ..link import interference_set, neighbors
from ..model import ChainScenario, Scheme, SimResult, validate
from .measure import Delivery, measure

NS = 1_000_000_000

# event kinds; the order breaks ties between events at the same instant
_ARRIVAL, _TX_START, _ACK_SENSE, _TX_END, _IDLE, _SNAPSHOT = range(6)


def to_ns(seconds: float) -> int:
    return int(round(seconds * NS))


class Packet:
    __slots__ = ("id", "flow", "created", "parts")

    def __init__(self, pid: int, flow: int, created: int, parts: tuple | None = None):
        self.id = pid
        self.flow = flow          # 1, 2, or 0 for coded
        self.created = created
        self.parts = parts        # coded: (flow-1 native, flow-2 native)

    @property
    def coded(self) -> bool:
        return self.parts is not None


class Node:
    """MAC and queue state of one chain node."""

    __slots__ = ("idx", "native", "coded_q", "seq", "current", "attempt", "pending",
                 "phase", "slots", "count_start", "planned", "version", "busy_until",
                 "known", "rng_backoff", "rng_error", "qlen", "q_area", "q_last",
                 "tx", "collisions", "retx", "cs")

    def __init__(self, idx: int, seed: int):
        self.idx = idx
        self.native = {1: deque(), 2: deque()}   # (arrival seq, packet)
        self.coded_q: deque = deque()
        self.seq = 0
        self.current: Packet | None = None
        self.attempt = 0
        self.pending: list[int] = []
        self.phase = "idle"
        self.slots = 0
        self.count_start = 0
        self.planned = 0
        self.version = 0
        self.busy_until = 0
        self.known: set[int] = set()
        self.rng_backoff = random.Random(f"{seed}/{idx}/backoff")
        self.rng_error = random.Random(f"{seed}/{idx}/error")
        self.qlen = 0
        self.q_area = 0
        self.q_last = 0
        self.tx = 0
        self.collisions = 0
        self.retx = 0

    def queued(self) -> int:
        return len(self.native[1]) + len(self.native[2]) + len(self.coded_q)

    def pop_next(self) -> Packet | None:
        """Coded queue first, then the oldest native packet of either flow."""
        if self.coded_q:
            return self.coded_q.popleft()
        q1, q2 = self.native[1], self.native[2]
        if q1 and (not q2 or q1[0][0] < q2[0][0]):
            return q1.popleft()[1]
        if q2:
            return q2.popleft()[1]
        return None


class ChainSimulator:
    def __init__(self, scenario: ChainScenario, duration: float = 170.0, seed: int = 1, *,
                 warmup: float = 10.0, zero_backoff: bool = False,
                 arrivals: Iterable[tuple[float, int]] | None = None,
                 trace: Callable[[float, int, str, int], None] | None = None):
        problems = validate(scenario)
        if problems:
            raise ValueError("invalid scenario: " + "; ".join(problems))
        if not duration > 0:
            raise ValueError("duration must be > 0")
        if not isinstance(seed, int) or seed < 0:
            raise ValueError("seed must be a non-negative integer")
        self.scenario = scenario
        self.seed = seed
        self.duration = duration
        self.end = to_ns(duration)
        self.warmup = to_ns(warmup)
        self.zero_backoff = zero_backoff
        self.trace = trace
        self.coding = scenario.scheme is Scheme.CODING
        self.beta = scenario.beta

        phy = scenario.phy
        self.slot = to_ns(phy.slot)
        self.difs = to_ns(phy.difs)
        self.sifs = to_ns(phy.sifs)
        self.delta = to_ns(phy.delta)
        self.t_data = to_ns(phy.packet_len / phy.link_rate)
        self.t_ack = to_ns(phy.ack_len / phy.link_rate)
        self.handshake = self.sifs + self.t_ack + self.delta
        self.cw_min, self.cw_max = phy.cw_min, phy.cw_max
        self.p_err = phy.packet_error

        k = scenario.k
        self.k = k
        self.nodes = [Node(i, seed) for i in range(k + 1)]   # index 0 unused
        for i in range(1, k + 1):
            node = self.nodes[i]
            node.cs = neighbors(i, k, phy.carrier_sense_hops)
        self.ack_only = {}
        for i in range(1, k + 1):
            heard = set(self.nodes[i].cs) | {i}
            for j in (i - 1, i + 1):
                if 1 <= j <= k:
                    self.ack_only[i, j] = [x for x in self.nodes[j].cs if x not in heard]
        self.interferers = {j: interference_set(j, k, phy.interference_hops) for j in range(1, k + 1)}
        # recent data transmission start times per node (two suffice: starts are > T_data apart)
        self.recent_tx = [[-10 * NS, -10 * NS] for _ in range(k + 1)]

        self.events: list = []
        self._eseq = 0
        self._pid = 0
        self.deliveries: list[Delivery] = []
        self.generated = {1: 0, 2: 0}
        self.dropped = {1: 0, 2: 0}
        self.coded_tx = 0
        self.undecodable = 0
        self.link_attempts: dict = {}
        self.link_successes: dict = {}
        self.hop_drops: dict = {}
        self.hop_packets: dict = {}
        self.snapshots: list[list[int]] = []

        if arrivals is None:
            self._arrival_rng = {1: random.Random(f"{seed}/1/arrival"),
                                 2: random.Random(f"{seed}/{k}/arrival")}
            self._explicit = None
            for flow, rate in ((1, scenario.gamma_1), (2, scenario.gamma_k)):
                if rate > 0:
                    self._schedule_arrival(flow, 0)
        else:
            self._explicit = sorted(arrivals)
            for t, flow in self._explicit:
                self._push(to_ns(t), _ARRIVAL, flow, -1)
        for frac in (0.25, 0.5, 1.0):
            self._push(int(self.end * frac), _SNAPSHOT, 0, 0)

    # ---------------------------------------------------------------- events
    def _push(self, t: int, kind: int, node: int, data) -> None:
        self._eseq += 1
        heapq.heappush(self.events, (t, kind, self._eseq, node, data))

    def _schedule_arrival(self, flow: int, now: int) -> None:
        rate = self.scenario.gamma_1 if flow == 1 else self.scenario.gamma_k
        gap = self._arrival_rng[flow].expovariate(rate)
        t = now + max(1, int(round(gap * NS)))
        if t < self.end:
            self._push(t, _ARRIVAL, flow, None)

    def run(self) -> SimResult:
        events = self.events
        end = self.end
        while events:
            t, kind, _, node, data = heapq.heappop(events)
            if t > end:
                break
            if kind == _TX_START:
                self._on_tx_start(t, node, data)
            elif kind == _TX_END:
                self._on_tx_end(t, node, data)
            elif kind == _IDLE:
                self._on_idle(t, node)
            elif kind == _ACK_SENSE:
                for x in data[0]:
                    self._sense(x, t + self.delta, data[1])
            elif kind == _ARRIVAL:
                self._on_arrival(t, node, data)
            else:
                self._snapshot(t)
        return self._result()

    # --------------------------------------------------------------- queues
    def _q_change(self, node: Node, t: int, delta: int) -> None:
        node.q_area += node.qlen * (t - node.q_last)
        node.q_last = t
        node.qlen += delta

    def _snapshot(self, t: int) -> None:
        row = []
        for node in self.nodes[1:]:
            self._q_change(node, t, 0)
            row.append(node.q_area)
        self.snapshots.append(row)

    def _on_arrival(self, t: int, flow: int, data) -> None:
        self._pid += 1
        pkt = Packet(self._pid, flow, t)
        self.generated[flow] += 1
        src = self.nodes[1] if flow == 1 else self.nodes[self.k]
        src.known.add(pkt.id)
        if self.trace:
            self.trace(t / NS, src.idx, "generate", pkt.id)
        self._enqueue_native(src, pkt, t)
        if data is None:
            self._schedule_arrival(flow, t)

    def _enqueue_native(self, node: Node, pkt: Packet, t: int) -> None:
        """Encoder: merge with the oldest queued opposite-flow native, else join the native queue."""
        other = node.native[3 - pkt.flow]
        if self.coding and other:
            _, partner = other.popleft()
            parts = (pkt, partner) if pkt.flow == 1 else (partner, pkt)
            self._pid += 1
            node.coded_q.append(Packet(self._pid, 0, t, parts))
            # two natives became one queued packet
            self._q_change(node, t, 0)
        else:
            node.seq += 1
            node.native[pkt.flow].append((node.seq, pkt))
            self._q_change(node, t, 1)
        if node.current is None:
            self._next_packet(node, t)

    # ------------------------------------------------------------------ MAC
    def _next_packet(self, node: Node, t: int) -> None:
        pkt = node.pop_next()
        if pkt is None:
            node.phase = "idle"
            return
        node.current = pkt
        node.attempt = 0
        if pkt.coded:
            node.pending = [node.idx + 1, node.idx - 1]
        else:
            node.pending = [node.idx + 1 if pkt.flow == 1 else node.idx - 1]
        self._contend(node, t)

    def _contend(self, node: Node, t: int) -> None:
        node.attempt += 1
        if self.zero_backoff:
            node.slots = 0
        else:
            cw = min((1 << (node.attempt - 1)) * self.cw_min, self.cw_max)
            node.slots = node.rng_backoff.randrange(cw)
        node.version += 1
        if node.busy_until <= t:
            self._start_count(node, t)
        else:
            node.phase = "frozen"
            self._push(node.busy_until, _IDLE, node.idx, None)

    def _start_count(self, node: Node, t: int) -> None:
        node.phase = "backoff"
        node.count_start = t
        node.planned = t + self.difs + node.slots * self.slot
        node.version += 1
        self._push(node.planned, _TX_START, node.idx, node.version)

    def _on_idle(self, t: int, idx: int) -> None:
        node = self.nodes[idx]
        if node.phase == "frozen" and node.busy_until == t:
            self._start_count(node, t)

    def _sense(self, idx: int, t_sense: int, until: int) -> None:
        """Node ``idx`` hears the medium busy from ``t_sense`` through ``until``."""
        node = self.nodes[idx]
        extended = until > node.busy_until
        if extended:
            node.busy_until = until
        phase = node.phase
        if phase == "backoff":
            if node.planned < t_sense:
                return          # its own frame starts before the carrier reaches it
            elapsed = t_sense - node.count_start
            if elapsed > self.difs:
                node.slots -= (elapsed - self.difs) // self.slot
            node.phase = "frozen"
            node.version += 1
            self._push(node.busy_until, _IDLE, idx, None)
        elif phase == "frozen" and extended:
            self._push(until, _IDLE, idx, None)

    def _on_tx_start(self, t: int, idx: int, version: int) -> None:
        node = self.nodes[idx]
        if version != node.version or node.phase != "backoff":
            return
        pkt = node.current
        node.phase = "transmitting"
        node.tx += 1
        if node.attempt > 1:
            node.retx += 1
        recent = self.recent_tx[idx]
        recent[0], recent[1] = recent[1], t
        acks = 2 if pkt.coded else 1
        if pkt.coded:
            self.coded_tx += 1
        exch_end = t + self.t_data + self.delta + acks * self.handshake
        node.busy_until = max(node.busy_until, exch_end)
        t_sense = t + self.delta
        for x in node.cs:
            self._sense(x, t_sense, exch_end)
        # nodes that hear only the ACK of a receiver
        ack_start = t + self.t_data + self.delta + self.sifs
        receivers = (idx + 1, idx - 1) if pkt.coded else node.pending
        for j in receivers:
            ack_only = self.ack_only[idx, j]
            if ack_only:
                self._push(ack_start, _ACK_SENSE, j, (ack_only, ack_start + self.t_ack + self.delta))
            ack_start += self.t_ack + self.delta + self.sifs
        if self.trace:
            self.trace(t / NS, idx, "tx_coded" if pkt.coded else "tx", pkt.id)
        self._push(exch_end, _TX_END, idx, t)

    def _collided(self, sender: int, receiver: int, start: int) -> bool:
        lo, hi = start - self.t_data, start + self.t_data
        recent = self.recent_tx
        for x in self.interferers[receiver]:
            if x == sender:
                continue
            a, b = recent[x]
            if lo < a < hi or lo < b < hi:
                return True
        return False

    def _on_tx_end(self, t: int, idx: int, start: int) -> None:
        node = self.nodes[idx]
        pkt = node.current
        still = []
        for j in node.pending:
            key = (idx, j)
            self.link_attempts[key] = self.link_attempts.get(key, 0) + 1
            collided = self._collided(idx, j, start)
            corrupted = node.rng_error.random() < self.p_err
            if collided:
                node.collisions += 1
            if collided or corrupted:
                still.append(j)
                continue
            self.link_successes[key] = self.link_successes.get(key, 0) + 1
            self.hop_packets[key] = self.hop_packets.get(key, 0) + 1
            native = pkt if not pkt.coded else pkt.parts[0 if j == idx + 1 else 1]
            self._deliver(self.nodes[j], native, pkt, t)
        node.pending = still
        if still and node.attempt < self.beta:
            self._contend(node, t)
            return
        for j in still:
            key = (idx, j)
            self.hop_drops[key] = self.hop_drops.get(key, 0) + 1
            self.hop_packets[key] = self.hop_packets.get(key, 0) + 1
            lost = pkt if not pkt.coded else pkt.parts[0 if j == idx + 1 else 1]
            self.dropped[lost.flow] += 1
            if self.trace:
                self.trace(t / NS, idx, "drop", lost.id)
        node.current = None
        node.pending = []
        self._q_change(node, t, -1)
        self._next_packet(node, t)

    def _deliver(self, node: Node, native: Packet, carrier: Packet, t: int) -> None:
        if carrier.coded:
            partner = carrier.parts[1] if native.flow == 1 else carrier.parts[0]
            if partner.id not in node.known:
                self.undecodable += 1
                return
        if native.id in node.known:
            return
        node.known.add(native.id)
        dest = self.k if native.flow == 1 else 1
        if node.idx == dest:
            self.deliveries.append(Delivery(native.flow, native.created, t))
            if self.trace:
                self.trace(t / NS, node.idx, "deliver", native.id)
            return
        self._enqueue_native(node, native, t)

    # -------------------------------------------------------------- results
    def _in_flight(self) -> dict[int, int]:
        out = {1: 0, 2: 0}
        for node in self.nodes[1:]:
            for flow in (1, 2):
                out[flow] += len(node.native[flow])
            out[1] += len(node.coded_q)
            out[2] += len(node.coded_q)
            pkt = node.current
            if pkt is not None:
                if pkt.coded:
                    for j in node.pending:
                        out[1 if j == node.idx + 1 else 2] += 1
                else:
                    out[pkt.flow] += 1
        return out

    def _queue_means(self) -> tuple[list[float], list[float], list[float]]:
        quarter = self.end / 4
        if len(self.snapshots) < 3:
            self._snapshot(self.end)
        a1, a2, a3 = self.snapshots[:3]
        q2 = [a / quarter for a in a1]
        q3 = [(b - a) / quarter for a, b in zip(a1, a2)]
        q4 = [(c - b) / (2 * quarter) for b, c in zip(a2, a3)]
        return q2, q3, q4

    def _result(self) -> SimResult:
        res = measure(self.deliveries, self.duration, self.warmup / NS, self.seed)
        flight = self._in_flight()
        res.generated_f1, res.generated_f2 = self.generated[1], self.generated[2]
        res.dropped_f1, res.dropped_f2 = self.dropped[1], self.dropped[2]
        res.dropped = self.dropped[1] + self.dropped[2]
        res.in_flight_f1, res.in_flight_f2 = flight[1], flight[2]
        res.coded_tx_count = self.coded_tx
        res.undecodable = self.undecodable
        nodes = self.nodes[1:]
        res.tx_count = [n.tx for n in nodes]
        res.collision_count = [n.collisions for n in nodes]
        res.retransmission_count = [n.retx for n in nodes]
        res.link_attempts = dict(sorted(self.link_attempts.items()))
        res.link_successes = dict(sorted(self.link_successes.items()))
        res.hop_drops = dict(sorted(self.hop_drops.items()))
        res.hop_packets = dict(sorted(self.hop_packets.items()))
        res.queue_mean_q2, res.queue_mean_q3, res.queue_mean_q4 = self._queue_means()
        return res


def run(scenario: ChainScenario, duration: float = 170.0, seed: int = 1, **kwargs) -> SimResult:
    """Simulate ``duration`` seconds of the chain and return the aggregated measurements."""
    return ChainSimulator(scenario, duration, seed, **kwargs).run()
