"""Deterministic message fabric and multi-round fault harness.

Messages sit in a single priority queue keyed by (delivery time, push
sequence), so equal-time deliveries replay in push order and a seeded
run is byte-for-byte reproducible.  Links add a uniform integer delay
and drop each copy independently; phases are long enough that nothing
crosses a phase boundary.
"""

from __future__ import annotations

import csv
import heapq
import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

from .consensus import (Behavior, ConsensusNode, CreditTable, FaultProfile,
                        RoundOutcome, init_credits, run_round, update_credits)
from .ledger import Chain, make_genesis


class EventQueue:
    """Min-heap of (time, seq, payload); seq breaks ties first-pushed-first."""

    def __init__(self):
        self._heap: List[Tuple[int, int, object]] = []
        self._seq = 0

    def push(self, time: int, payload) -> None:
        heapq.heappush(self._heap, (time, self._seq, payload))
        self._seq += 1

    def __len__(self) -> int:
        return len(self._heap)


def deliver(queue: EventQueue, until: int) -> List[object]:
    """Pop every event with time <= until, in (time, seq) order."""
    out = []
    heap = queue._heap
    while heap and heap[0][0] <= until:
        out.append(heapq.heappop(heap)[2])
    return out


class PhaseNet:
    """Synchronous-phase view over the event queue for one node set."""

    def __init__(self, node_ids: Iterable[str], drop_prob: float = 0.0,
                 delay: Tuple[int, int] = (1, 5),
                 rng: Optional[random.Random] = None):
        self.ids = sorted(node_ids)
        self.drop_prob = drop_prob
        self.delay_min, self.delay_max = delay
        if not 1 <= self.delay_min <= self.delay_max:
            raise ValueError("delay bounds must satisfy 1 <= min <= max")
        self.rng = rng if rng is not None else random.Random(0)
        self.queue = EventQueue()
        self.now = 0
        self.sent = 0
        self.dropped = 0

    def send(self, src: str, dst: str, msg) -> None:
        self.sent += 1
        if self.drop_prob > 0.0 and self.rng.random() < self.drop_prob:
            self.dropped += 1
            return
        lag = self.rng.randint(self.delay_min, self.delay_max)
        self.queue.push(self.now + lag, (dst, src, msg))

    def broadcast(self, src: str, msg) -> None:
        for dst in self.ids:
            if dst != src:
                self.send(src, dst, msg)

    def deliver_phase(self) -> List[Tuple[str, str, object]]:
        """Close the phase: everything in flight lands."""
        self.now += self.delay_max + 1
        return deliver(self.queue, self.now)


def make_nodes(node_ids: Iterable[str]) -> Dict[str, ConsensusNode]:
    """Fresh nodes sharing one genesis block and empty pools."""
    genesis = make_genesis()
    return {k: ConsensusNode(node_id=k, chain=Chain(genesis))
            for k in sorted(node_ids)}


# ============================================================
# multi-round driver
# ============================================================


@dataclass
class RoundLogRow:
    round_no: int
    leader_id: str
    decision: str
    abort_reason: str
    committed_height: int
    credit_honest: float
    credit_byz: float
    prepare_needed: int


@dataclass
class RunResult:
    outcomes: List[RoundOutcome]
    rows: List[RoundLogRow]
    credit_history: List[CreditTable]
    final_credits: CreditTable
    commit_count: int
    abort_reasons: Dict[str, int]
    divergence_count: int
    sent: int = 0
    dropped: int = 0

    @property
    def n_rounds(self) -> int:
        return len(self.outcomes)


def run_rounds(n_rounds: int, nodes: Dict[str, ConsensusNode],
               profile: FaultProfile, seed: int,
               delta1: float = 0.05, delta2: float = 0.02,
               credits: Optional[CreditTable] = None) -> RunResult:
    """Drive repeated rounds, tracking credits and honest-chain safety.

    Divergence counts heights at which two honest nodes ever committed
    different blocks; any nonzero value is a safety violation.
    """
    ids = sorted(nodes)
    credits = dict(credits) if credits is not None else init_credits(ids)
    master = random.Random(seed)
    net = PhaseNet(ids, drop_prob=profile.drop_prob, delay=profile.delay,
                   rng=random.Random(f"net:{seed}"))
    honest = set(profile.honest_ids(ids))

    seen_at_height: Dict[int, set] = {}
    outcomes: List[RoundOutcome] = []
    rows: List[RoundLogRow] = []
    history: List[CreditTable] = []
    commit_count = 0
    abort_reasons: Dict[str, int] = {}
    divergence = 0

    for r in range(n_rounds):
        outcome = run_round(nodes, credits, profile, net, r, master.getrandbits(63))
        credits = update_credits(credits, outcome, delta1, delta2)
        outcomes.append(outcome)
        history.append(dict(credits))

        if outcome.committed:
            commit_count += 1
        else:
            key = outcome.abort_reason or "Unknown"
            abort_reasons[key] = abort_reasons.get(key, 0) + 1

        if outcome.block is not None:
            h = outcome.block.height
            hashes = seen_at_height.setdefault(h, set())
            for k in outcome.committed_nodes & honest:
                hashes.add(nodes[k].chain.blocks[h].block_hash()
                           if nodes[k].chain.height >= h else None)
            hashes.discard(None)
            if len(hashes) > 1:
                divergence += 1

        rows.append(RoundLogRow(
            round_no=r,
            leader_id=outcome.leader_id,
            decision="committed" if outcome.committed else "aborted",
            abort_reason=outcome.abort_reason or "",
            committed_height=max((nodes[k].chain.height for k in honest),
                                 default=0),
            credit_honest=sum(credits[k] for k in ids if k in honest),
            credit_byz=sum(credits[k] for k in ids if k not in honest),
            prepare_needed=outcome.prepare_needed,
        ))

    return RunResult(
        outcomes=outcomes,
        rows=rows,
        credit_history=history,
        final_credits=credits,
        commit_count=commit_count,
        abort_reasons=abort_reasons,
        divergence_count=divergence,
        sent=net.sent,
        dropped=net.dropped,
    )


def write_round_log(rows: List[RoundLogRow], path: str, seed: int) -> None:
    """CSV round log; the first line records the run seed."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# seed={seed}\n")
        w = csv.writer(fh)
        w.writerow(["round", "leader", "decision", "abort_reason",
                    "committed_height", "credit_honest", "credit_byz",
                    "prepare_msgs_needed"])
        for row in rows:
            w.writerow([row.round_no, row.leader_id, row.decision,
                        row.abort_reason, row.committed_height,
                        f"{row.credit_honest:.6f}", f"{row.credit_byz:.6f}",
                        row.prepare_needed])
