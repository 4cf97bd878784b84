"""Trace auditor: machine-checks the economic invariants over a full run.

The audit is trace-only: it reconstructs running supplies and backing from
per-event deltas and cross-checks them against every event's aggregate
snapshot, so a corrupted event is flagged at its exact sequence number even
when its own snapshot was doctored to match.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional

from ..errors import ParseError

# event kinds allowed to change the relay mode, per the state machine
_MODE_CHANGERS = {"submit", "accept", "challenge_commitment", "challenge_range_replaced"}


@dataclass
class Violation:
    seq: int
    rule: str
    detail: str

    def __str__(self) -> str:
        return f"seq {self.seq}: [{self.rule}] {self.detail}"


@dataclass
class AuditReport:
    violations: List[Violation] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    events: int = 0
    burns_checked: int = 0
    rejected_actions: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def flag(self, seq: int, rule: str, detail: str) -> None:
        self.violations.append(Violation(seq, rule, detail))


def _require(event: dict, key: str) -> object:
    if key not in event:
        raise ParseError(f"event missing {key!r}: {event}")
    return event[key]


def audit(events: List[dict]) -> AuditReport:
    """Re-check every event of a trace; returns the violation report."""
    report = AuditReport()
    if not events:
        report.warnings.append("EmptyTrace")
        return report

    supply: Dict[str, int] = {}
    backing: Dict[str, int] = {}
    queues: Dict[str, List[int]] = {}
    burn_y: Dict[int, str] = {}
    prev_seq = -1
    prev_mode: Optional[str] = None
    prev_used = 0
    tags: List[str] = []

    for event in events:
        if not isinstance(event, dict):
            raise ParseError(f"not an event object: {event!r}")
        seq = _require(event, "seq")
        kind = _require(event, "kind")
        agg = _require(event, "agg")
        payload = event.get("payload", {})
        report.events += 1

        if seq != prev_seq + 1:
            report.flag(seq, "SeqOrder", f"expected seq {prev_seq + 1}")
        prev_seq = seq

        if kind == "genesis":
            tags = list(payload.get("tags", []))
        if kind == "action_rejected":
            report.rejected_actions += 1

        # -- per-event Invariant 1 and ETH conservation from the snapshot ----
        for y_str, n in agg.get("supply", {}).items():
            y = Fraction(y_str)
            if Fraction(n, 1) != y * agg["backing"].get(y_str, 0):
                report.flag(seq, "Invariant1",
                            f"supply[{y_str}]={n} != y*backing={y * agg['backing'].get(y_str, 0)}")
        if agg.get("received", 0) != agg.get("paid", 0) + agg.get("held", 0):
            report.flag(seq, "EthConservation",
                        f"received {agg.get('received')} != paid {agg.get('paid')} + held {agg.get('held')}")

        # -- delta reconstruction ------------------------------------------
        if kind == "mint":
            y_str = payload["y"]
            k = int(1 / Fraction(y_str))
            supply[y_str] = supply.get(y_str, 0) + payload["minted"]
            backing[y_str] = backing.get(y_str, 0) + payload["minted"] * k
            q = queues.setdefault(y_str, [])
            q.append(payload["bridge_id"])
        elif kind == "burn":
            y_str = payload["y"]
            burn_y[payload["burn_id"]] = y_str
            q = queues.get(y_str, [])
            touched = [p[0] for p in payload["portions"]]
            if q[: len(touched)] != touched:
                report.flag(seq, "FIFO", f"burn touched {touched}, queue front was {q[:len(touched)]}")
            consumed = set(touched) - set(agg.get("queues", {}).get(y_str, []))
            queues[y_str] = [b for b in q if b not in consumed]
        elif kind == "unlock_settled":
            y_str = burn_y.get(payload["burn_id"])
            if y_str is not None:
                supply[y_str] = supply.get(y_str, 0) - payload["owed"]
                backing[y_str] = backing.get(y_str, 0) - payload["escrow_refund"]
        elif kind == "unlock_timeout":
            y_str = burn_y.get(payload["burn_id"])
            if y_str is not None:
                for _, owed, escrow in payload["payouts"]:
                    supply[y_str] = supply.get(y_str, 0) - owed
                    backing[y_str] = backing.get(y_str, 0) - escrow
        elif kind == "missing_doge_paid":
            y_str = payload["y"]
            supply[y_str] = supply.get(y_str, 0) - payload["burned"]
            backing[y_str] = backing.get(y_str, 0) - payload["eth"]
            q = queues.get(y_str)
            if q and payload["bridge_id"] not in agg.get("queues", {}).get(y_str, []):
                queues[y_str] = [b for b in q if b != payload["bridge_id"]]
        elif kind == "bridge_closed":
            for y_str, q in queues.items():
                if payload["bridge_id"] in q and payload["bridge_id"] not in \
                        agg.get("queues", {}).get(y_str, []):
                    queues[y_str] = [b for b in q if b != payload["bridge_id"]]

        for y_str, n in supply.items():
            if agg.get("supply", {}).get(y_str, 0) != n:
                report.flag(seq, "SupplyDelta",
                            f"running supply[{y_str}]={n} vs snapshot {agg.get('supply', {}).get(y_str, 0)}")
            if agg.get("backing", {}).get(y_str, 0) != backing.get(y_str, 0):
                report.flag(seq, "BackingDelta",
                            f"running backing[{y_str}]={backing.get(y_str, 0)} vs snapshot "
                            f"{agg.get('backing', {}).get(y_str, 0)}")

        # -- Invariant 2 per completed burn ----------------------------------
        if kind == "burn_settled":
            report.burns_checked += 1
            w, d, eth = payload["w"], payload["d_recv"], payload["eth_received"]
            y = Fraction(payload["y"])
            if not 0 <= d <= w:
                report.flag(seq, "Invariant2", f"d_recv {d} outside [0, {w}]")
            if Fraction(eth, 1) != Fraction(w - d, 1) / y:
                report.flag(seq, "Invariant2", f"eth {eth} != (w-d)/y = {Fraction(w - d, 1) / y}")

        # -- relay mode discipline -------------------------------------------
        mode = agg.get("relay_mode")
        if prev_mode is not None and mode != prev_mode and kind not in _MODE_CHANGERS:
            report.flag(seq, "ModeExclusivity", f"{prev_mode} -> {mode} via {kind}")
        prev_mode = mode

        # -- used transactions only grow --------------------------------------
        used = agg.get("used_tx_count", 0)
        if used < prev_used:
            report.flag(seq, "UsedTxMonotone", f"{prev_used} -> {used}")
        prev_used = used

    # -- end-state Invariant 3 for tagged scenarios ---------------------------
    last = events[-1]
    if last.get("kind") == "run_summary":
        summary = last["payload"]
        if "rational_rate_ge_y" in (tags or summary.get("tags", [])):
            if not summary.get("quiescent", False):
                report.flag(last["seq"], "Invariant3", "scenario tagged rational_rate_ge_y did not end quiescent")
            else:
                locked = summary.get("locked_on_best", {})
                for y_str, n in summary.get("supply", {}).items():
                    if locked.get(y_str, 0) != n:
                        report.flag(last["seq"], "Invariant3",
                                    f"locked[{y_str}]={locked.get(y_str, 0)} != supply {n}")
    else:
        report.warnings.append("NoRunSummary")

    return report
