"""Agent policies: honest, rational, and Byzantine behavior profiles.

Each policy is a pure decision function from (observation, private state) to a
list of protocol actions plus updated private state.  Policies never mutate
the world; the harness applies their actions in roster order each turn and
records rejected ones as policy bugs.  Instance-level caches hold only
deterministic memoization (segment matches, mined private forks), so replays
with the same seed produce identical action streams.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .bridge import (
    BridgeContract,
    Submission,
    build_submission,
    build_tx_report,
    rate_mul,
    segment_bounds,
)
from .chainsim import (
    EMPTY_TX_ROOT,
    Block,
    BlockHeader,
    ChainView,
    block_hash,
    mine_header,
    pow_check,
)
from .errors import BeforeStart, ConfigError, RangeUnavailable, SimError
from .merkle import sha256
from .proofsys import ExtensionProof, commitment_root, prove_extension_for, verification_cost, witness_root


# ---------------------------------------------------------------------------
# rate path and observations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RatePath:
    """Piecewise-constant DOGE-per-ETH-unit schedule."""

    points: Tuple[Tuple[int, Fraction], ...]

    def __post_init__(self):
        if not self.points:
            raise ConfigError("rate_path: must have at least one segment")
        times = [t for t, _ in self.points]
        if times != sorted(times):
            raise ConfigError("rate_path: times must be sorted")
        if any(r <= 0 for _, r in self.points):
            raise ConfigError("rate_path: rates must be positive")

    def rate_at(self, t: int) -> Fraction:
        if t < self.points[0][0]:
            raise BeforeStart(f"t={t} before rate path start {self.points[0][0]}")
        rate = self.points[0][1]
        for start, value in self.points:
            if start <= t:
                rate = value
            else:
                break
        return rate


@dataclass
class Observation:
    """What one agent sees at its turn; chain snapshot honors visibility delay."""

    sim_time: int
    eth_time: int
    me: str
    my_doge_addr: bytes
    my_eth: int
    doge_balances: Dict[bytes, int]
    chain: ChainView
    bridge: BridgeContract
    true_rate: Fraction

    @property
    def my_doge(self) -> int:
        return self.doge_balances.get(self.my_doge_addr, 0)


@dataclass(frozen=True)
class Action:
    kind: str
    params: dict = field(default_factory=dict)


def should_abscond(locked_doge: int, true_rate: Fraction, collateral_eth: int) -> bool:
    """A rational operator keeps locked DOGE iff it outvalues the collateral."""
    return Fraction(locked_doge, 1) / true_rate > collateral_eth


def confirmed_max(view: ChainView, c: int) -> int:
    """Ordinal of the newest confirmed block: c valid PoWs sit on top of it."""
    tip = view.best_tip()
    return max(0, view.blocks[tip].header.ordinal - c)


def find_bad_header(parent: bytes, ordinal: int, timestamp: int, target: int,
                    pow_fn: str = "sha256d", seed: int = 0) -> BlockHeader:
    """A header that fails its own PoW check, for modeling fabricated blocks."""
    nonce = seed
    while True:
        header = BlockHeader(parent, EMPTY_TX_ROOT, ordinal, timestamp, nonce, target, pow_fn)
        if not pow_check(header):
            return header
        nonce += 1


# ---------------------------------------------------------------------------
# policy base and shared machinery
# ---------------------------------------------------------------------------


class Policy:
    """Base: subclasses implement decide(); step() wraps it with purity plumbing."""

    def __init__(self, name: str, params: dict, agent_seed: int):
        self.name = name
        self.params = dict(params)
        self.agent_seed = agent_seed
        self._segment_cache: Dict[bytes, Tuple[Block, ...]] = {}

    def step(self, obs: Observation, priv: dict) -> Tuple[List[Action], dict]:
        priv = dict(priv)
        actions = self.decide(obs, priv)
        return actions, priv

    def decide(self, obs: Observation, priv: dict) -> List[Action]:
        raise NotImplementedError

    def rng_for(self, obs: Observation) -> random.Random:
        return random.Random(f"{self.agent_seed}/{obs.sim_time}")

    # -- shared views over the contract history ----------------------------

    def matched_segment(self, obs: Observation, i: int) -> Optional[Tuple[Block, ...]]:
        """Blocks of history entry i if its commitment matches my chain, else None."""
        entry = obs.bridge.history[i]
        cached = self._segment_cache.get(entry.commitment)
        if cached is not None:
            return cached
        prior, range_b = segment_bounds(obs.bridge.history, i)
        tip = obs.chain.best_tip()
        if obs.chain.blocks[tip].header.ordinal < range_b:
            return None
        try:
            blocks = tuple(obs.chain.path_blocks(tip, prior + 1, range_b))
        except RangeUnavailable:
            return None
        if commitment_root(blocks) != entry.commitment:
            return None
        self._segment_cache[entry.commitment] = blocks
        return blocks

    def first_bogus_index(self, obs: Observation, cm: int) -> Optional[int]:
        """First history entry provably wrong against my view.

        An entry is judged only once my chain has confirmed past its range;
        until then it is unverifiable, not bogus.
        """
        for i in range(len(obs.bridge.history)):
            if obs.bridge.history[i].range <= cm and self.matched_segment(obs, i) is None:
                return i
        return None


# ---------------------------------------------------------------------------
# relayers
# ---------------------------------------------------------------------------


class HonestRelayer(Policy):
    """Submits maximal confirmed extensions, challenges mismatches, backtracks.

    Range challenges fire only against submissions whose range already lagged
    the challenger's confirmed maximum by >= d at submission time (sampled per
    turn), never against ones that were maximal when made; commitment
    challenges cover everything else that disagrees with this relayer's view.
    """

    def decide(self, obs: Observation, priv: dict) -> List[Action]:
        if obs.sim_time < self.params.get("online_at", 0):
            return []
        st = obs.bridge
        actions: List[Action] = []

        if not st.is_relayer(self.name):
            need = st.required_relayer_deposit()
            if obs.my_eth >= need:
                actions.append(Action("become_relayer", {"deposit": need}))
            return actions

        view = obs.chain
        tip = view.best_tip()
        cm = confirmed_max(view, st.params.c)
        samples = dict(priv.get("cm_samples", {}))
        samples[obs.eth_time] = cm
        if len(samples) > 400:
            for key in sorted(samples)[:-400]:
                del samples[key]
        priv["cm_samples"] = samples

        for thread in st.threads.values():
            if not thread.resolved and thread.relayer == self.name and thread.proof is None:
                proof = self._try_prove(view, tip, thread.prior_date, thread.sub.range, st.params.c)
                if proof is not None:
                    actions.append(Action("supply_proof", {"thread_id": thread.thread_id, "proof": proof}))

        if st.relay_mode == "verification" and st.active is not None:
            if st.active.sub.relayer != self.name:
                challenge = self._evaluate_submission(obs, priv, view, tip, cm)
                if challenge is not None:
                    actions.append(challenge)
            return actions

        bogus = self.first_bogus_index(obs, cm)
        if bogus is not None:
            prior = st.history[bogus - 1].range if bogus > 0 else 0
            range_b = min(cm, prior + st.params.max_extension_len)
            if range_b > prior:
                sub = self._try_build(view, tip, prior, range_b, st.params.c)
                if sub is not None:
                    depth = max(st.current_date - prior, range_b - prior)
                    affordable = verification_cost(st.cost_model, depth, st.params.c)
                    if affordable <= st.relayer_deposits.get(self.name, 0):
                        actions.append(Action("backtrack", {"from_index": bogus, "sub": sub}))
            return actions

        lead = self.params.get("submit_lead", 1)
        if cm - st.current_date >= lead:
            range_b = min(cm, st.current_date + st.params.max_extension_len)
            sub = self._try_build(view, tip, st.current_date, range_b, st.params.c)
            if sub is not None:
                actions.append(Action("submit_extension", {"sub": sub}))
        return actions

    def _try_build(self, view, tip, prior, range_b, c) -> Optional[Submission]:
        try:
            return build_submission(view, tip, prior, range_b, self.name, c)
        except (RangeUnavailable, SimError):
            return None

    def _try_prove(self, view, tip, prior, range_b, c) -> Optional[ExtensionProof]:
        try:
            return prove_extension_for(view, tip, prior, range_b, c)
        except SimError:
            return None

    def _evaluate_submission(self, obs, priv, view, tip, cm) -> Optional[Action]:
        """Judge the active submission against my own view.

        Three zones by claimed range: at or below my confirmed maximum the
        commitment is recomputable and any mismatch draws a challenge (range
        type when the submission was already >= d stale at submission time,
        commitment type otherwise); just above my confirmed maximum it may
        simply be fresher than my view, so wait; still unverifiably far ahead
        after a patience period, it claims blocks that cannot exist yet.
        """
        st = obs.bridge
        active = st.active
        sub = active.sub
        base = active.backtrack_from
        if base is None:
            prior = st.current_date
        else:
            prior = st.history[base - 1].range if base > 0 else 0

        slack = self.params.get("range_slack", 2)
        if sub.range > cm:
            patience = self.params.get("range_patience_eth", 30)
            waited = obs.eth_time - active.submitted_at_eth
            if sub.range > cm + st.params.k + slack and waited >= patience:
                return Action("challenge_commitment", {})
            return None  # plausibly fresher than my view; re-judge next turn

        try:
            blocks = tuple(view.path_blocks(tip, prior + 1, sub.range))
            matches = commitment_root(blocks) == sub.commitment
        except RangeUnavailable:
            matches = False
        if matches:
            return None

        samples = priv.get("cm_samples", {})
        past = [v for t, v in samples.items() if t <= active.submitted_at_eth]
        cm_at_sub = max(past) if past else cm
        stale = cm_at_sub - sub.range >= st.params.d
        if stale and cm - sub.range >= st.params.d:
            alt_range = min(cm, prior + st.params.max_extension_len)
            if alt_range - sub.range >= st.params.d:
                alt = self._try_build(view, tip, prior, alt_range, st.params.c)
                if alt is not None:
                    return Action("challenge_range", {"alt": alt})
        return Action("challenge_commitment", {})


class LazyRelayer(Policy):
    """Posts a deposit and then never acts; deposits alone do not relay."""

    def decide(self, obs: Observation, priv: dict) -> List[Action]:
        st = obs.bridge
        if not st.is_relayer(self.name) and obs.my_eth >= st.required_relayer_deposit():
            return [Action("become_relayer", {"deposit": st.required_relayer_deposit()})]
        return []


class OrphanAttacker(Policy):
    """Commits a privately mined fork of the relay tip.

    The revealed segment is valid PoW forked off the contract's committed tip,
    but the confirmation witness is fabricated: a minority miner cannot
    confirm a branch the network has orphaned.  Supplies its (failing) proof
    when challenged.
    """

    def __init__(self, name: str, params: dict, agent_seed: int):
        super().__init__(name, params, agent_seed)
        self._proof_cache: Dict[bytes, ExtensionProof] = {}

    def decide(self, obs: Observation, priv: dict) -> List[Action]:
        st = obs.bridge
        actions: List[Action] = []
        if obs.sim_time < self.params.get("activate_at", 0):
            return actions
        if not st.is_relayer(self.name):
            need = st.required_relayer_deposit()
            if obs.my_eth >= need:
                actions.append(Action("become_relayer", {"deposit": need}))
            return actions

        for thread in st.threads.values():
            if not thread.resolved and thread.relayer == self.name and thread.proof is None:
                proof = self._proof_cache.get(thread.sub.commitment)
                if proof is not None:
                    actions.append(Action("supply_proof", {"thread_id": thread.thread_id, "proof": proof}))

        if priv.get("attacked") or st.relay_mode != "listening" or not st.history:
            return actions

        prior_tip = st.current_tip_header()
        prior = st.current_date
        cm = confirmed_max(obs.chain, st.params.c)
        range_b = max(prior + 1, cm)
        if range_b - prior > st.params.max_extension_len:
            return actions

        headers: List[BlockHeader] = []
        parent_header = prior_tip
        for i in range(range_b - prior):
            header = mine_header(parent_header, sha256(b"\x02"), obs.sim_time, seed=self.agent_seed + i)
            headers.append(header)
            parent_header = header
        target = headers[-1].difficulty_target
        witness = []
        parent = block_hash(headers[-1])
        for j in range(st.params.c):
            bad = find_bad_header(parent, headers[-1].ordinal + 1 + j, obs.sim_time, target,
                                  headers[-1].pow_fn, seed=self.agent_seed + 10_000 + j)
            witness.append(bad)
            parent = block_hash(bad)

        blocks = tuple(Block(h, ()) for h in headers)
        sub = Submission(
            range=range_b,
            commitment=commitment_root(blocks),
            confirmation_witness=witness_root(witness),
            tip_header=headers[-1],
            relayer=self.name,
        )
        proof = ExtensionProof(tuple(headers), tuple(witness), tuple(() for _ in headers))
        self._proof_cache[sub.commitment] = proof
        priv["attacked"] = True
        actions.append(Action("submit_extension", {"sub": sub}))
        return actions


class HighRangeAttacker(Policy):
    """Claims a range beyond anything mined, then never backs it up."""

    def decide(self, obs: Observation, priv: dict) -> List[Action]:
        st = obs.bridge
        if obs.sim_time < self.params.get("activate_at", 0):
            return []
        if not st.is_relayer(self.name):
            need = st.required_relayer_deposit()
            if obs.my_eth >= need:
                return [Action("become_relayer", {"deposit": need})]
            return []
        if priv.get("attacked") or st.relay_mode != "listening":
            return []
        cm = confirmed_max(obs.chain, st.params.c)
        overshoot = self.params.get("overshoot", 60)
        range_b = min(max(cm + st.params.d + overshoot, st.current_date + st.params.d + overshoot),
                      st.current_date + st.params.max_extension_len)
        if range_b <= st.current_date:
            return []
        rng = random.Random(self.agent_seed)
        tip_header = find_bad_header(bytes(rng.randbytes(32)), range_b, obs.sim_time,
                                     obs.chain.genesis.header.difficulty_target, seed=self.agent_seed)
        sub = Submission(
            range=range_b,
            commitment=bytes(rng.randbytes(32)),
            confirmation_witness=bytes(rng.randbytes(32)),
            tip_header=tip_header,
            relayer=self.name,
        )
        priv["attacked"] = True
        return [Action("submit_extension", {"sub": sub})]


class FalseChallenger(Policy):
    """Griefer that disputes honest commitments it has no evidence against."""

    def decide(self, obs: Observation, priv: dict) -> List[Action]:
        st = obs.bridge
        if obs.sim_time < self.params.get("activate_at", 0):
            return []
        if not st.is_relayer(self.name):
            need = st.required_relayer_deposit()
            if obs.my_eth >= need:
                return [Action("become_relayer", {"deposit": need})]
            return []
        rounds = priv.get("rounds", self.params.get("rounds", 1))
        if rounds <= 0 or st.relay_mode != "verification" or st.active is None:
            return []
        if st.active.sub.relayer == self.name:
            return []
        priv["rounds"] = rounds - 1
        return [Action("challenge_commitment", {})]


class DosChallenger(Policy):
    """Spams range challenges with inflated garbage alternatives."""

    def decide(self, obs: Observation, priv: dict) -> List[Action]:
        st = obs.bridge
        if obs.sim_time < self.params.get("activate_at", 0):
            return []
        if not st.is_relayer(self.name):
            need = st.required_relayer_deposit()
            if obs.my_eth >= need:
                return [Action("become_relayer", {"deposit": need})]
            return []
        rounds = priv.get("rounds", self.params.get("rounds", 3))
        if rounds <= 0 or st.relay_mode != "verification" or st.active is None:
            return []
        sub = st.active.sub
        rng = random.Random(f"{self.agent_seed}/{st.active.seq}")
        alt_range = sub.range + st.params.d
        base = st.active.backtrack_from
        prior = st.current_date if base is None else (st.history[base - 1].range if base > 0 else 0)
        if alt_range - prior > st.params.max_extension_len:
            return []
        tip_header = find_bad_header(bytes(rng.randbytes(32)), alt_range, obs.sim_time,
                                     obs.chain.genesis.header.difficulty_target, seed=self.agent_seed)
        alt = Submission(alt_range, bytes(rng.randbytes(32)), bytes(rng.randbytes(32)),
                         tip_header, self.name)
        priv["rounds"] = rounds - 1
        return [Action("challenge_range", {"alt": alt})]


# ---------------------------------------------------------------------------
# operators, crossers, hodlers, reporters
# ---------------------------------------------------------------------------


class RationalOperator(Policy):
    """Opens a bridge, pays unlocks while profitable, absconds when not.

    The abscond predicate is exactly: locked DOGE / true rate > remaining
    collateral, evaluated per bridge.
    """

    def decide(self, obs: Observation, priv: dict) -> List[Action]:
        st = obs.bridge
        actions: List[Action] = []
        y = Fraction(self.params["y"]) if not isinstance(self.params["y"], Fraction) else self.params["y"]

        if not priv.get("opened") and obs.sim_time >= self.params.get("open_at", 0):
            x = self.params["collateral"]
            bounty = self.params.get("burn_bounty", 0)
            if obs.my_eth >= x + bounty:
                head = self.params["head"]
                actions.append(Action("open_bridge", {
                    "x": x, "y": y, "head": head,
                    "crossing_fee": self.params.get("crossing_fee", 0),
                    "min_lock": self.params.get("min_lock"),
                    "burn_bounty": bounty,
                }))
                priv["opened"] = True

        paid = set(priv.get("paid", ()))
        absconded = set(priv.get("absconded", ()))
        honest_forever = self.params.get("never_abscond", False)

        for bridge in st.bridges.values():
            if bridge.operator != self.name or not bridge.minted or bridge.state == "closed":
                continue
            if bridge.bridge_id not in absconded and not honest_forever and \
                    should_abscond(bridge.capacity, obs.true_rate, bridge.collateral):
                balance = obs.doge_balances.get(bridge.head, 0)
                if balance > 0:
                    actions.append(Action("send_doge", {
                        "sender": bridge.head, "receiver": obs.my_doge_addr,
                        "amount": balance, "memo": b"",
                    }))
                    absconded.add(bridge.bridge_id)
                continue

        for burn in st.burns.values():
            for portion in burn.portions:
                if portion.settled is not None:
                    continue
                bridge = st.bridges[portion.bridge_id]
                if bridge.operator != self.name or bridge.bridge_id in absconded:
                    continue
                key = (burn.burn_id, portion.bridge_id)
                if key in paid:
                    continue
                # paying owed DOGE is rational while 1 unit of escrow outvalues it
                if obs.true_rate >= burn.y and obs.doge_balances.get(bridge.head, 0) >= portion.owed_doge:
                    actions.append(Action("send_doge", {
                        "sender": bridge.head, "receiver": burn.dest,
                        "amount": portion.owed_doge, "memo": b"",
                    }))
                    paid.add(key)

        priv["paid"] = sorted(paid)
        priv["absconded"] = sorted(absconded)
        return actions


class HonestCrosser(Policy):
    """Registers and locks DOGE when the rate clears a comfort margin over y.

    Crosses up to `crossings` bridges (default 1), one registration and one
    lock at a time, always tagging the lock with its own ETH identity.
    """

    def decide(self, obs: Observation, priv: dict) -> List[Action]:
        st = obs.bridge
        y = Fraction(self.params["y"])
        margin = Fraction(self.params.get("margin", Fraction(1, 4)))
        if obs.true_rate < (1 + margin) * y:
            return []
        sent_heads = set(priv.get("sent_heads", ()))
        if len(sent_heads) >= self.params.get("crossings", 1):
            return []
        register = self.params.get("register", True)

        my_reg = None
        for r in st.registrations.values():
            if r.crosser == self.name and r.head.hex() not in sent_heads:
                my_reg = r
                break

        if register and my_reg is None:
            for bridge in st.bridges.values():
                if bridge.state == "open" and bridge.y == y and \
                        bridge.head not in st.registrations and bridge.head.hex() not in sent_heads:
                    planned = self.params.get("amount", bridge.capacity)
                    if self.params.get("check_funds", True) and obs.my_doge < planned:
                        return []  # cannot fund the lock; don't waste a registration
                    void_fee = rate_mul(st.params.registration_void_fee_rate, bridge.collateral)
                    deposit = void_fee + self.params.get("deposit_margin", 100)
                    if obs.my_eth >= deposit:
                        return [Action("register", {
                            "head": bridge.head, "deposit": deposit,
                            "lock_bounty": self.params.get("lock_bounty", 0),
                        })]
                    return []
            return []

        if register:
            bridge = next((b for b in st.bridges.values()
                           if b.head == my_reg.head and b.state == "open"), None)
        else:
            bridge = next((b for b in st.bridges.values()
                           if b.state == "open" and b.y == y and b.head.hex() not in sent_heads), None)
        if bridge is None:
            return []

        amount = self.params.get("amount", bridge.capacity)
        if obs.my_doge >= amount:
            sent_heads.add(bridge.head.hex())
            priv["sent_heads"] = sorted(sent_heads)
            return [Action("send_doge", {
                "sender": obs.my_doge_addr, "receiver": bridge.head,
                "amount": amount, "memo": self.name.encode(),
            })]
        return []


class VigilantHodler(Policy):
    """Burns out when the collateral margin thins; reports missing DOGE.

    With params["cross"] set, first behaves as an honest crosser and then
    holds what gets minted (a crosser transmogrified into a hodler).
    """

    def __init__(self, name: str, params: dict, agent_seed: int):
        super().__init__(name, params, agent_seed)
        self._crosser = HonestCrosser(name, params, agent_seed) if params.get("cross") else None

    def decide(self, obs: Observation, priv: dict) -> List[Action]:
        st = obs.bridge
        actions: List[Action] = []
        if self._crosser is not None:
            crosser_priv = dict(priv.get("crosser", {}))
            actions.extend(self._crosser.decide(obs, crosser_priv))
            priv["crosser"] = crosser_priv

        y = Fraction(self.params["y"])
        balance = st.wow_balance(self.name, y)

        if self.params.get("report_missing", True) and balance > 0:
            theft = self._find_theft(obs, y, balance)
            if theft is not None:
                return actions + [theft]

        headroom = Fraction(self.params.get("headroom", Fraction(1, 10)))
        burn_at = self.params.get("burn_at")
        triggered = (burn_at is not None and obs.sim_time >= burn_at) or \
            (self.params.get("burn_on_rate", True) and obs.true_rate < (1 + headroom) * y)
        if balance > 0 and triggered:
            queue = st.y_queues.get(y, [])
            coverage = sum(st.bridges[b].capacity for b in queue)
            cap = self.params.get("burn_amount")
            budget = balance if cap is None else cap - priv.get("burned_total", 0)
            w = min(balance, coverage, budget)
            if w > 0:
                priv["burned_total"] = priv.get("burned_total", 0) + w
                actions.append(Action("burn_wow", {
                    "y": y, "w": w,
                    "dest": self.params.get("dest", obs.my_doge_addr),
                }))
        return actions

    def _find_theft(self, obs: Observation, y: Fraction, balance: int) -> Optional[Action]:
        st = obs.bridge
        heads = {b.head: b for b in st.bridges.values()
                 if b.y == y and b.minted and b.state != "closed"}
        if not heads:
            return None
        unlock_dests = {burn.dest for burn in st.burns.values()}
        for i in range(len(st.history)):
            blocks = self.matched_segment(obs, i)
            if blocks is None:
                continue
            for block in blocks:
                for tx in block.txs:
                    bridge = heads.get(tx.sender)
                    if bridge is None or tx.tx_id in st.used_txs:
                        continue
                    if tx.receiver in unlock_dests:
                        continue  # a legitimate unlock payment, not theft
                    n = min(balance, tx.amount, bridge.capacity)
                    if n < 1:
                        continue
                    report = build_tx_report(obs.chain, obs.chain.best_tip(), st.history, i, tx)
                    return Action("report_missing", {"report": report, "y": y, "n": n})
        return None


class GreedyReporter(Policy):
    """Reveals locks and unlock payments out of matched commitments for bounties."""

    MAX_PER_TURN = 4

    def decide(self, obs: Observation, priv: dict) -> List[Action]:
        st = obs.bridge
        reported = set(priv.get("reported", ()))
        actions: List[Action] = []
        open_heads = {b.head for b in st.bridges.values() if b.state == "open"}
        owing = {}
        for burn in st.burns.values():
            for portion in burn.portions:
                if portion.settled is None:
                    bridge = st.bridges[portion.bridge_id]
                    owing[(bridge.head, burn.dest)] = (burn, portion)

        for i in range(len(st.history)):
            if len(actions) >= self.MAX_PER_TURN:
                break
            blocks = self.matched_segment(obs, i)
            if blocks is None:
                continue
            for block in blocks:
                for tx in block.txs:
                    if len(actions) >= self.MAX_PER_TURN:
                        break
                    if tx.tx_id.hex() in reported or tx.tx_id in st.used_txs:
                        continue
                    if tx.receiver in open_heads:
                        report = build_tx_report(obs.chain, obs.chain.best_tip(), st.history, i, tx)
                        actions.append(Action("report_lock", {"report": report}))
                        reported.add(tx.tx_id.hex())
                    elif (tx.sender, tx.receiver) in owing:
                        burn, portion = owing[(tx.sender, tx.receiver)]
                        if i >= burn.history_len_at_burn and tx.amount >= portion.owed_doge:
                            report = build_tx_report(obs.chain, obs.chain.best_tip(), st.history, i, tx)
                            actions.append(Action("report_unlock", {"burn_id": burn.burn_id, "report": report}))
                            reported.add(tx.tx_id.hex())

        priv["reported"] = sorted(reported)
        return actions


POLICIES = {
    "honest_relayer": HonestRelayer,
    "lazy_relayer": LazyRelayer,
    "orphan_attacker": OrphanAttacker,
    "high_range_attacker": HighRangeAttacker,
    "dos_challenger": DosChallenger,
    "false_challenger": FalseChallenger,
    "rational_operator": RationalOperator,
    "honest_crosser": HonestCrosser,
    "vigilant_hodler": VigilantHodler,
    "greedy_reporter": GreedyReporter,
}


def make_policy(policy_id: str, name: str, params: dict, agent_seed: int) -> Policy:
    if policy_id not in POLICIES:
        raise ConfigError(f"unknown policy {policy_id!r}")
    return POLICIES[policy_id](name, params, agent_seed)
