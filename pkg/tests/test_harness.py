"""Harness tests: config validation, run/audit/replay, fault injection, CLI."""

import copy
import json

import pytest

from pegsim.errors import ConfigError
from pegsim.harness import audit, load_config, parse_config, replay_check, run
from pegsim.harness.cli import main as cli_main
from pegsim.harness.runner import Trace

BASE = {
    "schema_version": 1,
    "name": "mini",
    "tags": [],
    "seed": 5,
    "clock": {"eth_block_seconds": 14, "doge_block_seconds": 62},
    "params": {"relay_tax": 0},
    "cost_model": {"base_cost": 100, "per_block_cost": 1, "latency_per_block_s": 2},
    "pow": {"target_bits": 250},
    "rate_path": [[0, "1/500"]],
    "agents": [
        {"name": "relay1", "policy": "honest_relayer", "eth": 20000},
    ],
    "end": {"sim_time": 3000},
}


def mini_config(**changes):
    doc = copy.deepcopy(BASE)
    doc.update(changes)
    return doc


class TestConfigValidation:
    def test_parses_base(self):
        config = parse_config(mini_config())
        assert config.seed == 5
        assert config.params.challenge_window_eth_blocks == 80

    def test_bad_schema_version(self):
        with pytest.raises(ConfigError, match="schema_version"):
            parse_config(mini_config(schema_version=2))

    def test_field_paths_in_errors(self):
        doc = mini_config()
        doc["agents"][0]["policy"] = "nope"
        with pytest.raises(ConfigError, match=r"agents\[0\]\.policy"):
            parse_config(doc)

    def test_duplicate_agent_names(self):
        doc = mini_config()
        doc["agents"].append(dict(doc["agents"][0]))
        with pytest.raises(ConfigError, match=r"agents\[1\]\.name"):
            parse_config(doc)

    def test_non_exact_y_rejected(self):
        doc = mini_config()
        doc["agents"][0] = {"name": "op", "policy": "rational_operator", "eth": 10,
                            "params": {"y": "2/3", "collateral": 9}}
        with pytest.raises(ConfigError, match=r"agents\[0\]\.params\.y"):
            parse_config(doc)

    def test_unknown_param_rejected(self):
        with pytest.raises(ConfigError, match=r"params\.zap"):
            parse_config(mini_config(params={"zap": 1}))

    def test_bad_params_combination(self):
        with pytest.raises(ConfigError, match="params"):
            parse_config(mini_config(params={"k": 30, "d": 20}))

    def test_rate_path_must_start_at_zero(self):
        with pytest.raises(ConfigError, match=r"rate_path\[0\]"):
            parse_config(mini_config(rate_path=[[5, "1/500"]]))

    def test_window_recomputed_from_clock(self):
        doc = mini_config(clock={"eth_block_seconds": 10, "doge_block_seconds": 60})
        config = parse_config(doc)
        assert config.params.challenge_window_eth_blocks == 108  # ceil(18*60/10)


class TestRunAndReplay:
    def test_deterministic_trace_digest(self):
        config = parse_config(mini_config())
        assert run(config).digest() == run(config).digest()

    def test_different_seed_diverges(self):
        config = parse_config(mini_config())
        t1 = run(config)
        t2 = run(config.with_seed(6))
        # the relay content differs even though block times are deterministic:
        # mining seeds derive from the scenario seed
        assert t1.digest() != t2.digest()

    def test_replay_check_self(self):
        config = parse_config(mini_config())
        trace = run(config)
        assert replay_check(config, trace)

    def test_replay_check_seed_mismatch(self):
        config = parse_config(mini_config())
        trace = run(config)
        result = replay_check(config.with_seed(6), trace)
        assert not result
        assert result.first_divergence is not None

    def test_replay_check_truncated(self):
        config = parse_config(mini_config())
        trace = run(config)
        truncated = Trace(trace.events[:-3])
        result = replay_check(config, truncated)
        assert not result
        assert result.first_divergence == len(truncated.events)


class TestAudit:
    def test_clean_run_audits_clean(self):
        trace = run(parse_config(mini_config()))
        report = audit(trace.events)
        assert report.ok
        assert report.events == len(trace.events)

    def test_empty_trace_warns(self):
        report = audit([])
        assert report.ok
        assert "EmptyTrace" in report.warnings

    def test_corrupted_mint_flagged_at_seq(self):
        config = load_config("scenarios/lifecycle_happy_path.json")
        trace = run(config)
        events = [json.loads(line) for line in trace.lines()]
        mint_seq = next(e["seq"] for e in events if e["kind"] == "mint")
        events[mint_seq]["payload"]["minted"] += 7
        report = audit(events)
        assert not report.ok
        assert any(v.seq == mint_seq and v.rule == "SupplyDelta" for v in report.violations)

    def test_corrupted_snapshot_flagged(self):
        config = load_config("scenarios/lifecycle_happy_path.json")
        trace = run(config)
        events = [json.loads(line) for line in trace.lines()]
        mint_seq = next(e["seq"] for e in events if e["kind"] == "mint")
        events[mint_seq]["agg"]["supply"]["1/1000"] += 3
        report = audit(events)
        assert not report.ok
        assert any(v.seq == mint_seq and v.rule in ("Invariant1", "SupplyDelta")
                   for v in report.violations)


class TestOracleAgreement:
    @pytest.mark.parametrize("scenario", ["orphan_attack", "fuzz_random", "dos_challenge",
                                          "false_challenge"])
    def test_three_way_agreement(self, scenario):
        # For every proof thread that received a proof: the oracle's verdict,
        # direct verification, and "revealed headers equal the best-chain
        # segment" must all agree.
        from pegsim.chainsim import block_hash
        from pegsim.harness.runner import SimulationRunner
        from pegsim.proofsys import verify_extension_proof

        runner = SimulationRunner(load_config(f"scenarios/{scenario}.json"))
        trace = runner.run()
        verdicts = {e["payload"]["thread_id"]: e["payload"]["verdict"]
                    for e in trace.events if e["kind"] == "proof_resolved"}
        checked = 0
        for thread in runner.contract.threads.values():
            if thread.proof is None or thread.thread_id not in verdicts:
                continue
            traced = verdicts[thread.thread_id]
            if traced == "timed_out":
                continue
            direct = verify_extension_proof(thread.prior_tip_header, thread.sub,
                                            thread.proof, runner.contract.params)
            assert (traced == "accept") == direct.accepted
            tip = runner.view.best_tip()
            tip_ord = runner.view.blocks[tip].header.ordinal
            on_best = False
            if thread.sub.range <= tip_ord:
                segment = runner.view.path_blocks(tip, thread.prior_date + 1, thread.sub.range)
                on_best = tuple(b.header for b in segment) == thread.proof.revealed_headers
            assert direct.accepted == on_best, thread.thread_id
            checked += 1
        if scenario in ("orphan_attack", "false_challenge"):
            assert checked >= 1


class TestFalseChallenge:
    def test_vindication_costs_the_challenger(self):
        # a baseless commitment challenge: the honest relayer proves out, the
        # challenger's deposit pays the oracle plus the compensation reward
        config = load_config("scenarios/false_challenge.json")
        trace = run(config)
        accepts = [e for e in trace.events if e["kind"] == "proof_resolved"
                   and e["payload"]["verdict"] == "accept"]
        assert len(accepts) == 1
        p = accepts[0]["payload"]
        assert p["payer"] == "griefer"
        assert p["paid"] == p["cost"] + p["reward"]
        summary = trace.summary
        assert summary["relayer_deposits"]["griefer"] == 10_110 - p["paid"]
        assert summary["relayer_deposits"]["relay1"] == 10_110  # untouched
        assert summary["history_len"] >= 3  # the relay kept progressing
        assert audit(trace.events).ok


class TestRelayLiveness:
    def test_current_date_tracks_tip(self):
        # with honest relayers and no adversary, every accepted extension
        # lands within c+d of the tip as of its acceptance
        config = load_config("scenarios/lifecycle_happy_path.json")
        trace = run(config)
        c_plus_d = config.params.c + config.params.d
        accepts = [e for e in trace.events if e["kind"] == "accept"]
        assert accepts
        for e in accepts:
            tip_ordinal = e["t"] // config.clock.doge_block_seconds
            assert tip_ordinal - e["payload"]["range"] <= c_plus_d, e


class TestScryptVariant:
    def test_runs_with_reduced_scrypt_pow(self):
        doc = mini_config(pow={"target_bits": 254, "fn": "scrypt"})
        doc["end"] = {"sim_time": 1500}
        config = parse_config(doc)
        trace = run(config)
        assert audit(trace.events).ok
        blocks = [e for e in trace.events if e["kind"] == "doge_block"]
        assert len(blocks) >= 20


class TestDeepBacktrackDispatch:
    def test_proposal_finalizes_through_the_queue(self):
        # drive the propose_deep action through the runner's dispatch and let
        # the scheduled finalize event land after the objection delay
        from pegsim.agents import Action
        from pegsim.bridge import build_submission
        from pegsim.harness.runner import SimulationRunner

        doc = mini_config()
        doc["end"] = {"sim_time": 90000}  # > 24h
        config = parse_config(doc)
        runner = SimulationRunner(config)
        runner.queue.schedule(62, ("doge_block", {}))
        runner.queue.schedule(14, ("turns", {}))
        runner.queue.run_until(700, runner._handle)  # bring up chain + relayer

        view = runner.view
        tip = view.best_tip()
        sub = build_submission(view, tip, 0, 1, "relay1", config.params.c)
        agent = runner.agents[0]
        runner._apply_action(agent, Action("propose_deep", {"from_index": 0, "sub": sub}))
        assert runner.contract.deep_proposal is not None
        runner.queue.run_until(700 + 24 * 3600 + 1, runner._handle)
        assert runner.contract.deep_proposal is None
        assert [e.range for e in runner.contract.history][:1] == [1]

    def test_objection_through_dispatch_cancels(self):
        from pegsim.agents import Action
        from pegsim.bridge import build_submission
        from pegsim.harness.runner import SimulationRunner

        config = parse_config(mini_config())
        runner = SimulationRunner(config)
        runner.queue.schedule(62, ("doge_block", {}))
        runner.queue.schedule(14, ("turns", {}))
        runner.queue.run_until(700, runner._handle)
        sub = build_submission(runner.view, runner.view.best_tip(), 0, 1, "relay1", config.params.c)
        agent = runner.agents[0]
        runner._apply_action(agent, Action("propose_deep", {"from_index": 0, "sub": sub}))
        runner._apply_action(agent, Action("object_deep", {}))
        assert runner.contract.deep_proposal is None


class TestCli:
    def test_run_and_audit_and_replay(self, tmp_path):
        config_path = tmp_path / "mini.json"
        config_path.write_text(json.dumps(mini_config()))
        trace_path = tmp_path / "trace.ndjson"
        assert cli_main(["run", str(config_path), "--out", str(trace_path)]) == 0
        assert cli_main(["audit", str(trace_path)]) == 0
        assert cli_main(["replay", str(config_path), str(trace_path)]) == 0
        assert cli_main(["replay", str(config_path), str(trace_path), "--seed", "99"]) == 1

    def test_bad_config_exits_2(self, tmp_path):
        config_path = tmp_path / "bad.json"
        config_path.write_text(json.dumps(mini_config(schema_version=9)))
        assert cli_main(["run", str(config_path)]) == 2

    def test_scenarios_list_and_run_all(self):
        assert cli_main(["scenarios", "list", "--dir", "scenarios"]) == 0
        assert cli_main(["scenarios", "run-all", "--dir", "scenarios"]) == 0

    def test_corpus_has_at_least_ten(self):
        import glob

        assert len(glob.glob("scenarios/*.json")) >= 10
