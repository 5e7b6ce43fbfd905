import copy
import math

import pytest

from pmatch.bench import random_profiles
from pmatch.oracle import oracle_match
from pmatch.similarity import AttributeProfile
from pmatch.counters import (
    DEFAULT_ENERGY_MODEL,
    EmatchParams,
    OpCounters,
    energy_estimate,
    expected_counters,
    framing_overhead,
    len_filter_payload,
    verify_counters,
)
from pmatch.report import RUN_COLUMNS, run_rows, write_csv
from pmatch.runner import (
    Scenario,
    ScenarioUser,
    _build_sessions,
    demo_scenario,
    drive_session,
    load_scenario,
    run_scenario,
)


class TestExpectedCounters:
    def test_initiator_online(self):
        c = expected_counters("pmatch", "initiator", 200, 10)
        assert c.online.exp1024_ops == 400

    def test_responder_bytes(self):
        c = expected_counters("pmatch", "responder", 100, 10)
        assert c.bytes_sent == 2 * 100 * 1024 // 8  # 25600 bytes

    def test_offline_m1(self):
        c = expected_counters("pmatch", "initiator", 1, 10)
        assert c.offline.exp1024_ops == 3 and c.offline.hash_ops == 1

    def test_responder_online(self):
        c = expected_counters("pmatch", "responder", 7, 10)
        assert c.online.exp1024_ops == 21

    def test_enhanced_responder_extra_exp(self):
        c = expected_counters("pmatch+", "responder", 10, 10)
        assert c.online.exp1024_ops == 40

    def test_ematch_needs_params(self):
        with pytest.raises(ValueError):
            expected_counters("ematch", "initiator", 10, 10)

    def test_ematch_closed_form(self):
        em = EmatchParams(length=400, hash_count=12, shared_count=11, size_a=18, size_b=9)
        ci = expected_counters("ematch", "initiator", 5, 10, ematch=em)
        cr = expected_counters("ematch", "responder", 5, 10, ematch=em)
        assert ci.offline.hash_ops == 12 * 18
        assert cr.online.hash_ops == 12 * 9
        assert ci.bytes_sent == len_filter_payload(em)

    def test_rejects_unknown(self):
        with pytest.raises(ValueError):
            expected_counters("other", "initiator", 5, 10)
        with pytest.raises(ValueError):
            expected_counters("pmatch", "observer", 5, 10)


class TestVerifyCounters:
    def run_pair(self, m, prime):
        pa, pb = random_profiles(m, 10, b"verify-%d" % m)
        users = (ScenarioUser("A", pa, 0.0, True), ScenarioUser("B", pb, 0.0))
        sc = Scenario(users=users, protocol="pmatch", prime_bits=prime.bits, min_attributes=1)
        ini, res = _build_sessions(sc, sc.responders[0], 0, prime, None)
        drive_session(ini, res)
        return ini, res

    def test_instrumented_run_matches(self, prime256):
        m = 20
        ini, res = self.run_pair(m, prime256)
        report = verify_counters(
            ini.counters,
            expected_counters("pmatch", "initiator", m, 10, prime_bits=256),
            framing_bytes_sent=framing_overhead("pmatch", "initiator", m),
            framing_bytes_received=framing_overhead("pmatch", "responder", m),
            element_count_sent=4 * m,
            element_count_received=2 * m,
        )
        assert report.matches, report.mismatches
        report = verify_counters(
            res.counters,
            expected_counters("pmatch", "responder", m, 10, prime_bits=256),
            framing_bytes_sent=framing_overhead("pmatch", "responder", m),
            framing_bytes_received=framing_overhead("pmatch", "initiator", m),
            element_count_sent=2 * m,
            element_count_received=4 * m,
        )
        assert report.matches, report.mismatches

    def test_double_encryption_bug_flagged(self, prime256):
        # a faulty initiator that re-encrypts every attribute twice would
        # burn one extra exponentiation per attribute online
        m = 10
        ini, _ = self.run_pair(m, prime256)
        buggy = copy.deepcopy(ini.counters)
        buggy.online.exp1024_ops += m
        report = verify_counters(
            buggy,
            expected_counters("pmatch", "initiator", m, 10, prime_bits=256),
            framing_bytes_sent=framing_overhead("pmatch", "initiator", m),
            framing_bytes_received=framing_overhead("pmatch", "responder", m),
            element_count_sent=4 * m,
            element_count_received=2 * m,
        )
        assert not report.matches
        assert any("online.exp1024_ops" in msg for msg in report.mismatches)

    def test_ematch_much_cheaper_than_pmatch_on_wire(self, prime256):
        m = 100
        pa, pb = random_profiles(m, 10, b"wire")
        users = (ScenarioUser("A", pa, 0.0, True), ScenarioUser("B", pb, 0.0))
        sc = Scenario(users=users, protocol="pmatch", prime_bits=256, min_attributes=1)
        ini_p, res_p = _build_sessions(sc, sc.responders[0], 0, prime256, None)
        drive_session(ini_p, res_p)
        sc_e = Scenario(users=users, protocol="ematch", min_attributes=1)
        sc_e.ematch = EmatchParams(length=16384, hash_count=12, shared_count=11, pool_seed=b"wp")
        ini_e, res_e = _build_sessions(sc_e, sc_e.responders[0], 0, None, sc_e.attribute_pool())
        drive_session(ini_e, res_e)
        pmatch_bytes = ini_p.counters.bytes_sent + ini_p.counters.bytes_received
        ematch_bytes = ini_e.counters.bytes_sent + ini_e.counters.bytes_received
        assert ematch_bytes < pmatch_bytes / 5


class TestEnergy:
    def test_zero(self):
        e = energy_estimate(OpCounters(), (0.0, 0.0))
        assert e.joules == 0.0

    def test_compute_only(self):
        e = energy_estimate(OpCounters(), (1.0, 1.0))
        assert e.joules == pytest.approx(0.38 + 0.3167, abs=1e-9)

    def test_traffic_only(self):
        c = OpCounters(bytes_sent=10000, bytes_received=10000)
        e = energy_estimate(c, (0.0, 0.0))
        assert e.joules == pytest.approx(0.048 + 0.067, abs=1e-9)
        assert e.tx_j == pytest.approx(0.048, abs=1e-9)
        assert e.rx_j == pytest.approx(0.067, abs=1e-9)

    def test_breakdown_sums(self):
        c = OpCounters(bytes_sent=1234, bytes_received=987)
        e = energy_estimate(c, (0.5, 2.0))
        assert e.joules == pytest.approx(e.compute_j + e.runtime_j + e.tx_j + e.rx_j)

    def test_default_constants(self):
        m = DEFAULT_ENERGY_MODEL
        assert m.compute_power_w == 0.38
        assert m.runtime_power_w == 0.3167
        assert m.tx_j_per_byte == 4.8e-6
        assert m.rx_j_per_byte == 6.7e-6

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            energy_estimate(OpCounters(), (-1.0, 0.0))


class TestOracle:
    def test_demo_values(self, demo):
        r = oracle_match(demo["Alice"], demo["Emmy"])
        assert r.tanimoto == pytest.approx(0.2316, abs=1e-4)
        r = oracle_match(demo["Alice"], demo["Frank"])
        assert r.priority_ochiai == pytest.approx(11 / math.sqrt(198), abs=1e-12)
        assert r.common_count == 2 and r.weighted_intersection == 11

    def test_disjoint(self):
        a = AttributeProfile.from_mapping({"x": 3})
        b = AttributeProfile.from_mapping({"y": 4})
        r = oracle_match(a, b)
        assert r.tanimoto is None
        assert r.priority_ochiai == 0.0
        assert r.common_count == 0 and r.weighted_intersection == 0


class TestRunner:
    def test_demo_run_report_deterministic(self, tmp_path):
        rows1 = run_rows(run_scenario(demo_scenario("pmatch")), "pmatch")
        rows2 = run_rows(run_scenario(demo_scenario("pmatch")), "pmatch")
        p1 = write_csv(tmp_path / "a.csv", RUN_COLUMNS, rows1)
        p2 = write_csv(tmp_path / "b.csv", RUN_COLUMNS, rows2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_transport_neutrality(self):
        r_in = run_scenario(demo_scenario("pmatch"), transport_kind="inprocess")
        r_loop = run_scenario(demo_scenario("pmatch"), transport_kind="loopback")
        for a, b in zip(r_in.results, r_loop.results):
            assert a.outcome == b.outcome
            assert a.initiator_counters.bytes_sent == b.initiator_counters.bytes_sent
            assert a.initiator_counters.bytes_received == b.initiator_counters.bytes_received

    def test_identical_profile_all_protocols(self, demo):
        base = demo_scenario("pmatch")
        twin = ScenarioUser("Twin", demo["Alice"], 0.0)
        users = (next(u for u in base.users if u.initiator), twin)
        for proto, tol in (("pmatch", 1e-9), ("pmatch+", 1e-9), ("ematch", 0.2)):
            sc = Scenario(users=users, protocol=proto)
            sc.ematch = EmatchParams(length=4000, hash_count=12, shared_count=11, pool_seed=b"tw")
            result = run_scenario(sc)
            assert result.results[0].outcome.similarity == pytest.approx(1.0, abs=tol)

    def test_session_error_does_not_kill_run(self, demo):
        users = (
            ScenarioUser("Alice", demo["Alice"], 0.0, True),
            ScenarioUser("Tiny", demo["Bob"], 0.0),
            ScenarioUser("Frank", demo["Frank"], 0.0),
        )
        sc = Scenario(users=users, protocol="pmatch", prime_bits=64, min_attributes=3)
        result = run_scenario(sc)
        by_name = {r.candidate: r for r in result.results}
        assert by_name["Tiny"].error is not None  # 2 attributes < minimum 3
        assert by_name["Frank"].outcome is None or by_name["Frank"].error is None

    def test_scenario_validation(self, demo):
        users = (ScenarioUser("A", demo["Alice"], 0.5, False),)
        with pytest.raises(ValueError):
            Scenario(users=users)

    def test_scenario_file_roundtrip(self, tmp_path):
        sc = load_scenario("scenarios/table2.json")
        assert sc.protocol == "pmatch"
        assert len(sc.users) == 6
        result = run_scenario(sc)
        assert [n for n, _ in result.ranking] == ["Frank", "Bob", "David", "Charles", "Emmy"]
