import pytest

from arcall import sim
from arcall.metrics import compute_metrics, latency_breakdown, media_latencies


def scenario(actions, **overrides):
    data = {"wearer": "alice", "friend": "bob", "actions": actions}
    data.update(overrides)
    return data


BASIC = scenario([
    {"t": 0, "actor": "wearer", "op": "start",
     "config": {"arcall_duration_s": 300, "dropin_duration_s": 60, "blur_level": 3}},
    {"t": 5000, "actor": "friend", "op": "drop_in"},
    {"t": 10_000, "actor": "friend", "op": "project", "content_id": "dragon"},
    {"t": 15_000, "actor": "wearer", "op": "tap"},
    {"t": 40_000, "actor": "wearer", "op": "end_session"},
])

NO_DELAY = sim.NetworkModel(base_delay_ms=0, jitter_ms=0, processing_ms=0)


def events(log, kind):
    return [r for r in log if r["event"] == kind]


# --- determinism -----------------------------------------------------------

def test_same_seed_gives_byte_identical_logs():
    a = sim.run_scenario(BASIC, sim.NetworkModel(seed=99))
    b = sim.run_scenario(BASIC, sim.NetworkModel(seed=99))
    assert sim.log_to_jsonl(a) == sim.log_to_jsonl(b)


def test_different_seeds_differ():
    a = sim.run_scenario(BASIC, sim.NetworkModel(seed=1))
    b = sim.run_scenario(BASIC, sim.NetworkModel(seed=2))
    assert sim.log_to_jsonl(a) != sim.log_to_jsonl(b)


def test_empty_scenario_empty_log():
    assert sim.run_scenario(scenario([])) == []


def test_rng_reference_sequence():
    # xorshift64* reference values; any reimplementation of the documented
    # law (e.g. the console) must reproduce these from seed 1
    rng = sim._XorShift64Star(1)
    assert [rng.next_u64() for _ in range(3)] == [
        5180492295206395165,
        12380297144915551517,
        13389498078930870103,
    ]
    zero_seeded = sim._XorShift64Star(0)  # zero state is replaced, never sticks
    assert zero_seeded.next_u64() == 973819730272012410


# --- scripted timing ----------------------------------------------------------

def test_dropin_with_two_taps_ends_at_start_plus_120s():
    script = scenario([
        {"t": 0, "actor": "wearer", "op": "start",
         "config": {"arcall_duration_s": 300, "dropin_duration_s": 60}},
        {"t": 5000, "actor": "friend", "op": "drop_in"},
        {"t": 20_000, "actor": "wearer", "op": "tap"},
        {"t": 30_000, "actor": "wearer", "op": "tap"},
        {"t": 200_000, "actor": "wearer", "op": "end_session"},
    ])
    log = sim.run_scenario(script, NO_DELAY)
    start = events(log, "dropin_start")[0]
    end = events(log, "dropin_end")[0]
    assert end["at"] - start["t"] == 120_000
    assert end["cause"] == "expired"
    assert events(log, "extend")[-1]["ends_at"] == start["t"] + 120_000


def test_session_expires_when_not_ended():
    script = scenario([
        {"t": 0, "actor": "wearer", "op": "start", "config": {"arcall_duration_s": 300}},
    ], auto_stream=False)
    log = sim.run_scenario(script, NO_DELAY)
    end = events(log, "session_end")[0]
    assert end["cause"] == "expired"
    assert end["t"] == 300_000


# --- thermal model ---------------------------------------------------------------

def test_thermal_step_examples():
    state = sim.ThermalState.from_celsius(ambient_c=25.0, heat_c_per_s=0.5)
    assert sim.thermal_step(state, 0, True) == state
    hot = sim.thermal_step(sim.ThermalState.from_celsius(temp_c=30.0, heat_c_per_s=0.5), 60, True)
    assert hot.temp_c == 60.0
    cooled = sim.thermal_step(sim.ThermalState.from_celsius(temp_c=60.0), 1000, False)
    assert cooled.temp_c == 25.0  # floors at ambient exactly


def test_thermal_recurrence_matches_stepwise_oracle():
    state = sim.ThermalState.from_celsius()
    stepped = state
    for _ in range(137):
        stepped = sim.thermal_step(stepped, 1, True)
    assert stepped == sim.thermal_step(state, 137, True)
    cooling = stepped
    for _ in range(500):
        cooling = sim.thermal_step(cooling, 1, False)
    assert cooling == sim.thermal_step(stepped, 500, False)
    assert cooling.temp_mc == cooling.ambient_mc


def test_unextended_dropin_peaks_at_46_celsius():
    script = scenario([
        {"t": 0, "actor": "wearer", "op": "start",
         "config": {"arcall_duration_s": 300, "dropin_duration_s": 60}},
        {"t": 5000, "actor": "friend", "op": "drop_in"},
        {"t": 100_000, "actor": "wearer", "op": "end_session"},
    ])
    log = sim.run_scenario(script, NO_DELAY)
    report = compute_metrics(log)
    assert report.peak_temp_c == 46.0
    assert report.peak_temp_c < sim.ThermalState().cutoff_mc / 1000
    assert events(log, "thermal_cutoff") == []


def test_long_extension_reports_cutoff_crossing():
    actions = [
        {"t": 0, "actor": "wearer", "op": "start",
         "config": {"arcall_duration_s": 300, "dropin_duration_s": 60}},
        {"t": 5000, "actor": "friend", "op": "drop_in"},
    ]
    actions += [{"t": 10_000 + i * 1000, "actor": "wearer", "op": "tap"} for i in range(8)]
    log = sim.run_scenario(scenario(actions, auto_stream=False), NO_DELAY)
    # 300 s of streaming heats 25 + 0.35 * 300 past the 55 C cutoff; the
    # drop-in still runs to its scheduled end (duration caps, not kill
    # switches), and here it outlives the session expiry at 300 s
    crossings = events(log, "thermal_cutoff")
    assert len(crossings) == 1
    end = events(log, "dropin_end")[0]
    start = events(log, "dropin_start")[0]
    assert end["at"] - start["t"] == (60 + 8 * 30) * 1000
    assert events(log, "session_end")[0]["cause"] == "expired"
    assert end["at"] > 300_000  # ran past the parent's expiry


# --- network model -----------------------------------------------------------

def test_zero_jitter_latency_is_constant():
    net = sim.NetworkModel(base_delay_ms=20, jitter_ms=0, processing_ms=5)
    log = sim.run_scenario(BASIC, net)
    latencies = set(media_latencies(log))
    assert latencies == {45}


def test_default_model_p50_meets_budget():
    log = sim.run_scenario(BASIC)
    report = latency_breakdown(log)
    assert report.sample_count > 100
    assert report.within_budget
    assert abs(report.p50_ms - 75) <= 5


def test_slow_network_flagged_over_budget():
    log = sim.run_scenario(BASIC, sim.NetworkModel(base_delay_ms=80, jitter_ms=10))
    report = latency_breakdown(log)
    assert report.p50_ms > 100
    assert not report.within_budget


def test_network_model_validation():
    with pytest.raises(Exception):
        sim.NetworkModel(base_delay_ms=5, jitter_ms=10)
    with pytest.raises(Exception):
        sim.NetworkModel(base_delay_ms=-1)


# --- conservation and gating --------------------------------------------------

def test_every_control_send_reaches_server_once():
    log = sim.run_scenario(BASIC)
    control_sends = [r for r in log if r["event"] == "send"
                     and r["type"] not in ("FrameChunk", "AudioChunk")]
    server_deliveries = [r for r in log if r["event"] == "deliver" and r["to"] == "server"]
    assert len(control_sends) == len(server_deliveries)
    assert len(control_sends) >= 4


def test_media_sends_are_delivered_or_dropped():
    log = sim.run_scenario(BASIC)
    media_sends = sum(1 for r in log if r["event"] == "send"
                      and r["type"] in ("FrameChunk", "AudioChunk"))
    media_delivered = sum(1 for r in log if r["event"] == "deliver"
                          and r["to"] != "server" and r["type"] in ("FrameChunk", "AudioChunk"))
    media_dropped = sum(1 for r in log if r["event"] == "drop")
    assert media_sends == media_delivered + media_dropped
    assert media_dropped > 0  # gating was actually exercised


# --- scenario validation ----------------------------------------------------------

def test_scenario_rejects_nonmonotone_time():
    with pytest.raises(sim.ScenarioInvalid):
        sim.Scenario.from_dict(scenario([
            {"t": 100, "actor": "wearer", "op": "start"},
            {"t": 50, "actor": "friend", "op": "drop_in"},
        ]))


def test_scenario_rejects_unknown_actor_and_op():
    with pytest.raises(sim.ScenarioInvalid):
        sim.Scenario.from_dict(scenario([{"t": 0, "actor": "mallory", "op": "start"}]))
    with pytest.raises(sim.ScenarioInvalid):
        sim.Scenario.from_dict(scenario([{"t": 0, "actor": "wearer", "op": "dance"}]))


def test_bad_tick_interval_rejected():
    with pytest.raises(sim.ScenarioInvalid):
        sim.run_scenario(BASIC, tick_interval_ms=500)


def test_scenario_file_roundtrip(tmp_path):
    import json
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(BASIC))
    loaded = sim.Scenario.from_file(path)
    assert loaded.actions[0].op == "start"
    assert loaded.friend == "bob"
