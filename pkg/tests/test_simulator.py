import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlbeam.errors import SimulationError
from nlbeam.interpreter import (GotoPoint, Measure, MoveMotor, Repeat,
                                Script, SetHumidity, SetSample,
                                SetTemperature, Until)
from nlbeam.simulator import (analyze_script, execute,
                              iteration_count_until, log_to_records, reset,
                              snapshot, write_log)


def test_reset_defaults():
    s = reset()
    assert (s.motor_x, s.motor_y) == (0.0, 0.0)
    assert s.temperature == 25.0
    assert s.humidity == 40.0
    assert s.clock == 0.0
    assert s.status == "idle"


def test_reset_is_idempotent():
    assert reset() == reset()


def test_reset_validates_overrides():
    assert reset(temperature=100.0).temperature == 100.0
    with pytest.raises(SimulationError):
        reset(temperature=700.0)
    with pytest.raises(SimulationError):
        reset(humidity=-1.0)
    with pytest.raises(SimulationError):
        reset(nonsense=1)


def test_set_temperature_closed_form():
    state, log = execute(reset(), Script((SetTemperature(200.0, 20.0),)))
    assert state.clock == pytest.approx((200 - 25) / 20 * 60)  # 525 s
    assert state.temperature == 200.0
    assert state.temperature_setpoint == 200.0


def test_execute_does_not_mutate_input():
    before = reset()
    execute(before, Script((SetTemperature(100.0, 10.0),)))
    assert before == reset()


def test_motor_speed_and_limits():
    state, log = execute(reset(), Script((MoveMotor("x", 30.0, "relative"),)))
    assert state.clock == pytest.approx(3.0)
    assert state.motor_x == 30.0
    state, log = execute(state.copy(), Script((MoveMotor("x", 90.0,
                                                         "relative"),)))
    assert state.motor_x == 30.0  # fault: 120 exceeds the 100 mm limit
    assert any(e.kind == "fault" for e in log.events)


def test_measure_records_one_per_angle():
    cmd = Measure(kind="scan", exposure=2.0, angles=(0.1, 0.2, 0.3))
    state, log = execute(reset(), Script((cmd,)))
    assert state.clock == pytest.approx(6.0)
    assert [r.clock for r in log.records] == [2.0, 4.0, 6.0]
    assert [r.angle for r in log.records] == [0.1, 0.2, 0.3]


def test_measure_without_angles_still_records():
    state, log = execute(reset(), Script((Measure(kind="scan",
                                                  exposure=4.0),)))
    assert len(log.records) == 1 and log.records[0].angle is None


def test_repeat_period_alignment():
    body = (Measure(kind="scan", exposure=10.0, angles=(0.19,)),)
    state, log = execute(reset(), Script((Repeat(10, 120.0, body),)))
    assert [r.clock for r in log.records] == [
        10.0 + 120.0 * i for i in range(10)]


def test_repeat_without_period_runs_back_to_back():
    body = (Measure(kind="scan", exposure=3.0),)
    state, log = execute(reset(), Script((Repeat(4, None, body),)))
    assert [r.clock for r in log.records] == [3.0, 6.0, 9.0, 12.0]


def test_until_terminates_at_threshold():
    body = (Measure(kind="scan", exposure=1.0),)
    script = Script((Until("temperature", 300.0, 10.0, 20.0, body),))
    state, log = execute(reset(), script)
    t_cross = (300 - 25) / 10 * 60
    assert state.clock == pytest.approx(t_cross)
    assert state.temperature == 300.0
    assert len(log.records) == iteration_count_until(25.0, 300.0, 10.0, 20.0)
    assert len(log.records) == math.ceil(t_cross / 20.0)


def test_until_downward_ramp():
    script = Script((Until("temperature", -50.0, 30.0, 60.0,
                           (Measure(kind="scan", exposure=1.0),)),))
    state, log = execute(reset(), script)
    assert state.temperature == -50.0
    assert state.clock == pytest.approx((25 + 50) / 30 * 60)


def test_until_on_humidity():
    script = Script((Until("humidity", 80.0, 20.0, 30.0,
                           (Measure(kind="scan", exposure=1.0),)),))
    state, log = execute(reset(), script)
    assert state.humidity == 80.0
    assert state.temperature == 25.0


def test_static_analyzer_rejects_rampless_until():
    script = Script((Until("temperature", 300.0, None, 20.0,
                           (Measure(kind="scan", exposure=1.0),)),))
    problems = analyze_script(script)
    assert problems and "ramp" in problems[0]
    state, log = execute(reset(), script)
    assert state == reset()
    assert log.events[0].kind == "fault"
    assert not log.records


def test_records_stamp_temperature_during_ramp():
    script = Script((Until("temperature", 85.0, 60.0, 15.0,
                           (Measure(kind="scan", exposure=1.0),)),))
    state, log = execute(reset(), script)
    temps = [r.temperature for r in log.records]
    assert temps == sorted(temps)
    assert temps[0] == pytest.approx(25.0)
    assert all(25.0 <= t <= 85.0 for t in temps)


def test_fault_halts_mid_script():
    script = Script((SetHumidity(55.0),
                     MoveMotor("x", 500.0, "relative"),
                     SetSample("never-reached")))
    state, log = execute(reset(), script)
    assert state.humidity == 55.0
    assert state.sample_name is None
    started = [e for e in log.events if e.kind == "command-started"]
    assert len(started) == 2  # third command never starts


def test_empty_script_is_identity():
    state, log = execute(reset(), Script())
    assert state == reset()
    assert not log.events and not log.records


def test_goto_point_moves_both_axes():
    state, log = execute(reset(), Script((GotoPoint(30.0, -40.0),)))
    assert (state.motor_x, state.motor_y) == (30.0, -40.0)
    assert state.clock == pytest.approx(4.0)  # max axis travel / 10 mm/s


def test_measure_at_position_moves_first():
    cmd = Measure(kind="scan", exposure=1.0, position=(10.0, 0.0))
    state, log = execute(reset(), Script((cmd,)))
    assert state.motor_x == 10.0
    assert log.records[0].position == (10.0, 0.0)
    assert log.records[0].clock == pytest.approx(2.0)  # 1 s move + 1 s shot


def test_snapshot_serializable_and_derived_fields():
    import json
    state, log = execute(reset(), Script((SetTemperature(50.0, 10.0),)))
    view = snapshot(state)
    json.dumps(view)
    assert view["temperature"] == 50.0
    assert view["ramping"] is False
    assert snapshot(state) == snapshot(state)


def test_log_serialization(tmp_path):
    import json
    state, log = execute(reset(), Script((Measure(kind="scan",
                                                  exposure=1.0),)))
    records = log_to_records(log)
    assert records[0]["format_version"] == 1
    path = tmp_path / "log.jsonl"
    write_log(path, log)
    lines = path.read_text().splitlines()
    assert json.loads(lines[0])["events"] == len(log.events)


def test_every_command_start_has_matching_finish():
    script = Script((SetHumidity(50.0),
                     Repeat(3, None, (Measure(kind="scan", exposure=1.0),)),
                     SetSample("foil")))
    _, log = execute(reset(), script)
    starts = sum(e.kind == "command-started" for e in log.events)
    finishes = sum(e.kind == "command-finished" for e in log.events)
    assert starts == finishes == len(script.commands)


_body_cmds = st.lists(
    st.one_of(
        st.builds(Measure, st.just("scan"), st.none(),
                  st.floats(0.5, 20.0).map(lambda v: round(v, 1)),
                  st.lists(st.just(0.1), max_size=2).map(tuple)),
        st.builds(MoveMotor, st.sampled_from(["x", "y"]),
                  st.floats(-5.0, 5.0).map(lambda v: round(v, 1)),
                  st.just("absolute"))),
    min_size=1, max_size=3).map(tuple)


@given(st.integers(1, 15), st.none() | st.floats(5.0, 300.0), _body_cmds)
@settings(max_examples=60, deadline=None)
def test_repeat_record_conservation(count, period, body):
    script = Script((Repeat(count, period, body),))
    state, log = execute(reset(), script)
    expected = count * sum(max(1, len(c.angles)) for c in body
                           if isinstance(c, Measure))
    assert len(log.records) == expected


@given(st.lists(st.one_of(
    st.builds(SetTemperature, st.floats(-100, 500), st.floats(1, 100)),
    st.builds(SetHumidity, st.floats(0, 100)),
    st.builds(MoveMotor, st.just("x"), st.floats(-100, 100),
              st.just("absolute")),
    st.builds(Measure, st.just("scan"), st.none(), st.floats(0.5, 5))),
    max_size=6).map(tuple))
@settings(max_examples=60, deadline=None)
def test_clock_monotonic_and_deterministic(commands):
    script = Script(commands)
    state1, log1 = execute(reset(), script)
    state2, log2 = execute(reset(), script)
    assert (state1, log1) == (state2, log2)
    clocks = [e.clock for e in log1.events]
    assert clocks == sorted(clocks)
    assert state1.clock >= 0.0
