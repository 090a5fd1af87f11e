"""Deterministic beamline simulator with a virtual clock.

Executes command Scripts against simulated hardware state, producing an
ordered execution log and measurement records. No real time passes; every
command advances a virtual clock by a closed-form duration:

  SetTemperature  |target - current| / ramp minutes (linear ramp)
  MoveMotor       1 s per 10 mm of travel
  Measure         exposure x max(1, number of angles)
  Repeat          body iterations aligned to period boundaries
  Until           quantity ramps linearly toward the threshold; iterations
                  run at period boundaries until the threshold is crossed
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

from .errors import SimulationError
from .interpreter import (GotoPoint, Measure, MoveMotor, Repeat, Script,
                          SetHumidity, SetSample, SetTemperature, Until)

MOTOR_SPEED_MM_PER_S = 10.0
MOTOR_LIMIT_MM = 100.0
TEMP_RANGE = (-200.0, 600.0)
HUMIDITY_RANGE = (0.0, 100.0)
LOG_FORMAT_VERSION = 1


@dataclass
class BeamlineState:
    motor_x: float = 0.0
    motor_y: float = 0.0
    temperature: float = 25.0
    temperature_setpoint: float = 25.0
    ramp: float = 0.0  # C/min of the last temperature command
    humidity: float = 40.0
    sample_name: str | None = None
    default_exposure: float = 1.0
    default_angles: tuple[float, ...] = ()
    clock: float = 0.0  # seconds since reset
    status: str = "idle"  # "idle" | "executing"

    def copy(self) -> "BeamlineState":
        return BeamlineState(**asdict(self))


@dataclass(frozen=True)
class MeasurementRecord:
    clock: float
    kind: str
    protocol: str | None
    exposure: float
    angle: float | None
    position: tuple[float, float]
    temperature: float
    sequence: int


@dataclass(frozen=True)
class Event:
    seq: int
    kind: str  # command-started|command-finished|state-delta|measurement|warning|fault
    clock: float
    payload: dict


@dataclass
class ExecutionLog:
    events: list[Event] = field(default_factory=list)
    records: list[MeasurementRecord] = field(default_factory=list)

    def add(self, kind: str, clock: float, payload: dict) -> Event:
        ev = Event(len(self.events), kind, clock, payload)
        self.events.append(ev)
        return ev


def reset(**overrides) -> BeamlineState:
    """Fresh state: motors at 0, 25 C, 40 % humidity, clock 0."""
    state = BeamlineState()
    for key, value in overrides.items():
        if not hasattr(state, key):
            raise SimulationError(f"unknown state field {key!r}")
        setattr(state, key, value)
    if not TEMP_RANGE[0] <= state.temperature <= TEMP_RANGE[1]:
        raise SimulationError(
            f"temperature {state.temperature} outside {list(TEMP_RANGE)}")
    if not HUMIDITY_RANGE[0] <= state.humidity <= HUMIDITY_RANGE[1]:
        raise SimulationError(
            f"humidity {state.humidity} outside {list(HUMIDITY_RANGE)}")
    for v in (state.motor_x, state.motor_y):
        if not -MOTOR_LIMIT_MM <= v <= MOTOR_LIMIT_MM:
            raise SimulationError(f"motor position {v} outside limits")
    return state


def snapshot(state: BeamlineState) -> dict:
    """Read-only serializable view of the state."""
    view = asdict(state)
    view["default_angles"] = list(state.default_angles)
    view["ramping"] = state.status == "executing"
    return view


def analyze_script(script: Script) -> list[str]:
    """Static checks run before execution; returns a list of problems.

    Rejects Until commands whose quantity cannot reach the threshold:
    with no ramp rate the quantity never moves (the ramp magnitude always
    points toward the threshold, so any positive rate terminates).
    """
    problems: list[str] = []

    def walk(cmd) -> None:
        if isinstance(cmd, Until):
            if cmd.ramp is None:
                problems.append(
                    f"until-condition on {cmd.quantity} has no ramp rate; "
                    "the threshold would never be reached")
            elif cmd.ramp <= 0:
                problems.append(
                    f"until-condition ramp {cmd.ramp} is not positive")
            for sub in cmd.body:
                walk(sub)
        elif isinstance(cmd, Repeat):
            for sub in cmd.body:
                walk(sub)

    for cmd in script.commands:
        walk(cmd)
    return problems


class _Fault(Exception):
    pass


class _Executor:
    def __init__(self, state: BeamlineState, log: ExecutionLog):
        self.state = state
        self.log = log

    def delta(self, **changes) -> None:
        payload = {}
        for key, value in changes.items():
            setattr(self.state, key, value)
            payload[key] = value
        self.log.add("state-delta", self.state.clock, payload)

    def advance(self, seconds: float) -> None:
        if seconds < 0:
            raise SimulationError("clock cannot move backwards")
        self.state.clock += seconds

    def record(self, cmd: Measure, angle: float | None) -> None:
        rec = MeasurementRecord(
            clock=self.state.clock,
            kind=cmd.kind,
            protocol=cmd.protocol,
            exposure=cmd.exposure if cmd.exposure is not None
            else self.state.default_exposure,
            angle=angle,
            position=(self.state.motor_x, self.state.motor_y),
            temperature=round(self.state.temperature, 9),
            sequence=len(self.log.records),
        )
        self.log.records.append(rec)
        self.log.add("measurement", self.state.clock, {
            "kind": rec.kind, "angle": rec.angle,
            "temperature": rec.temperature, "sequence": rec.sequence})

    def run(self, cmd) -> None:
        saved = self.state.copy()
        self.log.add("command-started", self.state.clock,
                     {"command": type(cmd).__name__})
        try:
            self.dispatch(cmd)
        except _Fault as exc:
            clock = self.state.clock
            # roll back the half-applied command, keep the clock honest
            restored = saved
            restored.clock = max(saved.clock, clock)
            self.state.__dict__.update(restored.__dict__)
            self.log.add("fault", self.state.clock,
                         {"command": type(cmd).__name__,
                          "message": str(exc)})
            raise
        finally:
            self.log.add("command-finished", self.state.clock,
                         {"command": type(cmd).__name__})

    def dispatch(self, cmd) -> None:
        if isinstance(cmd, SetTemperature):
            if not TEMP_RANGE[0] <= cmd.target <= TEMP_RANGE[1]:
                raise _Fault(f"temperature {cmd.target} outside hardware "
                             f"limits {list(TEMP_RANGE)}")
            if cmd.ramp <= 0:
                raise _Fault(f"ramp {cmd.ramp} must be positive")
            seconds = abs(cmd.target - self.state.temperature) \
                / cmd.ramp * 60.0
            self.advance(seconds)
            self.delta(temperature=cmd.target,
                       temperature_setpoint=cmd.target, ramp=cmd.ramp)
        elif isinstance(cmd, SetHumidity):
            if not HUMIDITY_RANGE[0] <= cmd.target <= HUMIDITY_RANGE[1]:
                raise _Fault(f"humidity {cmd.target} outside hardware "
                             f"limits {list(HUMIDITY_RANGE)}")
            self.delta(humidity=cmd.target)
        elif isinstance(cmd, MoveMotor):
            attr = f"motor_{cmd.axis}"
            current = getattr(self.state, attr)
            target = current + cmd.amount if cmd.mode == "relative" \
                else cmd.amount
            if not -MOTOR_LIMIT_MM <= target <= MOTOR_LIMIT_MM:
                raise _Fault(f"motor {cmd.axis} target {target} outside "
                             f"+-{MOTOR_LIMIT_MM} mm limits")
            self.advance(abs(target - current) / MOTOR_SPEED_MM_PER_S)
            self.delta(**{attr: target})
        elif isinstance(cmd, GotoPoint):
            for v in (cmd.x, cmd.y):
                if not -MOTOR_LIMIT_MM <= v <= MOTOR_LIMIT_MM:
                    raise _Fault(f"position {v} outside "
                                 f"+-{MOTOR_LIMIT_MM} mm limits")
            travel = max(abs(cmd.x - self.state.motor_x),
                         abs(cmd.y - self.state.motor_y))
            self.advance(travel / MOTOR_SPEED_MM_PER_S)
            self.delta(motor_x=cmd.x, motor_y=cmd.y)
        elif isinstance(cmd, SetSample):
            self.delta(sample_name=cmd.name)
        elif isinstance(cmd, Measure):
            self.measure(cmd)
        elif isinstance(cmd, Repeat):
            self.repeat(cmd)
        elif isinstance(cmd, Until):
            self.until(cmd)
        else:
            raise _Fault(f"unknown command {cmd!r}")

    def measure(self, cmd: Measure) -> None:
        if cmd.position is not None:
            self.dispatch(GotoPoint(cmd.position[0], cmd.position[1]))
        exposure = cmd.exposure if cmd.exposure is not None \
            else self.state.default_exposure
        if exposure <= 0:
            raise _Fault(f"exposure {exposure} must be positive")
        if cmd.direction is not None:
            # scan extent/step is unspecified upstream; note and take a
            # single measurement
            self.log.add("warning", self.state.clock, {
                "message": f"unexpanded scan across {cmd.direction}; "
                           "taking a single measurement"})
        angles = cmd.angles if cmd.angles else (None,)
        for angle in angles:
            self.advance(exposure)
            self.record(cmd, angle)

    def _body_iteration(self, body: tuple) -> None:
        for sub in body:
            self.dispatch(sub)

    def repeat(self, cmd: Repeat) -> None:
        start = self.state.clock
        count = cmd.count if cmd.count is not None else 0
        for i in range(count):
            if cmd.period is not None:
                mark = start + i * cmd.period
                if mark > self.state.clock:
                    self.advance(mark - self.state.clock)
            self._body_iteration(cmd.body)

    def until(self, cmd: Until) -> None:
        if cmd.ramp is None or cmd.ramp <= 0:
            raise _Fault(
                f"until-condition on {cmd.quantity} has no usable ramp; "
                "the threshold would never be reached")
        attr = "temperature" if cmd.quantity == "temperature" \
            else "humidity"
        start_clock = self.state.clock
        start_value = getattr(self.state, attr)
        direction = 1.0 if cmd.threshold >= start_value else -1.0
        rate = cmd.ramp / 60.0  # units per second
        span = abs(cmd.threshold - start_value)
        t_cross = start_clock + span / rate

        def value_at(clock: float) -> float:
            if clock >= t_cross:
                return cmd.threshold
            return start_value + direction * rate * (clock - start_clock)

        iteration = 0
        while True:
            mark = start_clock + iteration * cmd.period \
                if cmd.period is not None else self.state.clock
            if mark >= t_cross or self.state.clock >= t_cross:
                break
            if mark > self.state.clock:
                self.advance(mark - self.state.clock)
                self.delta(**{attr: round(value_at(self.state.clock), 9)})
            before = self.state.clock
            setattr(self.state, attr,
                    round(value_at(self.state.clock), 9))
            self._body_iteration(cmd.body)
            self.delta(**{attr: round(value_at(self.state.clock), 9)})
            if cmd.period is None and self.state.clock <= before:
                raise _Fault("until-condition body does not advance the "
                             "clock; condition cannot make progress")
            iteration += 1
        if t_cross > self.state.clock:
            self.advance(t_cross - self.state.clock)
        self.delta(**{attr: cmd.threshold})
        if attr == "temperature":
            self.state.temperature_setpoint = cmd.threshold
            self.state.ramp = cmd.ramp


def execute(state: BeamlineState,
            script: Script) -> tuple[BeamlineState, ExecutionLog]:
    """Pure transition: run every command in order under the virtual clock.

    The input state is not mutated. On a faulty command, execution halts
    there; the returned state holds the last consistent values.
    """
    if state.status != "idle":
        raise SimulationError("an execution is already in progress")
    log = ExecutionLog()
    working = state.copy()
    problems = analyze_script(script)
    if problems:
        for message in problems:
            log.add("fault", working.clock, {"command": "static-analysis",
                                             "message": message})
        return working, log
    working.status = "executing"
    ex = _Executor(working, log)
    try:
        for cmd in script.commands:
            ex.run(cmd)
    except _Fault:
        pass  # fault event already logged; stop at last consistent state
    working.status = "idle"
    return working, log


def iteration_count_until(start_value: float, threshold: float,
                          ramp: float, period: float) -> int:
    """Closed-form number of body iterations an Until performs."""
    t_cross = abs(threshold - start_value) / (ramp / 60.0)
    return math.ceil(t_cross / period)


def log_to_records(log: ExecutionLog) -> list[dict]:
    """Serialize a log to line-delimited-style records with a header."""
    out = [{"format_version": LOG_FORMAT_VERSION,
            "events": len(log.events), "measurements": len(log.records)}]
    for ev in log.events:
        out.append({"seq": ev.seq, "kind": ev.kind, "clock": ev.clock,
                    "payload": ev.payload})
    return out


def write_log(path: str, log: ExecutionLog) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in log_to_records(log):
            fh.write(json.dumps(rec) + "\n")
