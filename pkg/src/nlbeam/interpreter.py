"""Compile labeled token sequences into typed beamline command scripts.

Stages: BIO repair -> span grouping -> value parsing -> per-group command
compilation -> script assembly (binding Repeat/Until wrappers to bodies)
-> rendering to a pseudo-script that round-trips through parse_script.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field, replace

from .errors import CompileError, ScriptError
from .registry import CATEGORICAL, ENTITY_BY_NAME, POINT, split_label
from .tagger import TaggerModel, predict
from .text import TokenSequence, tokenize

DEFAULT_RAMP_C_PER_MIN = 10.0

_NUM_RE = re.compile(r"[+-]?\d+(?:\.\d+)?")
_SCALAR_RE = re.compile(r"^([+-]?\d+(?:\.\d+)?)([a-zA-Z]*)$")


# --- command AST -----------------------------------------------------------


@dataclass(frozen=True)
class SetTemperature:
    target: float
    ramp: float  # degrees C per minute


@dataclass(frozen=True)
class SetHumidity:
    target: float


@dataclass(frozen=True)
class MoveMotor:
    axis: str  # "x" | "y"
    amount: float  # mm; displacement or absolute target
    mode: str  # "relative" | "absolute"


@dataclass(frozen=True)
class GotoPoint:
    x: float
    y: float


@dataclass(frozen=True)
class SetSample:
    name: str


@dataclass(frozen=True)
class Measure:
    kind: str
    protocol: str | None = None
    exposure: float | None = None
    angles: tuple[float, ...] = ()
    position: tuple[float, float] | None = None
    direction: str | None = None


@dataclass(frozen=True)
class Repeat:
    count: int | None  # None = unbounded, resolved during assembly
    period: float | None = None  # seconds between iteration starts
    body: tuple = ()


@dataclass(frozen=True)
class Until:
    quantity: str  # "temperature" | "humidity"
    threshold: float
    ramp: float | None = None  # units per minute
    period: float | None = None  # seconds; None = iterations run back to back
    body: tuple = ()


Command = (SetTemperature | SetHumidity | MoveMotor | GotoPoint | SetSample
           | Measure | Repeat | Until)


@dataclass(frozen=True)
class Script:
    commands: tuple = ()


# Commands a Repeat/Until body may capture.
_REPEATABLE = (Measure, MoveMotor, GotoPoint)


def validate_command(cmd: Command) -> None:
    """Range-check one command (recursively); raises ScriptError."""
    if isinstance(cmd, SetTemperature):
        if not -200 <= cmd.target <= 600:
            raise ScriptError(
                f"temperature {cmd.target} outside [-200, 600] C")
        if not 0 < cmd.ramp <= 600:
            raise ScriptError(f"ramp {cmd.ramp} outside (0, 600] C/min")
    elif isinstance(cmd, SetHumidity):
        if not 0 <= cmd.target <= 100:
            raise ScriptError(f"humidity {cmd.target} outside [0, 100] %")
    elif isinstance(cmd, MoveMotor):
        if cmd.axis not in ("x", "y"):
            raise ScriptError(f"unknown motor axis {cmd.axis!r}")
        if cmd.mode not in ("relative", "absolute"):
            raise ScriptError(f"unknown move mode {cmd.mode!r}")
        if not -100 <= cmd.amount <= 100:
            raise ScriptError(f"move {cmd.amount} outside [-100, 100] mm")
    elif isinstance(cmd, GotoPoint):
        for v in (cmd.x, cmd.y):
            if not -100 <= v <= 100:
                raise ScriptError(f"position {v} outside [-100, 100] mm")
    elif isinstance(cmd, SetSample):
        if not cmd.name:
            raise ScriptError("sample name is empty")
    elif isinstance(cmd, Measure):
        if cmd.exposure is not None and not cmd.exposure > 0:
            raise ScriptError(f"exposure {cmd.exposure} must be positive")
        if cmd.position is not None:
            for v in cmd.position:
                if not -100 <= v <= 100:
                    raise ScriptError(
                        f"position {v} outside [-100, 100] mm")
    elif isinstance(cmd, Repeat):
        if cmd.count is None or cmd.count < 1:
            raise ScriptError(f"repeat count {cmd.count} must be >= 1")
        if cmd.period is not None and not cmd.period > 0:
            raise ScriptError(f"period {cmd.period} must be positive")
        for sub in cmd.body:
            validate_command(sub)
    elif isinstance(cmd, Until):
        if cmd.quantity not in ("temperature", "humidity"):
            raise ScriptError(f"unknown quantity {cmd.quantity!r}")
        limit = (-200, 600) if cmd.quantity == "temperature" else (0, 100)
        if not limit[0] <= cmd.threshold <= limit[1]:
            raise ScriptError(
                f"threshold {cmd.threshold} outside {list(limit)}")
        if cmd.ramp is not None and not cmd.ramp > 0:
            raise ScriptError(f"ramp {cmd.ramp} must be positive")
        if cmd.period is not None and not cmd.period > 0:
            raise ScriptError(f"period {cmd.period} must be positive")
        for sub in cmd.body:
            validate_command(sub)
    else:
        raise ScriptError(f"unknown command {cmd!r}")


def validate_script(s: Script) -> None:
    for cmd in s.commands:
        validate_command(cmd)


# --- spans and groups ------------------------------------------------------


@dataclass(frozen=True)
class EntitySpan:
    entity: str
    prefix: str  # "B" | "I"
    surface: str
    start: int  # token index, inclusive
    end: int  # token index, exclusive
    value: object | None = None  # None when unparseable


@dataclass
class CommandGroup:
    spans: list[EntitySpan] = field(default_factory=list)

    @property
    def opening(self) -> EntitySpan:
        return self.spans[0]


@dataclass
class Interpretation:
    script: Script
    rendered: str
    spans: list[EntitySpan]
    warnings: list[str]


def repair_labels(labels: list[str]) -> list[str]:
    """Promote an I-X with no open command group to B-X."""
    out = list(labels)
    seen_b = False
    for i, lab in enumerate(out):
        prefix, name = split_label(lab)
        if prefix == "B":
            seen_b = True
        elif prefix == "I" and not seen_b:
            out[i] = f"B-{name}"
            seen_b = True
    return out


def parse_value(surface: str, entity_name: str) -> object | None:
    """Parse a span surface into the entity's typed value; None on failure."""
    entity = ENTITY_BY_NAME[entity_name]
    if entity.value_kind == CATEGORICAL:
        if entity_name == "SAMPLE":
            return surface if surface else None
        norm = surface.lower()
        for word in entity.words:
            if word.lower() == norm:
                return word
        return None
    if entity.value_kind == POINT:
        nums = _NUM_RE.findall(surface)
        if len(nums) != 2:
            return None
        return (float(nums[0]), float(nums[1]))
    m = _SCALAR_RE.match(surface.strip())
    if not m:
        return None
    return float(m.group(1))


def group_entities(tokens: list[str], labels: list[str]
                   ) -> list[CommandGroup]:
    """Partition non-O label runs into B-opened command groups."""
    groups: list[CommandGroup] = []
    i = 0
    n = len(tokens)
    while i < n:
        lab = labels[i]
        if lab == "O":
            i += 1
            continue
        j = i + 1
        while j < n and labels[j] == lab:
            j += 1
        prefix, name = split_label(lab)
        surface = " ".join(tokens[i:j])
        span = EntitySpan(name, prefix, surface, i, j,
                          parse_value(surface, name))
        if prefix == "B" or not groups:
            groups.append(CommandGroup([span]))
        else:
            groups[-1].spans.append(span)
        i = j
    return groups


# --- group compilation -----------------------------------------------------


@dataclass
class _GroupResult:
    commands: list  # non-wrapper commands, textual-policy order
    wrapper: Repeat | Until | None
    wrap_own: bool  # wrapper should wrap this group's repeatable commands
    warnings: list[str]
    source: str  # opening surface, for error messages


def _pick(values: list, i: int):
    if not values:
        return None
    return values[i] if i < len(values) else values[-1]


def compile_group(g: CommandGroup) -> _GroupResult:
    """Map the entity types present in one group onto commands."""
    warnings: list[str] = []
    by_entity: dict[str, list] = {}
    for span in g.spans:
        if span.value is None:
            warnings.append(
                f"could not parse {span.entity} value from "
                f"{span.surface!r}; slot dropped")
            continue
        by_entity.setdefault(span.entity, []).append(span.value)

    def take(name: str) -> list:
        return by_entity.pop(name, [])

    commands: list = []

    for name in take("SAMPLE"):
        commands.append(SetSample(name))

    ramps_min = take("NRAMP-MIN")
    ramps_sec = take("NRAMP-SEC")

    def take_ramp() -> float | None:
        if ramps_min:
            return ramps_min.pop(0)
        if ramps_sec:
            return ramps_sec.pop(0) * 60.0  # normalize to C/min
        return None

    for target in take("TEMPERATURE"):
        ramp = take_ramp()
        if ramp is None:
            ramp = DEFAULT_RAMP_C_PER_MIN
            warnings.append(
                f"no ramp rate given for temperature {target}; "
                f"defaulting to {DEFAULT_RAMP_C_PER_MIN} C/min")
        commands.append(SetTemperature(target, ramp))
    for target in take("HUMIDITY"):
        commands.append(SetHumidity(target))
    for amount in take("XPOS-REL"):
        commands.append(MoveMotor("x", amount, "relative"))
    for amount in take("YPOS-REL"):
        commands.append(MoveMotor("y", amount, "relative"))
    for amount in take("XPOS-ABS"):
        commands.append(MoveMotor("x", amount, "absolute"))
    for amount in take("YPOS-ABS"):
        commands.append(MoveMotor("y", amount, "absolute"))

    kinds = take("SCAN")
    protocols = take("PROCESS")
    etimes = take("ETIME")
    angles = take("ANGLE")
    directions = take("DIRECTION")
    points = take("POINT-ABS")
    measureish = bool(kinds or protocols or etimes or angles or directions)
    position = points.pop(0) if points and measureish else None
    if measureish:
        if not kinds:
            warnings.append("no scan word found; defaulting to 'measure'")
        n = max(1, len(kinds))
        for i in range(n):
            commands.append(Measure(
                kind=_pick(kinds, i) or "measure",
                protocol=_pick(protocols, i),
                exposure=_pick(etimes, i),
                angles=tuple(angles),
                position=position,
                direction=_pick(directions, i),
            ))
    for pt in points:
        commands.append(GotoPoint(pt[0], pt[1]))

    # Wrapper entities: conditionals win over plain repetition.
    periods = [p for p in take("TRATE-SEC")] \
        + [p * 60.0 for p in take("TRATE-MIN")]
    amounts = take("AMOUNT")
    cond_t = take("TEMPERATURE-CONDITIONAL")
    cond_h = take("HUMIDITY-CONDITIONAL")
    wrapper: Repeat | Until | None = None
    if cond_t or cond_h:
        if cond_t and cond_h:
            warnings.append("both temperature and humidity conditions in "
                            "one group; using the temperature condition")
        quantity = "temperature" if cond_t else "humidity"
        threshold = (cond_t or cond_h)[0]
        wrapper = Until(quantity, threshold, take_ramp(),
                        periods[0] if periods else None)
        if amounts:
            warnings.append("iteration count ignored inside an "
                            "until-condition")
    elif amounts or periods:
        count = int(amounts[0]) if amounts else None
        wrapper = Repeat(count, periods[0] if periods else None)

    for name in by_entity:
        warnings.append(f"unused {name} value in group")

    repeatable = [c for c in commands if isinstance(c, _REPEATABLE)]
    return _GroupResult(commands, wrapper, bool(repeatable), warnings,
                        g.opening.surface if g.spans else "")


# --- script assembly -------------------------------------------------------


def _is_unbounded_repeat(cmd) -> bool:
    return isinstance(cmd, Repeat) and cmd.count is None


def _close_wrapper(wrapper, body: list, source: str):
    if not body:
        raise CompileError(
            f"dangling condition with no commands to run: {source!r}")
    return replace(wrapper, body=tuple(body))


def _absorb_repeat(until: Until) -> Until:
    """An Until directly wrapping a bare unbounded Repeat adopts its
    period and body ("do the following every N seconds until ...")."""
    if (until.period is None and len(until.body) == 1
            and _is_unbounded_repeat(until.body[0])):
        inner = until.body[0]
        return replace(until, period=inner.period, body=inner.body)
    return until


def _finalize(cmd, warnings: list[str]):
    if isinstance(cmd, Until):
        cmd = _absorb_repeat(replace(
            cmd, body=tuple(_finalize(c, warnings) for c in cmd.body)))
        return cmd
    if isinstance(cmd, Repeat):
        cmd = replace(cmd, body=tuple(_finalize(c, warnings)
                                      for c in cmd.body))
        if (cmd.count is None and len(cmd.body) == 1
                and isinstance(cmd.body[0], Until)):
            # "every N seconds, <until-wrapped work>": the bare Repeat just
            # supplies the period
            inner = cmd.body[0]
            return replace(inner, period=inner.period or cmd.period)
        if cmd.count is None:
            warnings.append("repetition without an explicit count or "
                            "enclosing condition; running once")
            cmd = replace(cmd, count=1)
        return cmd
    return cmd


def assemble_script(groups: list[CommandGroup]
                    ) -> tuple[Script, list[str]]:
    """Order commands and bind Repeat/Until wrappers to their bodies.

    Binding rules, in priority order for each wrapper:
      1. wrap its own group's repeatable commands ("do this N times" at
         the end of a measure sentence);
      2. if later groups produce commands, open a block capturing them to
         the end of the script ("do the following every ...");
      3. otherwise capture backward: merge with an immediately preceding
         unbounded Repeat, or pop the nearest preceding repeatable command.
    """
    results = [compile_group(g) for g in groups]
    warnings = [w for r in results for w in r.warnings]

    toplevel: list = []
    # Stack of (wrapper, body-list, source) for forward-capturing wrappers.
    stack: list[tuple[object, list, str]] = []

    def sink() -> list:
        return stack[-1][1] if stack else toplevel

    for gi, res in enumerate(results):
        w = res.wrapper
        if w is not None and res.wrap_own:
            out = sink()
            for cmd in res.commands:
                if not isinstance(cmd, _REPEATABLE):
                    out.append(cmd)
            body = [c for c in res.commands if isinstance(c, _REPEATABLE)]
            out.append(replace(w, body=tuple(body)))
            continue
        if w is not None:
            out = sink()
            if (isinstance(w, Until) and out
                    and _is_unbounded_repeat(out[-1])):
                inner = out.pop()
                out.append(Until(w.quantity, w.threshold, w.ramp,
                                 w.period or inner.period, inner.body))
                continue
            if (isinstance(w, Until) and stack
                    and _is_unbounded_repeat(stack[-1][0])
                    and not stack[-1][1]):
                # "every N seconds until X": the open bare Repeat supplies
                # the period, the Until takes over its slot
                rep, _, source = stack.pop()
                merged = replace(w, period=w.period or rep.period)
                stack.append((merged, [], source))
                continue
            if any(len(r.commands) > 0 for r in results[gi + 1:]):
                stack.append((w, [], res.source))
                continue
            # backward capture
            captured = None
            for k in range(len(out) - 1, -1, -1):
                if isinstance(out[k], _REPEATABLE + (Repeat,)):
                    captured = out.pop(k)
                    break
            if captured is None:
                raise CompileError(
                    "dangling condition with nothing to repeat: "
                    f"{res.source!r}")
            out.append(replace(w, body=(captured,)))
            continue
        sink().extend(res.commands)

    while stack:
        w, body, source = stack.pop()
        sink().append(_close_wrapper(w, body, source))

    commands = tuple(_finalize(c, warnings) for c in toplevel)
    return Script(commands), warnings


# --- rendering -------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, tuple):
        return "(" + ", ".join(_fmt(v) for v in value) + ")"
    if isinstance(value, list):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    return repr(value)


def _render_cmd(cmd, indent: int, lines: list[str]) -> None:
    pad = "  " * indent
    if isinstance(cmd, SetTemperature):
        lines.append(f"{pad}set_temperature(target={_fmt(float(cmd.target))},"
                     f" ramp={_fmt(float(cmd.ramp))})")
    elif isinstance(cmd, SetHumidity):
        lines.append(f"{pad}set_humidity(target={_fmt(float(cmd.target))})")
    elif isinstance(cmd, MoveMotor):
        lines.append(f"{pad}move_motor(axis={_fmt(cmd.axis)}, "
                     f"amount={_fmt(float(cmd.amount))}, "
                     f"mode={_fmt(cmd.mode)})")
    elif isinstance(cmd, GotoPoint):
        lines.append(f"{pad}goto_point(x={_fmt(float(cmd.x))}, "
                     f"y={_fmt(float(cmd.y))})")
    elif isinstance(cmd, SetSample):
        lines.append(f"{pad}set_sample(name={_fmt(cmd.name)})")
    elif isinstance(cmd, Measure):
        args = [f"kind={_fmt(cmd.kind)}"]
        if cmd.protocol is not None:
            args.append(f"protocol={_fmt(cmd.protocol)}")
        if cmd.exposure is not None:
            args.append(f"exposure={_fmt(float(cmd.exposure))}")
        if cmd.angles:
            args.append(
                f"angles={_fmt([float(a) for a in cmd.angles])}")
        if cmd.position is not None:
            args.append(f"position={_fmt(tuple(float(v) for v in cmd.position))}")
        if cmd.direction is not None:
            args.append(f"direction={_fmt(cmd.direction)}")
        lines.append(f"{pad}measure({', '.join(args)})")
    elif isinstance(cmd, Repeat):
        args = [f"count={cmd.count}"]
        if cmd.period is not None:
            args.append(f"period={_fmt(float(cmd.period))}")
        lines.append(f"{pad}repeat({', '.join(args)}):")
        for sub in cmd.body:
            _render_cmd(sub, indent + 1, lines)
    elif isinstance(cmd, Until):
        args = [f"quantity={_fmt(cmd.quantity)}",
                f"threshold={_fmt(float(cmd.threshold))}"]
        if cmd.ramp is not None:
            args.append(f"ramp={_fmt(float(cmd.ramp))}")
        if cmd.period is not None:
            args.append(f"period={_fmt(float(cmd.period))}")
        lines.append(f"{pad}until({', '.join(args)}):")
        for sub in cmd.body:
            _render_cmd(sub, indent + 1, lines)
    else:
        raise ScriptError(f"cannot render {cmd!r}")


def render_script(s: Script) -> str:
    lines: list[str] = []
    for cmd in s.commands:
        _render_cmd(cmd, 0, lines)
    return "\n".join(lines)


# --- pseudo-script parsing -------------------------------------------------


_CMD_ARGS = {
    "set_temperature": (SetTemperature, {"target", "ramp"}, {"target", "ramp"}),
    "set_humidity": (SetHumidity, {"target"}, {"target"}),
    "move_motor": (MoveMotor, {"axis", "amount", "mode"},
                   {"axis", "amount", "mode"}),
    "goto_point": (GotoPoint, {"x", "y"}, {"x", "y"}),
    "set_sample": (SetSample, {"name"}, {"name"}),
    "measure": (Measure, {"kind"},
                {"kind", "protocol", "exposure", "angles", "position",
                 "direction"}),
    "repeat": (Repeat, {"count"}, {"count", "period"}),
    "until": (Until, {"quantity", "threshold"},
              {"quantity", "threshold", "ramp", "period"}),
}

_FLOAT_FIELDS = {"target", "ramp", "amount", "x", "y", "exposure",
                 "period", "threshold"}


def _parse_call(line: str, line_no: int) -> tuple[str, dict, bool]:
    text = line.strip()
    block = text.endswith(":")
    if block:
        text = text[:-1]
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ScriptError(f"bad statement syntax: {exc.msg}",
                          line=line_no, column=exc.offset) from None
    call = tree.body
    if not (isinstance(call, ast.Call) and isinstance(call.func, ast.Name)
            and not call.args):
        raise ScriptError("expected command(name=value, ...)", line=line_no)
    kwargs = {}
    for kw in call.keywords:
        if kw.arg is None:
            raise ScriptError("**kwargs not allowed", line=line_no)
        try:
            kwargs[kw.arg] = ast.literal_eval(kw.value)
        except ValueError:
            raise ScriptError(f"bad value for {kw.arg}",
                              line=line_no) from None
    return call.func.id, kwargs, block


def _build_command(name: str, kwargs: dict, line_no: int):
    if name not in _CMD_ARGS:
        raise ScriptError(f"unknown command {name!r}", line=line_no)
    cls, required, allowed = _CMD_ARGS[name]
    missing = required - kwargs.keys()
    extra = kwargs.keys() - allowed
    if missing:
        raise ScriptError(f"{name}: missing {sorted(missing)}", line=line_no)
    if extra:
        raise ScriptError(f"{name}: unknown argument {sorted(extra)}",
                          line=line_no)
    for key, value in list(kwargs.items()):
        if key in _FLOAT_FIELDS and isinstance(value, (int, float)):
            kwargs[key] = float(value)
    if name == "measure":
        if "angles" in kwargs:
            kwargs["angles"] = tuple(float(a) for a in kwargs["angles"])
        if kwargs.get("position") is not None:
            pos = kwargs["position"]
            if not (isinstance(pos, (tuple, list)) and len(pos) == 2):
                raise ScriptError("position must be a pair", line=line_no)
            kwargs["position"] = (float(pos[0]), float(pos[1]))
    if name == "repeat" and not isinstance(kwargs["count"], int):
        raise ScriptError("repeat count must be an integer", line=line_no)
    try:
        cmd = cls(**kwargs)
    except TypeError as exc:
        raise ScriptError(str(exc), line=line_no) from None
    try:
        validate_command(replace(cmd, body=()) if isinstance(
            cmd, (Repeat, Until)) else cmd)
    except ScriptError as exc:
        raise ScriptError(str(exc), line=line_no) from None
    return cmd, isinstance(cmd, (Repeat, Until))


def parse_script(text: str) -> Script:
    """Parse pseudo-script text; inverse of render_script on its image."""
    # (indent, children-list) stack; blocks indent by 2 spaces.
    root: list = []
    stack: list[tuple[int, list]] = [(-1, root)]
    pending: list[tuple[int, object, list]] = []  # (indent, wrapper, body)

    def close_down_to(indent: int, line_no: int) -> None:
        while pending and pending[-1][0] >= indent:
            p_indent, wrapper, body = pending.pop()
            if not body:
                raise ScriptError("empty block", line=line_no)
            parent = pending[-1][2] if pending else root
            parent.append(replace(wrapper, body=tuple(body)))

    line_no = 0
    for raw in text.splitlines():
        line_no += 1
        if not raw.strip() or raw.strip().startswith("#"):
            continue
        indent = len(raw) - len(raw.lstrip(" "))
        if indent % 2:
            raise ScriptError("indentation must be multiples of 2 spaces",
                              line=line_no)
        close_down_to(indent, line_no)
        expected = (pending[-1][0] + 2) if pending else 0
        if indent != expected:
            raise ScriptError(
                f"unexpected indentation ({indent}, expected {expected})",
                line=line_no)
        name, kwargs, block = _parse_call(raw, line_no)
        cmd, is_wrapper = _build_command(name, kwargs, line_no)
        if is_wrapper != block:
            raise ScriptError(
                "repeat/until statements take a ':' block; plain commands "
                "do not", line=line_no)
        if block:
            pending.append((indent, cmd, []))
        else:
            (pending[-1][2] if pending else root).append(cmd)
    close_down_to(0, line_no + 1)
    script = Script(tuple(root))
    validate_script(script)
    return script


# --- end-to-end ------------------------------------------------------------


def interpret_labels(tokens: list[str], labels: list[str]) -> Interpretation:
    """Compile an already-labeled token sequence (tagger output or gold)."""
    repaired = repair_labels(labels)
    groups = group_entities(tokens, repaired)
    spans = [s for g in groups for s in g.spans]
    if not spans:
        return Interpretation(Script(), "", [], ["no entities found"])
    try:
        script, warnings = assemble_script(groups)
    except CompileError as exc:
        return Interpretation(Script(), "", spans, [str(exc)])
    return Interpretation(script, render_script(script), spans, warnings)


def interpret(text: str, model: TaggerModel) -> Interpretation:
    """tokenize -> predict -> repair -> group -> compile -> render."""
    seq = tokenize(text)
    labels = predict(model, seq)
    return interpret_labels(list(seq.tokens), labels)
