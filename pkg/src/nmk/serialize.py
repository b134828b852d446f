"""JSON codecs for states, components, scripts, witnesses and reports.

State files carry the register list and the matrix split into real and
imaginary parts, row-major in register order.  Readers re-validate every
invariant; a violation surfaces as :class:`~nmk.errors.InvariantViolation`
whose message names the failed invariant.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import BadParams
from .markov import MarkovComponents, MarkovEntry
from .registers import Register, RegisterLayout
from .states import ChannelMap, DensityState
from .steps import Step, StepKind
from .witness import Witness, WitnessGroups


def matrix_to_json(m: np.ndarray) -> dict:
    m = np.asarray(m)
    return {"re": np.real(m).tolist(), "im": np.imag(m).tolist()}


def matrix_from_json(d: dict) -> np.ndarray:
    try:
        return np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise BadParams(f"malformed matrix payload: {exc}") from exc


def layout_to_json(layout: RegisterLayout) -> list:
    return [
        {"label": r.label, "dim": r.dim, "party": r.party.value} for r in layout.registers
    ]


def layout_from_json(items) -> RegisterLayout:
    try:
        regs = tuple(Register(it["label"], int(it["dim"]), it["party"]) for it in items)
    except (KeyError, TypeError, ValueError) as exc:
        raise BadParams(f"malformed register list: {exc}") from exc
    return RegisterLayout(regs)


def state_to_json(state: DensityState) -> dict:
    return {"registers": layout_to_json(state.layout), "matrix": matrix_to_json(state.matrix)}


def state_from_json(d: dict) -> DensityState:
    if "registers" not in d or "matrix" not in d:
        raise BadParams("state payload needs 'registers' and 'matrix'")
    return DensityState(layout_from_json(d["registers"]), matrix_from_json(d["matrix"]))


def components_to_json(c: MarkovComponents) -> dict:
    return {
        "entries": [
            {"p": e.p, "sigma": state_to_json(e.sigma), "tau": state_to_json(e.tau)}
            for e in c.entries
        ]
    }


def components_from_json(d: dict) -> MarkovComponents:
    try:
        entries = tuple(
            MarkovEntry(float(it["p"]), state_from_json(it["sigma"]), state_from_json(it["tau"]))
            for it in d["entries"]
        )
    except (KeyError, TypeError) as exc:
        raise BadParams(f"malformed components payload: {exc}") from exc
    return MarkovComponents(entries)


def vector_to_json(v: np.ndarray) -> dict:
    v = np.asarray(v)
    return {"re": np.real(v).tolist(), "im": np.imag(v).tolist()}


def vector_from_json(d: dict) -> np.ndarray:
    return np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)


def witness_to_json(w: Witness) -> dict:
    g = w.groups
    return {
        "registers": layout_to_json(w.layout),
        "groups": {
            "a": list(g.a),
            "a_prime": list(g.a_prime),
            "b": list(g.b),
            "b_prime": list(g.b_prime),
            "e": list(g.e),
            "e_prime": list(g.e_prime),
        },
        "weights": list(w.weights),
        "members": [vector_to_json(m) for m in w.members],
        "k_label": w.k_label,
        "ext_dims": w.ext_dims,
        "flag_is_classical": True,
    }


def witness_from_json(d: dict) -> Witness:
    g = d["groups"]
    groups = WitnessGroups(
        a=tuple(g["a"]),
        a_prime=tuple(g["a_prime"]),
        b=tuple(g["b"]),
        b_prime=tuple(g["b_prime"]),
        e=tuple(g["e"]),
        e_prime=tuple(g["e_prime"]),
    )
    return Witness(
        layout_from_json(d["registers"]),
        groups,
        tuple(float(p) for p in d["weights"]),
        tuple(vector_from_json(m) for m in d["members"]),
        k_label=d.get("k_label", "K"),
    )


def channel_to_json(c: ChannelMap) -> dict:
    return {
        "kraus": [matrix_to_json(k) for k in c.kraus],
        "inverse": None
        if c.declared_inverse is None
        else {"kraus": [matrix_to_json(k) for k in c.declared_inverse.kraus]},
        "trace_preserving": c.trace_preserving,
    }


def channel_from_json(d: dict) -> ChannelMap:
    inverse = None
    if d.get("inverse"):
        inverse = ChannelMap(
            tuple(matrix_from_json(k) for k in d["inverse"]["kraus"]), trace_preserving=False
        )
    return ChannelMap(
        tuple(matrix_from_json(k) for k in d["kraus"]),
        declared_inverse=inverse,
        trace_preserving=bool(d.get("trace_preserving", True)),
    )


def step_to_json(step: Step) -> dict:
    out = {"kind": step.kind.value}
    if step.channel is not None:
        out["channel"] = channel_to_json(step.channel)
    if step.on:
        out["on"] = list(step.on)
    if step.out is not None:
        out["out"] = [{"label": r.label, "dim": r.dim, "party": r.party.value} for r in step.out]
    if step.discard:
        out["discard"] = list(step.discard)
    if step.register is not None:
        out["register"] = step.register
    if step.to is not None:
        out["to"] = step.to.value
    if step.operators:
        out["operators"] = [matrix_to_json(m) for m in step.operators]
    if step.msg_label is not None:
        out["msg_label"] = step.msg_label
    if step.sender is not None:
        out["sender"] = step.sender.value
    if step.bypass:
        out["bypass"] = True
    return out


def step_from_json(d: dict) -> Step:
    try:
        kind = StepKind(d["kind"])
    except (KeyError, ValueError) as exc:
        raise BadParams(f"unknown step kind: {exc}") from exc
    out = None
    if d.get("out") is not None:
        out = tuple(Register(it["label"], int(it["dim"]), it["party"]) for it in d["out"])
    return Step(
        kind=kind,
        channel=channel_from_json(d["channel"]) if d.get("channel") else None,
        on=tuple(d.get("on", ())),
        out=out,
        discard=tuple(d.get("discard", ())),
        register=d.get("register"),
        to=d.get("to") and _party(d["to"]),
        operators=tuple(matrix_from_json(m) for m in d.get("operators", ())),
        msg_label=d.get("msg_label"),
        sender=d.get("sender") and _party(d["sender"]),
        bypass=bool(d.get("bypass", False)),
    )


def _party(value):
    from .registers import Party

    return Party(value)


def script_to_json(steps) -> dict:
    return {"steps": [step_to_json(s) for s in steps]}


def script_from_json(d: dict) -> tuple[Step, ...]:
    if "steps" not in d:
        raise BadParams("script payload needs a 'steps' array")
    return tuple(step_from_json(it) for it in d["steps"])


def jsonable(obj):
    """Recursively convert numpy scalars/arrays so json.dumps succeeds."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (bool, int, float, str)) or obj is None:
        return obj
    return str(obj)


def dumps_canonical(payload) -> str:
    return json.dumps(jsonable(payload), sort_keys=True, separators=(",", ":"))
