"""JSON network-spec files.

Schema::

    {
      "states": ["s1", ...],                  # labels, in chain order
      "transition": [[...], ...],             # row-stochastic, row-major
      "r": 1,                                 # number of queues
      "delta_max": 2.0,
      "actions": {"s1": [{"label": "x1", "cost": 1.0,
                          "arrivals": [0.0], "services": [2.0]}, ...]},
      "certificate": {"eta": 0.5,              # optional
                      "weights": {"s1": [{"action": "x1", "prob": 0.5}, ...]}},
      "reference_state": "s1"                 # optional
    }
"""
from __future__ import annotations

import json
import logging
from pathlib import Path

from .model import (
    Action,
    NetworkSpec,
    SlacknessCertificate,
    SlacknessError,
    Violation,
    make_spec,
    validate_spec,
    verify_slackness,
)

log = logging.getLogger(__name__)


class SpecFileError(ValueError):
    """Unreadable or structurally invalid spec file."""

    def __init__(self, message: str, violations: list[Violation] | None = None):
        super().__init__(message)
        self.violations = violations or []


def _field(obj, key, where, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise SpecFileError(f"{where}: missing field {key!r}")
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise SpecFileError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, got {type(val).__name__}")
    return val


def _number(x, where) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SpecFileError(f"{where}: expected a number, got {x!r}")
    return float(x)


def spec_from_dict(data: dict) -> tuple[NetworkSpec, SlacknessCertificate | None]:
    states = [str(s) for s in _field(data, "states", "spec", list)]
    transition = _field(data, "transition", "spec", list)
    rows = []
    for i, row in enumerate(transition):
        if not isinstance(row, list):
            raise SpecFileError(f"transition[{i}]: expected a list")
        rows.append([_number(x, f"transition[{i}][{k}]") for k, x in enumerate(row)])
    if len(rows) != len(states) or any(len(row) != len(states) for row in rows):
        raise SpecFileError(f"transition: expected a {len(states)}x{len(states)} matrix")
    r = _field(data, "r", "spec", int)
    delta_max = _number(_field(data, "delta_max", "spec"), "delta_max")
    acts = _field(data, "actions", "spec", dict)
    lists = []
    for s in states:
        entries = _field(acts, s, "actions", list)
        built = []
        for k, e in enumerate(entries):
            where = f"actions.{s}[{k}]"
            built.append(
                Action(
                    str(_field(e, "label", where)),
                    _number(_field(e, "cost", where), f"{where}.cost"),
                    [_number(x, f"{where}.arrivals") for x in _field(e, "arrivals", where, list)],
                    [_number(x, f"{where}.services") for x in _field(e, "services", where, list)],
                )
            )
        lists.append(built)
    extra = set(acts) - set(states)
    if extra:
        raise SpecFileError(f"actions: unknown states {sorted(extra)}")
    ref = data.get("reference_state")
    if ref is not None and str(ref) not in states:
        raise SpecFileError(f"reference_state: unknown state {ref!r}")
    spec = make_spec(states, rows, lists, delta_max, r=r, reference_state=ref)

    cert = None
    if data.get("certificate") is not None:
        c = _field(data, "certificate", "spec", dict)
        eta = _number(_field(c, "eta", "certificate"), "certificate.eta")
        wmap = _field(c, "weights", "certificate", dict)
        weights = []
        for i, s in enumerate(states):
            ws = []
            for k, e in enumerate(_field(wmap, s, "certificate.weights", list)):
                where = f"certificate.weights.{s}[{k}]"
                label = str(_field(e, "action", where))
                names = [a.label for a in lists[i]]
                if label not in names:
                    raise SpecFileError(f"{where}.action: unknown action {label!r} in state {s}")
                ws.append((names.index(label), _number(_field(e, "prob", where), f"{where}.prob")))
            weights.append(ws)
        cert = SlacknessCertificate(weights, eta)
    return spec, cert


def load_spec(path) -> tuple[NetworkSpec, SlacknessCertificate | None]:
    """Parse, validate and (when present) verify the certificate of a spec file.

    Raises :class:`SpecFileError` on parse errors (with line/column),
    structural violations (all of them listed) or a failing certificate.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecFileError(f"{path}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecFileError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    spec, cert = spec_from_dict(data)
    violations = validate_spec(spec)
    if violations:
        lines = "\n  ".join(v.message for v in violations)
        raise SpecFileError(f"{path}: {len(violations)} violation(s):\n  {lines}", violations)
    if cert is None:
        log.warning("%s: no slackness certificate; bounds and duality checks are unavailable", path)
    else:
        try:
            verify_slackness(spec, cert)
        except SlacknessError as exc:
            raise SpecFileError(f"{path}: certificate rejected: {exc}") from exc
    return spec, cert


def spec_to_dict(spec: NetworkSpec, cert: SlacknessCertificate | None = None) -> dict:
    labels = spec.chain.state_labels
    out = {
        "states": list(labels),
        "transition": spec.chain.P.tolist(),
        "r": spec.r,
        "delta_max": spec.delta_max,
        "actions": {
            s: [
                {"label": a.label, "cost": a.cost, "arrivals": list(a.arrivals), "services": list(a.services)}
                for a in spec.actions[i]
            ]
            for i, s in enumerate(labels)
        },
    }
    if cert is not None:
        out["certificate"] = {
            "eta": cert.eta,
            "weights": {
                s: [{"action": spec.actions[i][k].label, "prob": p} for k, p in cert.weights[i]]
                for i, s in enumerate(labels)
            },
        }
    if spec.reference_state is not None:
        out["reference_state"] = spec.reference_state
    return out


def dump_spec(path, spec: NetworkSpec, cert: SlacknessCertificate | None = None) -> None:
    Path(path).write_text(json.dumps(spec_to_dict(spec, cert), indent=2) + "\n", encoding="utf-8")
