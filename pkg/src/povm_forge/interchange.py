"""JSON documents exchanged by the CLI.

Floats are written in scientific notation with 17 significant digits, which
round-trips every IEEE double exactly. The standard ``json`` module always
uses the shortest repr, so documents are serialised by :func:`dumps` here.
"""
from __future__ import annotations

import json
import math
from typing import Any, TextIO

import numpy as np

from .povm import Outcome, Povm
from .geometry import Direction


class DocumentError(ValueError):
    """Malformed or incomplete input document."""


def format_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format(x, ".16e")


def dumps(obj: Any, indent: int = 2) -> str:
    """Serialise nested dict/list/scalars with fixed-precision floats."""
    pad = " " * indent

    def enc(o, level):
        if isinstance(o, (bool, np.bool_)):
            return "true" if o else "false"
        if o is None:
            return "null"
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return format_float(o)
        if isinstance(o, str):
            return json.dumps(o, ensure_ascii=False)
        if isinstance(o, np.ndarray):
            return enc(o.tolist(), level)
        if isinstance(o, dict):
            if not o:
                return "{}"
            inner = pad * (level + 1)
            items = [f"{inner}{json.dumps(str(k))}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + pad * level + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in o):
                return "[" + ", ".join(enc(v, level) for v in o) + "]"
            inner = pad * (level + 1)
            return "[\n" + ",\n".join(inner + enc(v, level + 1) for v in o) + "\n" + pad * level + "]"
        raise TypeError(f"cannot serialise {type(o).__name__}")

    return enc(obj, 0)


def povm_to_dict(povm: Povm, label: str | None = None) -> dict:
    doc: dict[str, Any] = {
        "copies": int(povm.copies),
        "outcomes": [{"weight": o.weight, "theta": o.direction.theta, "psi": o.direction.psi}
                     for o in povm.outcomes],
    }
    if label is not None:
        doc["label"] = label
    return doc


def povm_from_dict(doc: Any) -> tuple[Povm, str | None]:
    if not isinstance(doc, dict):
        raise DocumentError("POVM document must be a JSON object")
    try:
        copies = doc["copies"]
        raw = doc["outcomes"]
    except KeyError as exc:
        raise DocumentError(f"POVM document is missing field {exc.args[0]!r}") from None
    if isinstance(copies, bool) or not isinstance(copies, int):
        raise DocumentError("'copies' must be an integer")
    if not isinstance(raw, list):
        raise DocumentError("'outcomes' must be an array")
    outs = []
    for i, item in enumerate(raw):
        try:
            w, t, p = (float(item[k]) for k in ("weight", "theta", "psi"))
        except (KeyError, TypeError, ValueError):
            raise DocumentError(f"outcome {i} needs numeric 'weight', 'theta' and 'psi'") from None
        outs.append(Outcome(w, Direction.from_angles(t, p)))
    label = doc.get("label")
    return Povm(copies, tuple(outs)), label if isinstance(label, str) else None


def povm_dumps(povm: Povm, label: str | None = None) -> str:
    return dumps(povm_to_dict(povm, label))


def povm_loads(text: str) -> tuple[Povm, str | None]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"invalid JSON: {exc}") from None
    return povm_from_dict(doc)


def read_povm(stream: TextIO) -> tuple[Povm, str | None]:
    return povm_loads(stream.read())
