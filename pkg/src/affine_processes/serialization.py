"""JSON model documents: schema, parsing, serialisation and stable float output."""

import json
import math
import re

import jsonschema
import numpy as np

from .errors import SchemaError
from .jumps import jump_from_dict
from .models import CanonicalAffineModel, WishartModel

_NUMBER = {"type": "number"}
_VECTOR = {"type": "array", "items": _NUMBER}
_MATRIX = {"type": "array", "items": _VECTOR}
_RATE = {"type": "number", "minimum": 0}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}


def _jump(kind, props, required):
    return {
        "if": {"properties": {"kind": {"const": kind}}},
        "then": {
            "properties": {"kind": {"const": kind}, "rate": _RATE, **props},
            "required": ["kind", "rate", *required],
            "additionalProperties": False,
        },
    }


def _jump_family(variants):
    return {
        "type": ["object", "null"],
        "properties": {"kind": {"enum": [v["if"]["properties"]["kind"]["const"] for v in variants]}},
        "required": ["kind"],
        "allOf": variants,
    }


_CANONICAL_JUMP = _jump_family([
    _jump("point", {"size": _VECTOR}, ["size"]),
    _jump("exponential", {"direction": _VECTOR, "mean": _POSITIVE}, ["direction", "mean"]),
    _jump("gamma", {"direction": _VECTOR, "shape": _POSITIVE, "scale": _POSITIVE}, ["direction", "shape", "scale"]),
])

_MATRIX_JUMP = _jump_family([
    _jump("point", {"size": _MATRIX}, ["size"]),
    _jump("rank_one", {"vector": _VECTOR, "mean": _POSITIVE}, ["vector"]),
    _jump("gaussian_rank_one", {"cov": _MATRIX, "mean": _POSITIVE}, ["cov"]),
])

MODEL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "affine model",
    "type": "object",
    "required": ["space"],
    "properties": {"space": {"enum": ["canonical", "psd"]}},
    "allOf": [
        {
            "if": {"properties": {"space": {"const": "canonical"}}},
            "then": {
                "properties": {
                    "space": {"const": "canonical"},
                    "description": {"type": "string"},
                    "m": {"type": "integer", "minimum": 0},
                    "n": {"type": "integer", "minimum": 0},
                    "a": _MATRIX,
                    "alpha": {"type": "array", "items": _MATRIX},
                    "b": _VECTOR,
                    "beta": _MATRIX,
                    "jump0": _CANONICAL_JUMP,
                    "jumps": {"type": "array", "items": _CANONICAL_JUMP},
                    "x0": _VECTOR,
                },
                "required": ["m", "n", "a", "alpha", "b", "beta"],
                "additionalProperties": False,
            },
        },
        {
            "if": {"properties": {"space": {"const": "psd"}}},
            "then": {
                "properties": {
                    "space": {"const": "psd"},
                    "description": {"type": "string"},
                    "d": {"type": "integer", "minimum": 1},
                    "b": _MATRIX,
                    "beta": _MATRIX,
                    "Q": _MATRIX,
                    "jump": _MATRIX_JUMP,
                    "x0": _MATRIX,
                },
                "required": ["d", "b", "beta", "Q"],
                "additionalProperties": False,
            },
        },
    ],
}

_VALIDATOR = jsonschema.Draft202012Validator(MODEL_SCHEMA)


def _pointer(path):
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in path)


def _deepest(error):
    """Most specific sub-error, so the pointer names the offending entry."""
    while error.context:
        error = max(error.context, key=lambda e: len(e.absolute_path))
    return error


def check_schema(doc):
    """Raise :class:`SchemaError` (with a JSON pointer) if ``doc`` violates the schema."""
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: (-len(e.absolute_path), str(e.absolute_path)))
    if errors:
        err = _deepest(errors[0])
        raise SchemaError(err.message, _pointer(err.absolute_path))


_FIELD = re.compile(r"^(jump0|jump|a|alpha|b|beta|Q|x0)(?:\[(\d+)\])?\b")


def _structure(fn):
    """Run a constructor, turning structural errors into schema errors at the offending field."""
    try:
        return fn()
    except SchemaError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        msg = str(exc)
        match = _FIELD.match(msg)
        pointer = ""
        if match:
            name, index = match.groups()
            name = "jumps" if name == "jump" and index is not None else name
            pointer = "/" + name + ("" if index is None else "/" + index)
        raise SchemaError(msg, pointer) from exc


def model_from_dict(doc):
    """Parse a model document (already decoded JSON)."""
    check_schema(doc)
    if doc["space"] == "canonical":
        jumps = doc.get("jumps") or []
        return _structure(lambda: CanonicalAffineModel(
            doc["m"], doc["n"], doc["a"], tuple(doc["alpha"]), doc["b"], doc["beta"],
            jump_from_dict(doc.get("jump0")),
            tuple(jump_from_dict(j) for j in jumps),
            doc.get("x0"),
        ))
    return _structure(lambda: WishartModel(
        doc["d"], doc["b"], doc["beta"], doc["Q"], jump_from_dict(doc.get("jump"), matrix=True), doc.get("x0"),
    ))


def loads_model(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})", "") from exc
    return model_from_dict(doc)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())


def model_to_dict(model):
    return model.to_dict()


# ---------------------------------------------------------------------------
# stable output


def format_float(x):
    """Seventeen significant digits; non-finite values map to JSON ``null``."""
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return "%.17g" % (x + 0.0)  # no negative zero


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return "null" if obj is None else ("true" if obj else "false")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (complex, np.complexfloating)):
        return _encode({"re": obj.real, "im": obj.imag}, indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj, indent=2):
    """JSON text with every float written as ``%.17g``."""
    return _encode(obj, indent, 0) + "\n"


def dump_model(model):
    return dumps(model_to_dict(model))


__all__ = ["MODEL_SCHEMA", "check_schema", "dump_model", "dumps", "format_float", "load_model", "loads_model",
           "model_from_dict", "model_to_dict"]
