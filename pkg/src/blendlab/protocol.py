"""Wire-message schemas for the teleop service.

Every frame is a JSON envelope {"type", "tick", "payload"} where ticks
increase strictly per session.  Payload schemas per type are published
in docs/schemas/ and kept identical to the dictionaries here (a test
enforces it).  The input vector's magnitude bound (<= 1) is a semantic
rule validated in code; JSON Schema checks the component range.
"""

from __future__ import annotations

import json

import jsonschema

MESSAGE_TYPES = ("hello", "config", "input", "state", "metrics", "error")

_POINT = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 2,
    "maxItems": 2,
}

_TRAJECTORY = {
    "type": "object",
    "required": ["times", "points"],
    "properties": {
        "times": {"type": "array", "items": {"type": "number"}},
        "points": {"type": "array", "items": _POINT},
    },
    "additionalProperties": False,
}

_MODE = {
    "type": "object",
    "required": ["weight", "points"],
    "properties": {
        "weight": {"type": "number", "minimum": 0, "maximum": 1},
        "points": {"type": "array", "items": _POINT},
    },
    "additionalProperties": False,
}

_OBSTACLE = {
    "oneOf": [
        {
            "type": "object",
            "required": ["type", "center", "radius"],
            "properties": {
                "type": {"const": "circle"},
                "center": _POINT,
                "radius": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        {
            "type": "object",
            "required": ["type", "xmin", "ymin", "xmax", "ymax"],
            "properties": {
                "type": {"const": "rect"},
                "xmin": {"type": "number"},
                "ymin": {"type": "number"},
                "xmax": {"type": "number"},
                "ymax": {"type": "number"},
            },
            "additionalProperties": False,
        },
    ]
}

_METHOD = {"enum": ["lb", "ltb", "ltbo", "ctb", "psc"]}

ENVELOPE_SCHEMA = {
    "type": "object",
    "required": ["type", "tick", "payload"],
    "properties": {
        "type": {"enum": list(MESSAGE_TYPES)},
        "tick": {"type": "integer", "minimum": 0},
        "payload": {"type": "object"},
    },
    "additionalProperties": False,
}

PAYLOAD_SCHEMAS = {
    "hello": {
        "type": "object",
        "required": [
            "version",
            "scenario",
            "method",
            "tick_ms",
            "dt",
            "horizon",
            "v_max",
            "goal",
            "obstacles",
            "crowd_size",
        ],
        "properties": {
            "version": {"type": "string"},
            "scenario": {"type": "string"},
            "method": _METHOD,
            "tick_ms": {"type": "number", "exclusiveMinimum": 0},
            "dt": {"type": "number", "exclusiveMinimum": 0},
            "horizon": {"type": "integer", "minimum": 1},
            "v_max": {"type": "number", "exclusiveMinimum": 0},
            "goal": _POINT,
            "obstacles": {"type": "array", "items": _OBSTACLE},
            "crowd_size": {"type": "integer", "minimum": 0},
        },
        "additionalProperties": False,
    },
    "config": {
        "type": "object",
        "properties": {
            "method": _METHOD,
            "gamma": {"type": "number", "exclusiveMinimum": 0},
            "n_samples": {"type": "integer", "minimum": 1},
            "search_budget": {"type": "integer", "minimum": 0},
            "k_h": {"type": "number", "minimum": 0, "maximum": 1},
        },
        "additionalProperties": False,
    },
    "input": {
        "type": "object",
        "required": ["vector"],
        "properties": {
            "vector": {
                "type": "array",
                "items": {"type": "number", "minimum": -1, "maximum": 1},
                "minItems": 2,
                "maxItems": 2,
            }
        },
        "additionalProperties": False,
    },
    "state": {
        "type": "object",
        "required": [
            "time",
            "method",
            "robot",
            "goal",
            "crowd",
            "input_echo",
            "chosen",
            "operator_mean",
            "operator_modes",
            "autonomy_modes",
            "diagnostics",
            "downgraded",
            "reached_goal",
            "min_clearance",
        ],
        "properties": {
            "time": {"type": "number"},
            "method": _METHOD,
            "robot": _POINT,
            "goal": _POINT,
            "crowd": {"type": "array", "items": _POINT},
            "input_echo": _POINT,
            "chosen": _TRAJECTORY,
            "operator_mean": _TRAJECTORY,
            "operator_modes": {"type": "array", "items": _MODE},
            "autonomy_modes": {"type": "array", "items": _MODE},
            "diagnostics": {"type": "object", "additionalProperties": {"type": "number"}},
            "downgraded": {"type": "boolean"},
            "reached_goal": {"type": "boolean"},
            "min_clearance": {"type": "number"},
        },
        "additionalProperties": False,
    },
    "metrics": {
        "type": "object",
        "required": [
            "min_clearance",
            "collision",
            "path_length",
            "time_to_goal",
            "agreeability_score",
            "reached_goal",
            "steps",
        ],
        "properties": {
            "min_clearance": {"type": "number"},
            "collision": {"type": "boolean"},
            "path_length": {"type": "number"},
            "time_to_goal": {"type": ["number", "null"]},
            "agreeability_score": {"type": "number"},
            "reached_goal": {"type": "boolean"},
            "steps": {"type": "integer", "minimum": 0},
        },
        "additionalProperties": False,
    },
    "error": {
        "type": "object",
        "required": ["message", "code"],
        "properties": {
            "message": {"type": "string"},
            "code": {"type": "string"},
        },
        "additionalProperties": False,
    },
}


def validate_message(message):
    """Validate one envelope (dict); raises jsonschema.ValidationError."""
    jsonschema.validate(message, ENVELOPE_SCHEMA)
    jsonschema.validate(message["payload"], PAYLOAD_SCHEMAS[message["type"]])
    return message


def parse_message(text):
    """Parse and validate a JSON text frame."""
    message = json.loads(text)
    return validate_message(message)


def make_message(msg_type, tick, payload):
    message = {"type": msg_type, "tick": int(tick), "payload": payload}
    return validate_message(message)


def schema_documents():
    """The published schema set, keyed by file name."""
    docs = {"envelope.json": ENVELOPE_SCHEMA}
    for name, schema in PAYLOAD_SCHEMAS.items():
        docs[f"{name}.json"] = schema
    return docs
