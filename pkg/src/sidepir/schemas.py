"""JSON Schemas for the files this package reads and writes."""

PLAN = {
    "type": "object",
    "description": "database index (1-based, as a string) -> cached message indices",
    "patternProperties": {
        "^[1-9][0-9]*$": {"type": "array", "items": {"type": "integer", "minimum": 1},
                          "uniqueItems": True},
    },
    "additionalProperties": False,
}

_TERM = {"type": "array", "items": {"type": "integer", "minimum": 1},
         "minItems": 2, "maxItems": 2}

QUERY_TABLE = {
    "type": "object",
    "required": ["N", "K", "M", "theta", "seed", "plan", "counts", "permutations",
                 "databases", "mutation"],
    "properties": {
        "N": {"type": "integer", "minimum": 2},
        "K": {"type": "integer", "minimum": 1},
        "M": {"type": "integer", "minimum": 0},
        "theta": {"type": "integer", "minimum": 1},
        "seed": {},
        "mutation": {"type": ["string", "null"]},
        "plan": PLAN,
        "counts": {
            "type": "object",
            "required": ["p", "q", "L", "code_length", "parity_per_db"],
            "additionalProperties": {"type": "integer"},
        },
        "permutations": {
            "type": "object",
            "additionalProperties": {"type": "array", "items": {"type": "integer"}},
        },
        "databases": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["n", "queries", "known", "order"],
                "properties": {
                    "n": {"type": "integer", "minimum": 1},
                    "queries": {"type": "array",
                                "items": {"type": "array", "items": _TERM, "minItems": 1}},
                    "known": {"type": "array", "items": {"type": "boolean"}},
                    "order": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                },
            },
        },
    },
}

TRANSCRIPT = {
    "type": "object",
    "required": ["config", "plan", "theta", "seed", "L", "parity", "decoded",
                 "downloaded_symbols", "ratio", "decode_ok"],
    "properties": {
        "config": {
            "type": "object",
            "required": ["N", "K", "M", "width"],
            "additionalProperties": {"type": "integer"},
        },
        "plan": PLAN,
        "theta": {"type": "integer", "minimum": 1},
        "seed": {},
        "L": {"type": "integer", "minimum": 1},
        "parity": {"type": "object",
                   "additionalProperties": {"type": "string", "pattern": "^[0-9a-f]*$"}},
        "decoded": {"type": "string", "pattern": "^[0-9a-f]*$"},
        "downloaded_symbols": {"type": "integer", "minimum": 0},
        "ratio": {"type": "string", "pattern": "^[0-9]+(/[0-9]+)?$"},
        "decode_ok": {"type": ["boolean", "null"]},
    },
}

AUDIT = {
    "type": "object",
    "required": ["points", "passed"],
    "properties": {
        "points": {"type": "array", "items": {"type": "array", "items": {"type": "integer"},
                                              "minItems": 3, "maxItems": 3}},
        "passed": {"type": "boolean"},
        "capacity": {
            "type": "object",
            "required": ["passed", "cases", "failures"],
            "properties": {
                "cases": {"type": "array", "items": {
                    "type": "object",
                    "required": ["N", "K", "M", "trial", "theta", "ratio", "expected",
                                 "decode_ok", "passed"],
                }},
            },
        },
        "structural": {"type": "array", "items": {
            "type": "object", "required": ["point", "n", "mode", "passed", "details"]}},
        "statistical": {"type": "array", "items": {
            "type": "object", "required": ["point", "n", "mode", "passed", "details"]}},
    },
}
