"""Versioned text serialization of trained models.

Layout::

    s3svm 1
    meta {...}                  # one line of canonical JSON
    schema
    ctype <name> <size>
    unary <count> <names...>
    end
    weights
    ctype <name> <2^size floats>
    unary <floats>
    end

Floats are written with repr() so every double round-trips exactly;
the meta line uses sorted keys and no whitespace, so identical models
serialize to identical bytes.  The schema-section hash is the model's
compatibility fingerprint: evaluation refuses models whose fingerprint
disagrees with the features derived from the data at hand.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .energy import FormatError
from .learn import CliqueType, FeatureSchema

__all__ = [
    "dump_model",
    "load_model",
    "save_model",
    "read_model",
    "schema_hash",
]


def _schema_lines(schema: FeatureSchema) -> list[str]:
    lines = []
    for ct in schema.clique_types:
        lines.append(f"ctype {ct.name} {ct.size}")
    names = " ".join(schema.unary_names)
    lines.append(f"unary {len(schema.unary_names)} {names}".rstrip())
    return lines


def schema_hash(schema: FeatureSchema, feature_meta: dict | None = None) -> str:
    """Fingerprint of the weight layout plus the feature definition."""
    blob = "\n".join(_schema_lines(schema))
    if feature_meta is not None:
        blob += "\n" + json.dumps(feature_meta, sort_keys=True,
                                  separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def dump_model(schema: FeatureSchema, w, meta: dict | None = None) -> str:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (schema.dim,):
        raise ValueError(f"weights have shape {w.shape}, expected "
                         f"({schema.dim},)")
    out = ["s3svm 1"]
    out.append("meta " + json.dumps(meta or {}, sort_keys=True,
                                    separators=(",", ":")))
    out.append("schema")
    out.extend(_schema_lines(schema))
    out.append("end")
    out.append("weights")
    for t, ct in enumerate(schema.clique_types):
        vals = " ".join(repr(float(v)) for v in w[schema.block(t)])
        out.append(f"ctype {ct.name} {vals}")
    uv = " ".join(repr(float(v)) for v in w[schema.unary_block])
    out.append(f"unary {uv}".rstrip())
    out.append("end")
    return "\n".join(out) + "\n"


def load_model(text: str) -> tuple[FeatureSchema, np.ndarray, dict]:
    lines = [ln.rstrip("\n") for ln in text.splitlines()]
    if not lines or lines[0].split() != ["s3svm", "1"]:
        raise FormatError("bad model header, expected 's3svm 1'")
    meta: dict = {}
    i = 1
    if i < len(lines) and lines[i].startswith("meta "):
        try:
            meta = json.loads(lines[i][5:])
        except json.JSONDecodeError as exc:
            raise FormatError(f"bad meta line: {exc}") from None
        i += 1

    def expect(word):
        nonlocal i
        if i >= len(lines) or lines[i].strip() != word:
            raise FormatError(f"expected {word!r} at line {i + 1}")
        i += 1

    expect("schema")
    ctypes: list[CliqueType] = []
    unary_names: list[str] = []
    saw_unary = False
    while i < len(lines) and lines[i].strip() != "end":
        tok = lines[i].split()
        if tok[0] == "ctype":
            ctypes.append(CliqueType(tok[1], int(tok[2])))
        elif tok[0] == "unary":
            count = int(tok[1])
            unary_names = tok[2:]
            if len(unary_names) != count:
                raise FormatError(
                    f"unary declares {count} names, found "
                    f"{len(unary_names)}")
            saw_unary = True
        else:
            raise FormatError(f"unknown schema record {tok[0]!r}")
        i += 1
    if not saw_unary:
        raise FormatError("schema missing 'unary' record")
    expect("end")
    schema = FeatureSchema(ctypes, unary_names)
    w = np.zeros(schema.dim)

    expect("weights")
    filled = np.zeros(schema.dim, dtype=bool)
    while i < len(lines) and lines[i].strip() != "end":
        tok = lines[i].split()
        if tok[0] == "ctype":
            t = schema.type_index(tok[1])
            vals = [float(v) for v in tok[2:]]
            block = schema.block(t)
            if len(vals) != block.stop - block.start:
                raise FormatError(
                    f"type {tok[1]!r}: expected "
                    f"{block.stop - block.start} weights, got {len(vals)}")
            w[block] = vals
            filled[block] = True
        elif tok[0] == "unary":
            vals = [float(v) for v in tok[1:]]
            if len(vals) != schema.num_unary:
                raise FormatError(
                    f"expected {schema.num_unary} unary weights, got "
                    f"{len(vals)}")
            w[schema.unary_block] = vals
            filled[schema.unary_block] = True
        else:
            raise FormatError(f"unknown weights record {tok[0]!r}")
        i += 1
    expect("end")
    if not filled.all():
        raise FormatError("weights section incomplete")
    return schema, w, meta


def save_model(path, schema, w, meta=None) -> None:
    with open(path, "w") as fh:
        fh.write(dump_model(schema, w, meta))


def read_model(path) -> tuple[FeatureSchema, np.ndarray, dict]:
    with open(path) as fh:
        return load_model(fh.read())
