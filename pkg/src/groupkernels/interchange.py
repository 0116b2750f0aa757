"""JSON interchange format for kernels.

One document per kernel::

    {
      "group": "Z^2",
      "coeff_dim": 2,
      "representation": "invariant",
      "entries": [{"gamma": [1, 0], "matrix": [[re, im], ...]}, ...]
    }

Windowed kernels use ``"representation": "windowed"``, carry the window
radius under ``"window_radius"`` and list entries as ``{"i", "j", "matrix"}``
with indices into the ordered ball ``B(e, R)``.  Matrices are row-major
lists of ``[re, im]`` pairs.  Floats are written with ``repr`` precision, so
a write-then-read round trip is bit-exact.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .groups import GroupElement, parse_group
from .kernels import InvariantKernel, WindowedKernel


def _encode_matrix(a: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(a).reshape(-1)]


def _decode_matrix(pairs, d: int) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float)
    if arr.shape != (d * d, 2):
        raise ValidationError(f"matrix must hold {d * d} [re, im] pairs, got shape {arr.shape}")
    return (arr[:, 0] + 1j * arr[:, 1]).reshape(d, d)


def to_document(T) -> dict:
    if isinstance(T, InvariantKernel):
        return {
            "group": T.group.spec,
            "coeff_dim": T.coeff_dim,
            "representation": "invariant",
            "entries": [{"gamma": list(g.canonical), "matrix": _encode_matrix(a)} for g, a in T.table.items()],
        }
    if isinstance(T, WindowedKernel):
        return {
            "group": T.group.spec,
            "coeff_dim": T.coeff_dim,
            "representation": "windowed",
            "window_radius": T.radius,
            "entries": [
                {"i": i, "j": j, "matrix": _encode_matrix(b)} for (i, j), b in sorted(T.blocks.items())
            ],
        }
    raise ValidationError(f"cannot serialize {type(T).__name__}")


def from_document(doc: dict):
    try:
        group = parse_group(doc["group"])
        d = int(doc["coeff_dim"])
        rep = doc["representation"]
        entries = doc["entries"]
    except KeyError as exc:
        raise ValidationError(f"kernel document is missing field {exc.args[0]!r}") from None
    if rep == "invariant":
        table = {}
        for e in entries:
            g = GroupElement(tuple(e["gamma"]))
            group.validate(g)
            table[g] = _decode_matrix(e["matrix"], d)
        return InvariantKernel(group, d, table)
    if rep == "windowed":
        blocks = {(int(e["i"]), int(e["j"])): _decode_matrix(e["matrix"], d) for e in entries}
        return WindowedKernel.from_blocks(group, int(doc["window_radius"]), d, blocks)
    raise ValidationError(f"unknown kernel representation {rep!r}")


def dumps(T) -> str:
    return json.dumps(to_document(T), indent=1)


def loads(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"kernel document is not valid JSON: {exc}") from None
    return from_document(doc)


def write_kernel(T, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(dumps(T))
    os.replace(tmp, path)


def read_kernel(path):
    return loads(Path(path).read_text())
