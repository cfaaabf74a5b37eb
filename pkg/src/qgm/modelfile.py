"""Versioned JSON model files with bit-exact parameter round-trips.

Complex matrices are stored as row-major nested lists of [re, im] pairs,
real matrices as plain nested lists.  Python's float-to-decimal conversion
is shortest-round-trip, so writing and re-reading a finite float recovers
the identical bit pattern; no binary encoding is needed.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ParseError
from .hmm import Hmm
from .hqmm import Hqmm

FORMAT_VERSION = 1


def _complex_to_lists(arr: np.ndarray):
    re = arr.real.tolist()
    im = arr.imag.tolist()

    def pair(r, i):
        if isinstance(r, list):
            return [pair(a, b) for a, b in zip(r, i)]
        return [r, i]

    return pair(re, im)


def _lists_to_complex(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    return arr[..., 0] + 1j * arr[..., 1]


def save_model(model, path, metadata: dict | None = None) -> None:
    """Serialize an Hqmm or Hmm; ``metadata`` rides along untouched."""
    if isinstance(model, Hqmm):
        body = {
            "format_version": FORMAT_VERSION,
            "kind": "hqmm",
            "n": model.n,
            "s": model.s,
            "w": model.w,
            "kraus": _complex_to_lists(model.kraus),
            "rho0": _complex_to_lists(model.rho0),
        }
    elif isinstance(model, Hmm):
        body = {
            "format_version": FORMAT_VERSION,
            "kind": "hmm",
            "n": model.n,
            "s": model.s,
            "transition": model.transition.tolist(),
            "emission": model.emission.tolist(),
            "prior": model.prior.tolist(),
        }
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    if metadata is not None:
        body["metadata"] = metadata
    with open(path, "w", encoding="ascii") as fh:
        json.dump(body, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path):
    """Read a model file back; returns (model, metadata dict)."""
    path = Path(path)
    with open(path, "r", encoding="ascii") as fh:
        try:
            body = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.lineno, f"invalid JSON in model file: {exc}") from exc
    version = body.get("format_version")
    if version != FORMAT_VERSION:
        raise ParseError(0, f"unsupported model format_version {version!r}")
    kind = body.get("kind")
    if kind == "hqmm":
        kraus = _lists_to_complex(body["kraus"])
        rho0 = _lists_to_complex(body["rho0"])
        expected = (body["s"], body["w"], body["n"], body["n"])
        if kraus.shape != expected:
            raise ParseError(0, f"kraus shape {kraus.shape} does not match "
                                f"declared dimensions {expected}")
        model = Hqmm(kraus, rho0)
    elif kind == "hmm":
        model = Hmm(np.asarray(body["transition"], dtype=np.float64),
                    np.asarray(body["emission"], dtype=np.float64),
                    np.asarray(body["prior"], dtype=np.float64))
    else:
        raise ParseError(0, f"unknown model kind {kind!r}")
    return model, body.get("metadata", {})
