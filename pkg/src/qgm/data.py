"""Dataset handling: splice ingestion, synthetic generation, windowing, NDJSON IO.

Sequences are 1-d int arrays of symbols in [0, s).  Long sequences are cut
into consecutive non-overlapping windows before training; the first
``burn_in`` symbols of every window condition the filtered state without
contributing likelihood terms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, ParseError
from .hmm import Hmm, sample_hmm
from .hqmm import random_hqmm, sample

SPLICE_LABELS = {"EI": 0, "IE": 1, "N": 2}
SPLICE_BASES = {"A": 0, "C": 1, "G": 2, "T": 3}
SPLICE_AMBIGUOUS = set("DNSR")


@dataclass
class LabeledSequenceSet:
    """Observation sequences with optional class labels and symbol alphabet."""

    sequences: list
    labels: np.ndarray | None = None
    alphabet: dict | None = None

    def __post_init__(self):
        self.sequences = [np.asarray(seq, dtype=np.int64) for seq in self.sequences]
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (len(self.sequences),):
                raise DimensionError(
                    f"{self.labels.shape[0] if self.labels.ndim else 0} labels for "
                    f"{len(self.sequences)} sequences")

    def __len__(self) -> int:
        return len(self.sequences)

    def class_counts(self) -> dict:
        if self.labels is None:
            return {}
        values, counts = np.unique(self.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}

    def subset(self, indices) -> "LabeledSequenceSet":
        indices = np.asarray(indices, dtype=np.int64)
        labels = None if self.labels is None else self.labels[indices]
        return LabeledSequenceSet([self.sequences[i] for i in indices],
                                  labels, self.alphabet)


@dataclass
class WindowSet:
    """Windowed sequences plus the bookkeeping the windowing produced."""

    windows: list
    burn_in: int
    retained_symbols: int
    dropped_symbols: int


def window_sequences(seqs, window_length: int, burn_in: int = 0) -> WindowSet:
    """Cut sequences into consecutive non-overlapping windows.

    A final shorter remainder is kept only when it has at least burn_in + 1
    symbols (otherwise it carries no trainable symbol and is dropped).
    """
    if burn_in < 0 or window_length <= burn_in:
        raise DimensionError(
            f"need window_length > burn_in >= 0, got window_length={window_length}, "
            f"burn_in={burn_in}")
    windows = []
    retained = 0
    dropped = 0
    for seq in seqs:
        seq = np.asarray(seq, dtype=np.int64)
        if seq.ndim != 1:
            raise DimensionError(f"sequences must be 1-d, got shape {seq.shape}")
        for start in range(0, seq.size, window_length):
            piece = seq[start:start + window_length]
            if piece.size >= burn_in + 1:
                windows.append(piece)
                retained += piece.size
            else:
                dropped += piece.size
    return WindowSet(windows, burn_in, retained, dropped)


def load_splice(path) -> LabeledSequenceSet:
    """Read the UCI splice-junction file: records "LABEL, name, 60-base sequence".

    Labels map EI -> 0, IE -> 1, N -> 2 and bases A, C, G, T -> 0..3.  The
    ambiguity codes D, N, S, R are removed from sequences (each removal
    shortens that sequence).  Any other content is a parse error carrying
    its 1-based line number.
    """
    sequences = []
    labels = []
    with open(path, "r", encoding="ascii") as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = [part.strip() for part in line.split(",")]
            if len(parts) != 3:
                raise ParseError(line_number,
                                 f"expected 3 comma-separated fields, got {len(parts)}")
            label_text, _, seq_text = parts
            if label_text not in SPLICE_LABELS:
                raise ParseError(line_number, f"unknown class label {label_text!r}")
            symbols = []
            for ch in seq_text.replace(" ", "").replace("\t", ""):
                if ch in SPLICE_BASES:
                    symbols.append(SPLICE_BASES[ch])
                elif ch not in SPLICE_AMBIGUOUS:
                    raise ParseError(line_number, f"unknown base character {ch!r}")
            if not symbols:
                raise ParseError(line_number, "sequence has no unambiguous bases")
            sequences.append(np.array(symbols, dtype=np.int64))
            labels.append(SPLICE_LABELS[label_text])
    if not sequences:
        raise ParseError(0, "file contains no records")
    return LabeledSequenceSet(sequences, np.array(labels), dict(SPLICE_BASES))


def _random_hmm_model(n: int, s: int, rng: np.random.Generator) -> Hmm:
    a = rng.random((n, n))
    c = rng.random((s, n))
    prior = rng.random(n)
    return Hmm(a / a.sum(axis=0, keepdims=True),
               c / c.sum(axis=0, keepdims=True),
               prior / prior.sum())


def gen_synthetic(kind: str, n: int, s: int, w: int | None, num_sequences: int,
                  length: int, seed) -> tuple:
    """Seeded ground-truth model plus data sampled from it.

    kind "hmm" draws transition/emission as normalized positive random
    columns; kind "hqmm" draws a Stiefel-uniform Kraus grid and a random
    full-rank rho0.  Returns (model, LabeledSequenceSet).
    """
    if num_sequences < 1 or length < 1:
        raise DimensionError(
            f"need num_sequences, length >= 1, got {num_sequences}, {length}")
    rng = np.random.default_rng(seed)
    if kind == "hmm":
        model = _random_hmm_model(n, s, rng)
        ys = sample_hmm(model, length, rng, num_sequences=num_sequences)
    elif kind == "hqmm":
        if w is None or w < 1:
            raise DimensionError(f"hqmm generation needs w >= 1, got {w}")
        model = random_hqmm(n, s, w, rng)
        ys = sample(model, length, rng, num_sequences=num_sequences)
    else:
        raise ValueError(f"kind must be 'hmm' or 'hqmm', got {kind!r}")
    return model, LabeledSequenceSet(list(ys))


def save_dataset(dataset: LabeledSequenceSet, path, meta: dict | None = None) -> None:
    """Write one JSON record {label?, symbols} per line, plus a .meta.json sidecar."""
    path = Path(path)
    with open(path, "w", encoding="ascii") as fh:
        for i, seq in enumerate(dataset.sequences):
            record = {"symbols": [int(x) for x in seq]}
            if dataset.labels is not None:
                record["label"] = int(dataset.labels[i])
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    sidecar = {"alphabet": dataset.alphabet, "num_sequences": len(dataset)}
    if meta:
        sidecar.update(meta)
    with open(path.with_name(path.name + ".meta.json"), "w", encoding="ascii") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(path) -> LabeledSequenceSet:
    """Read a newline-delimited JSON dataset written by save_dataset."""
    path = Path(path)
    sequences = []
    labels = []
    expect_label = None
    with open(path, "r", encoding="ascii") as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_number, f"invalid JSON: {exc}") from exc
            if "symbols" not in record or not isinstance(record["symbols"], list):
                raise ParseError(line_number, "record lacks a 'symbols' array")
            if expect_label is None:
                expect_label = "label" in record
            elif ("label" in record) != expect_label:
                raise ParseError(line_number, "record mixes labeled and unlabeled data")
            sequences.append(np.array(record["symbols"], dtype=np.int64))
            if expect_label:
                labels.append(int(record["label"]))
    if not sequences:
        raise ParseError(0, "file contains no records")
    alphabet = None
    sidecar = path.with_name(path.name + ".meta.json")
    if sidecar.exists():
        with open(sidecar, "r", encoding="ascii") as fh:
            alphabet = json.load(fh).get("alphabet")
    return LabeledSequenceSet(sequences, np.array(labels) if expect_label else None,
                              alphabet)
