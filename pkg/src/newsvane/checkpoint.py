"""Versioned JSON checkpoints for trained models.

A checkpoint is self-contained: model configuration, the vocabulary (with
its content hash), the embedding table and all network parameters. Arrays
are stored as base64 of their raw little-endian float64/int64 bytes, so
saving the same state twice produces byte-identical files.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingTable
from .fileio import read_json, write_json_atomic
from .network import ModelConfig, ModelParameters
from .text import Vocabulary, vocabulary_hash

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _encode_array(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr)
    if arr.dtype not in (np.float64, np.int64):
        raise CheckpointError(f"unsupported dtype {arr.dtype}")
    return {
        "dtype": str(arr.dtype),
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def _decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    arr = np.frombuffer(raw, dtype=np.dtype(d["dtype"])).copy()
    return arr.reshape(d["shape"])


@dataclass
class Checkpoint:
    config: ModelConfig
    vocab: Vocabulary
    table: EmbeddingTable
    params: ModelParameters
    vocab_hash: str
    training_meta: dict


def save_checkpoint(
    path: str | Path,
    config: ModelConfig,
    vocab: Vocabulary,
    table: EmbeddingTable,
    params: ModelParameters,
    training_meta: dict | None = None,
) -> None:
    tokens = [w for w, _ in sorted(vocab.word_to_index.items(), key=lambda kv: kv[1])]
    payload = {
        "format_version": FORMAT_VERSION,
        "config": config.to_dict(),
        "vocab": {"tokens": tokens, "max_len": vocab.max_len},
        "vocab_hash": vocabulary_hash(vocab),
        "embedding": {
            "mode": table.mode,
            "p": table.p,
            "pretrained_hit_count": table.pretrained_hit_count,
            "matrix": _encode_array(table.matrix),
        },
        "params": {
            "filters": {str(h): _encode_array(a) for h, a in sorted(params.filters.items())},
            "filter_biases": {
                str(h): _encode_array(a) for h, a in sorted(params.filter_biases.items())
            },
            "w1": _encode_array(params.w1),
            "b1": _encode_array(params.b1),
            "w2": _encode_array(params.w2),
            "b2": _encode_array(params.b2),
            "w_out": _encode_array(params.w_out),
            "b_out": _encode_array(params.b_out),
        },
        "training_meta": training_meta or {},
    }
    write_json_atomic(path, payload)


def load_checkpoint(path: str | Path, expected_config: ModelConfig | None = None) -> Checkpoint:
    """Load and validate a checkpoint.

    Rejects unknown format versions, internal vocabulary-hash mismatches
    (corruption), and, when ``expected_config`` is given, any configuration
    disagreement.
    """
    payload = read_json(path)
    if payload.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint format {payload.get('format_version')!r}"
        )
    config = ModelConfig.from_dict(payload["config"])
    if expected_config is not None and config != expected_config:
        raise CheckpointError(f"{path}: checkpoint config does not match the expected config")

    tokens = payload["vocab"]["tokens"]
    vocab = Vocabulary(
        word_to_index={tok: i + 1 for i, tok in enumerate(tokens)},
        max_len=int(payload["vocab"]["max_len"]),
    )
    stored_hash = payload["vocab_hash"]
    if vocabulary_hash(vocab) != stored_hash:
        raise CheckpointError(f"{path}: vocabulary hash mismatch (corrupt checkpoint)")

    emb = payload["embedding"]
    table = EmbeddingTable(
        matrix=_decode_array(emb["matrix"]),
        mode=emb["mode"],
        p=int(emb["p"]),
        pretrained_hit_count=int(emb["pretrained_hit_count"]),
    )
    pp = payload["params"]
    params = ModelParameters(
        filters={int(h): _decode_array(a) for h, a in pp["filters"].items()},
        filter_biases={int(h): _decode_array(a) for h, a in pp["filter_biases"].items()},
        w1=_decode_array(pp["w1"]),
        b1=_decode_array(pp["b1"]),
        w2=_decode_array(pp["w2"]),
        b2=_decode_array(pp["b2"]),
        w_out=_decode_array(pp["w_out"]),
        b_out=_decode_array(pp["b_out"]),
    )
    return Checkpoint(
        config=config, vocab=vocab, table=table, params=params,
        vocab_hash=stored_hash, training_meta=payload.get("training_meta", {}),
    )
