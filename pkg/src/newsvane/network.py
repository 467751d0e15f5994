"""Forward and backward passes of the headline classification network.

Architecture, per sample: the encoded headline is expanded to the
concatenated embedding vector X of length m*p; for each configured filter
width h, a bank of filters of length h*p slides over X one word at a time,
producing relu feature maps of length m-h+1; each map is max-pooled with
non-overlapping windows of size w (a final partial window is pooled as-is);
the pooled maps are concatenated into z; two fully connected relu layers with
dropout follow; the output head is a single sigmoid unit (binary) or a
3-way softmax (multiclass), trained with the matching cross-entropy loss.

Everything is float64 and single-sample; the training loop batches by
accumulating per-sample gradients in a fixed order, which keeps runs
bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Literal

import numpy as np

from .embeddings import EmbeddingTable, lookup_concat
from .text import EncodedHeadline

HEAD_BINARY = "binary"
HEAD_MULTICLASS3 = "multiclass3"
HEADS = (HEAD_BINARY, HEAD_MULTICLASS3)

# Probabilities are clamped to [LOG_EPS, 1 - LOG_EPS] before any log.
LOG_EPS = 1e-7


@dataclass(frozen=True)
class ModelConfig:
    """Shape and head configuration of the network."""

    p: int
    m: int
    filter_widths: tuple[int, ...]
    filters_per_width: int
    hidden_sizes: tuple[int, int]
    dropout_rate: float = 0.0
    pool_w: int = 2
    head: str = HEAD_BINARY

    def __post_init__(self) -> None:
        if self.p < 1 or self.m < 1:
            raise ValueError("p and m must be >= 1")
        if not self.filter_widths:
            raise ValueError("at least one filter width required")
        if len(set(self.filter_widths)) != len(self.filter_widths):
            raise ValueError("filter widths must be distinct")
        if any(h < 2 for h in self.filter_widths):
            raise ValueError("filter widths must be >= 2")
        if any(h > self.m for h in self.filter_widths):
            raise ValueError("every filter width must be <= m")
        if self.filters_per_width < 1:
            raise ValueError("filters_per_width must be >= 1")
        if self.pool_w < 1:
            raise ValueError("pool_w must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.head not in HEADS:
            raise ValueError(f"unknown head {self.head!r}")
        l1, l2 = self.hidden_sizes
        if not 1 <= l2 < l1:
            raise ValueError("hidden sizes must satisfy 1 <= l2 < l1")
        if l1 >= self.z_len:
            raise ValueError(
                f"first hidden size {l1} must be smaller than the pooled feature length {self.z_len}"
            )

    @property
    def total_filters(self) -> int:
        return self.filters_per_width * len(self.filter_widths)

    def map_len(self, h: int) -> int:
        """Feature-map length for width h at stride one: m - h + 1."""
        return self.m - h + 1

    def pooled_len(self, h: int) -> int:
        return -(-self.map_len(h) // self.pool_w)  # ceil division

    @property
    def z_len(self) -> int:
        return sum(self.filters_per_width * self.pooled_len(h) for h in self.filter_widths)

    @property
    def out_dim(self) -> int:
        return 1 if self.head == HEAD_BINARY else 3

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "m": self.m,
            "filter_widths": list(self.filter_widths),
            "filters_per_width": self.filters_per_width,
            "hidden_sizes": list(self.hidden_sizes),
            "dropout_rate": self.dropout_rate,
            "pool_w": self.pool_w,
            "head": self.head,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            p=int(d["p"]),
            m=int(d["m"]),
            filter_widths=tuple(int(h) for h in d["filter_widths"]),
            filters_per_width=int(d["filters_per_width"]),
            hidden_sizes=(int(d["hidden_sizes"][0]), int(d["hidden_sizes"][1])),
            dropout_rate=float(d.get("dropout_rate", 0.0)),
            pool_w=int(d.get("pool_w", 2)),
            head=str(d.get("head", HEAD_BINARY)),
        )


@dataclass(eq=False)
class ModelParameters:
    """All trainable weights except the embedding table.

    ``filters[h]`` has one row per filter of width h, each of length h*p;
    ``filter_biases[h]`` holds the per-filter scalar biases (shared across
    sliding positions). Dense weights are row-per-neuron.
    """

    filters: dict[int, np.ndarray]
    filter_biases: dict[int, np.ndarray]
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray

    def tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        """Named tensors in a fixed, deterministic order."""
        for h in sorted(self.filters):
            yield f"filters[{h}]", self.filters[h]
        for h in sorted(self.filter_biases):
            yield f"filter_biases[{h}]", self.filter_biases[h]
        yield "w1", self.w1
        yield "b1", self.b1
        yield "w2", self.w2
        yield "b2", self.b2
        yield "w_out", self.w_out
        yield "b_out", self.b_out

    def copy(self) -> "ModelParameters":
        return ModelParameters(
            filters={h: a.copy() for h, a in self.filters.items()},
            filter_biases={h: a.copy() for h, a in self.filter_biases.items()},
            w1=self.w1.copy(), b1=self.b1.copy(),
            w2=self.w2.copy(), b2=self.b2.copy(),
            w_out=self.w_out.copy(), b_out=self.b_out.copy(),
        )

    @classmethod
    def zeros_like(cls, other: "ModelParameters") -> "ModelParameters":
        return cls(
            filters={h: np.zeros_like(a) for h, a in other.filters.items()},
            filter_biases={h: np.zeros_like(a) for h, a in other.filter_biases.items()},
            w1=np.zeros_like(other.w1), b1=np.zeros_like(other.b1),
            w2=np.zeros_like(other.w2), b2=np.zeros_like(other.b2),
            w_out=np.zeros_like(other.w_out), b_out=np.zeros_like(other.b_out),
        )

    def add_scaled(self, other: "ModelParameters", scale: float = 1.0) -> None:
        for (_, mine), (_, theirs) in zip(self.tensors(), other.tensors()):
            mine += scale * theirs


def init_parameters(config: ModelConfig, rng: np.random.Generator) -> ModelParameters:
    """Scaled-normal initialization (std 1/sqrt(fan_in)), zero biases."""
    l1, l2 = config.hidden_sizes
    filters = {}
    biases = {}
    for h in config.filter_widths:
        fan_in = h * config.p
        filters[h] = rng.normal(0.0, 1.0 / math.sqrt(fan_in), size=(config.filters_per_width, fan_in))
        biases[h] = np.zeros(config.filters_per_width)
    return ModelParameters(
        filters=filters,
        filter_biases=biases,
        w1=rng.normal(0.0, 1.0 / math.sqrt(config.z_len), size=(l1, config.z_len)),
        b1=np.zeros(l1),
        w2=rng.normal(0.0, 1.0 / math.sqrt(l1), size=(l2, l1)),
        b2=np.zeros(l2),
        w_out=rng.normal(0.0, 1.0 / math.sqrt(l2), size=(config.out_dim, l2)),
        b_out=np.zeros(config.out_dim),
    )


@dataclass(eq=False)
class Gradients:
    """Per-sample (or batch-accumulated) gradients."""

    params: ModelParameters
    embeddings: np.ndarray  # same shape as the table matrix; zeros when frozen


# --- primitive operations -------------------------------------------------


def relu(x):
    """max(0, x), elementwise; the derivative at exactly 0 is taken as 0."""
    return np.maximum(0.0, x)


def _word_windows(x: np.ndarray, h: int, p: int) -> np.ndarray:
    """All word-aligned windows of h consecutive words: shape (m-h+1, h*p)."""
    if x.size % p != 0:
        raise ValueError("input length is not a multiple of the embedding dimension")
    m = x.size // p
    if h > m:
        raise ValueError(f"filter width {h} exceeds sentence length {m}")
    return np.lib.stride_tricks.sliding_window_view(x, h * p)[::p]


def conv_forward(x: np.ndarray, filt: np.ndarray, bias: float, h: int) -> np.ndarray:
    """Single-filter convolution over the concatenated embedding vector.

    Element k (0-based) is relu(filt . x[k*p : k*p + h*p] + bias); the filter
    advances one word per step, so the map has m - h + 1 elements and every
    adjacent phrase of h words is scored once.
    """
    filt = np.asarray(filt, dtype=np.float64)
    if filt.size % h != 0:
        raise ValueError("filter length must be h * p")
    p = filt.size // h
    windows = _word_windows(np.asarray(x, dtype=np.float64), h, p)
    return relu(windows @ filt + bias)


def _pool_columns(maps: np.ndarray, w: int) -> tuple[np.ndarray, np.ndarray]:
    """Max-pool each column of ``maps`` (shape (n, d)) with window/stride w.

    Returns (pooled (ceil(n/w), d), argmax row indices into ``maps``). The
    final partial window is pooled as-is; ties resolve to the leftmost
    element.
    """
    n, d = maps.shape
    if n == 0:
        raise ValueError("cannot pool an empty feature map")
    n_out = -(-n // w)
    padded = np.full((n_out * w, d), -np.inf)
    padded[:n] = maps
    blocks = padded.reshape(n_out, w, d)
    within = blocks.argmax(axis=1)
    pooled = blocks.max(axis=1)
    positions = within + (np.arange(n_out) * w)[:, None]
    return pooled, positions


def maxpool(c: np.ndarray, w: int) -> tuple[np.ndarray, np.ndarray]:
    """Down-sample a feature map; returns (pooled map, argmax positions)."""
    c = np.asarray(c, dtype=np.float64)
    if w < 1:
        raise ValueError("pool size must be >= 1")
    pooled, positions = _pool_columns(c[:, None], w)
    return pooled[:, 0], positions[:, 0]


def dense_forward(
    zprev: np.ndarray, w: np.ndarray, b: np.ndarray, activation: Literal["relu", "none"]
) -> np.ndarray:
    """Fully connected layer: out_k = act(zprev . w[k] + b[k])."""
    zprev = np.asarray(zprev, dtype=np.float64)
    if w.shape[1] != zprev.size or w.shape[0] != b.size:
        raise ValueError(f"dense shape mismatch: w {w.shape}, b {b.shape}, input {zprev.shape}")
    pre = w @ zprev + b
    if activation == "relu":
        return relu(pre)
    if activation == "none":
        return pre
    raise ValueError(f"unknown activation {activation!r}")


def apply_dropout(
    v: np.ndarray,
    rate: float,
    mode: Literal["train", "test"],
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Dropout with test-time weight scaling.

    Train mode zeroes each element independently with probability ``rate``
    and returns the kept-element mask; test mode scales every element by
    (1 - rate) to account for the expected exclusions, returning mask None.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    v = np.asarray(v, dtype=np.float64)
    if mode == "test":
        return v * (1.0 - rate), None
    if mode != "train":
        raise ValueError(f"unknown dropout mode {mode!r}")
    if rate == 0.0 and rng is None:
        mask = np.ones_like(v)
    else:
        if rng is None:
            raise ValueError("train-mode dropout with rate > 0 needs a generator")
        mask = (rng.random(v.shape) >= rate).astype(np.float64)
    return v * mask, mask


def sigmoid(z: float) -> float:
    """Logistic function, overflow-safe for large |z|."""
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def softmax3(z: np.ndarray) -> np.ndarray:
    """3-way softmax with max-subtraction for numerical stability."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (3,):
        raise ValueError("softmax3 expects exactly 3 logits")
    shifted = np.exp(z - z.max())
    return shifted / shifted.sum()


def loss_binary(sigma: float, y: int) -> float:
    """Binary cross-entropy with the probability clamped away from {0, 1}."""
    s = min(max(sigma, LOG_EPS), 1.0 - LOG_EPS)
    return -(y * math.log(s) + (1 - y) * math.log(1.0 - s))


def loss_categorical(probs: np.ndarray, y_onehot: np.ndarray) -> float:
    """Categorical cross-entropy: -log of the true class probability."""
    true_class = int(np.argmax(y_onehot))
    s = min(max(float(probs[true_class]), LOG_EPS), 1.0 - LOG_EPS)
    return -math.log(s)


# --- full network ---------------------------------------------------------


@dataclass(eq=False)
class ForwardCache:
    """Intermediate values of a train-mode forward pass, for backpropagation."""

    indices: np.ndarray
    x: np.ndarray
    conv_pre: dict[int, np.ndarray]    # width -> (map_len, n_filters)
    conv_post: dict[int, np.ndarray]
    pool_argmax: dict[int, np.ndarray]  # width -> (pooled_len, n_filters)
    z: np.ndarray
    act1: np.ndarray
    mask1: np.ndarray
    drop1: np.ndarray
    act2: np.ndarray
    mask2: np.ndarray
    drop2: np.ndarray
    logits: np.ndarray
    output: np.ndarray  # sigmoid probability (len 1) or softmax probabilities (len 3)


def forward(
    enc: EncodedHeadline,
    table: EmbeddingTable,
    params: ModelParameters,
    config: ModelConfig,
    mode: Literal["train", "test"] = "test",
    rng: np.random.Generator | None = None,
) -> tuple[float | np.ndarray, ForwardCache | None]:
    """Run the network on one encoded headline.

    Returns (output, cache): the output is the sigmoid probability (binary
    head) or the 3-class probability vector; the cache is populated only in
    train mode. Test mode is a pure function of its inputs (dropout becomes
    deterministic scaling).
    """
    if mode not in ("train", "test"):
        raise ValueError(f"unknown mode {mode!r}")
    x = lookup_concat(enc, table)

    conv_pre: dict[int, np.ndarray] = {}
    conv_post: dict[int, np.ndarray] = {}
    pool_argmax: dict[int, np.ndarray] = {}
    pooled_parts: list[np.ndarray] = []
    for h in config.filter_widths:
        windows = _word_windows(x, h, config.p)
        pre = windows @ params.filters[h].T + params.filter_biases[h]
        post = relu(pre)
        pooled, positions = _pool_columns(post, config.pool_w)
        conv_pre[h] = pre
        conv_post[h] = post
        pool_argmax[h] = positions
        pooled_parts.append(pooled.T.reshape(-1))  # filter-major: maps stay contiguous
    z = np.concatenate(pooled_parts)

    act1 = dense_forward(z, params.w1, params.b1, "relu")
    drop1, mask1 = apply_dropout(act1, config.dropout_rate, mode, rng)
    act2 = dense_forward(drop1, params.w2, params.b2, "relu")
    drop2, mask2 = apply_dropout(act2, config.dropout_rate, mode, rng)
    logits = dense_forward(drop2, params.w_out, params.b_out, "none")

    if config.head == HEAD_BINARY:
        probs = np.array([sigmoid(float(logits[0]))])
        output: float | np.ndarray = float(probs[0])
    else:
        probs = softmax3(logits)
        output = probs

    if mode == "test":
        return output, None
    cache = ForwardCache(
        indices=enc.indices, x=x, conv_pre=conv_pre, conv_post=conv_post,
        pool_argmax=pool_argmax, z=z, act1=act1, mask1=mask1, drop1=drop1,
        act2=act2, mask2=mask2, drop2=drop2, logits=logits, output=probs,
    )
    return output, cache


def sample_loss(output: float | np.ndarray, y: int, head: str) -> float:
    """Cross-entropy of one sample given the head's output activation."""
    if head == HEAD_BINARY:
        return loss_binary(float(output), y)
    onehot = np.zeros(3)
    onehot[y] = 1.0
    return loss_categorical(np.asarray(output), onehot)


def backward(
    cache: ForwardCache,
    y: int,
    params: ModelParameters,
    config: ModelConfig,
    table: EmbeddingTable,
) -> Gradients:
    """Exact analytic gradients of the per-sample loss.

    Gradients flow only through the max-pool argmax positions, relu passes
    gradient only where its input was strictly positive, and the embedding
    gradient block is identically zero in static mode and for the padding
    row in every mode.
    """
    if cache is None:
        raise ValueError("backward needs the cache from a train-mode forward pass")
    grads = ModelParameters.zeros_like(params)

    # head: d(loss)/d(logits) for both cross-entropies
    if config.head == HEAD_BINARY:
        dlogits = cache.output - np.array([float(y)])
    else:
        onehot = np.zeros(3)
        onehot[y] = 1.0
        dlogits = cache.output - onehot

    grads.w_out[:] = np.outer(dlogits, cache.drop2)
    grads.b_out[:] = dlogits
    ddrop2 = params.w_out.T @ dlogits

    dact2 = ddrop2 * cache.mask2
    dpre2 = dact2 * (cache.act2 > 0)
    grads.w2[:] = np.outer(dpre2, cache.drop1)
    grads.b2[:] = dpre2
    ddrop1 = params.w2.T @ dpre2

    dact1 = ddrop1 * cache.mask1
    dpre1 = dact1 * (cache.act1 > 0)
    grads.w1[:] = np.outer(dpre1, cache.z)
    grads.b1[:] = dpre1
    dz = params.w1.T @ dpre1

    dx = np.zeros_like(cache.x)
    offset = 0
    for h in config.filter_widths:
        n_f = config.filters_per_width
        pooled_len = config.pooled_len(h)
        seg = dz[offset : offset + n_f * pooled_len].reshape(n_f, pooled_len).T
        offset += n_f * pooled_len

        dpost = np.zeros_like(cache.conv_post[h])
        cols = np.broadcast_to(np.arange(n_f), (pooled_len, n_f))
        np.add.at(dpost, (cache.pool_argmax[h].ravel(), cols.ravel()), seg.ravel())
        dpre = dpost * (cache.conv_pre[h] > 0)

        windows = _word_windows(cache.x, h, config.p)
        grads.filters[h][:] = dpre.T @ windows
        grads.filter_biases[h][:] = dpre.sum(axis=0)

        dwindows = dpre @ params.filters[h]
        hp = h * config.p
        for k in range(dwindows.shape[0]):
            dx[k * config.p : k * config.p + hp] += dwindows[k]

    demb = np.zeros_like(table.matrix)
    if table.trainable:
        np.add.at(demb, cache.indices, dx.reshape(config.m, config.p))
        demb[0] = 0.0
    return Gradients(params=grads, embeddings=demb)
