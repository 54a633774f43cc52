"""Multichannel bidirectional LSTM classifier, numpy float64 throughout.

Each channel (sdp words, supersense classes, concatenated ancestor chains,
common-ancestor chain) owns an embedding matrix and a forward + backward
LSTM; the final forward state concatenated with the final backward state of
every enabled channel feeds one tanh dense layer and a 2-way softmax.

Index 0 is padding (embedding row pinned to zeros), index 1 is out-of-
vocabulary.  Gate order everywhere is i, f, o, g.  All randomness comes from
numpy's PCG64 generator seeded from the run configuration, so identical
seeds give identical parameters, batches and history.  Evaluation-mode
forward is pure and single-threaded; reductions are plain ordered numpy
sums.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, TextIO

import numpy as np

from .errors import (
    DataError,
    DimensionMismatch,
    MalformedVectorLine,
    NonFiniteLoss,
    ShapeMismatch,
)
from .instances import Instance

PAD_INDEX = 0
OOV_INDEX = 1
PAD_TOKEN = "<pad>"
OOV_TOKEN = "<oov>"

MODEL_VERSION = "1"

CHANNEL_WORDS = "words"
CHANNEL_CLASSES = "classes"
CHANNEL_ONTO_CONCAT = "onto_concat"
CHANNEL_ONTO_COMMON = "onto_common"
CHANNEL_ORDER = (CHANNEL_WORDS, CHANNEL_CLASSES, CHANNEL_ONTO_CONCAT, CHANNEL_ONTO_COMMON)

_INIT_SCALE = 0.08


@dataclass
class ChannelSpec:
    name: str
    vocab_size: int
    embed_dim: int
    hidden_dim: int
    max_len: int


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 20
    batch_size: int = 16
    dropout_keep: float = 0.5
    seed: int = 1
    max_sdp_len: int = 15
    max_chain_len: int = 10
    class_weight_positive: float = 1.0


@dataclass
class Prediction:
    instance_id: str
    prob_positive: float
    label: str


@dataclass
class LstmWeights:
    W: np.ndarray  # (embed_dim, 4H)
    R: np.ndarray  # (H, 4H)
    b: np.ndarray  # (4H,)


@dataclass
class ChannelParams:
    embedding: np.ndarray  # (vocab, embed_dim)
    fwd: LstmWeights
    bwd: LstmWeights


@dataclass
class ModelParams:
    specs: list[ChannelSpec]
    channels: dict[str, ChannelParams]
    dense_w: np.ndarray
    dense_b: np.ndarray
    out_w: np.ndarray
    out_b: np.ndarray
    version: str = MODEL_VERSION

    def iter_tensors(self) -> Iterable[tuple[str, np.ndarray]]:
        for spec in self.specs:
            ch = self.channels[spec.name]
            yield f"{spec.name}.embedding", ch.embedding
            for direction, weights in (("fwd", ch.fwd), ("bwd", ch.bwd)):
                yield f"{spec.name}.{direction}.W", weights.W
                yield f"{spec.name}.{direction}.R", weights.R
                yield f"{spec.name}.{direction}.b", weights.b
        yield "dense.W", self.dense_w
        yield "dense.b", self.dense_b
        yield "out.W", self.out_w
        yield "out.b", self.out_b

    def copy(self) -> "ModelParams":
        return ModelParams(
            specs=[ChannelSpec(**asdict(s)) for s in self.specs],
            channels={
                name: ChannelParams(
                    embedding=ch.embedding.copy(),
                    fwd=LstmWeights(ch.fwd.W.copy(), ch.fwd.R.copy(), ch.fwd.b.copy()),
                    bwd=LstmWeights(ch.bwd.W.copy(), ch.bwd.R.copy(), ch.bwd.b.copy()),
                )
                for name, ch in self.channels.items()
            },
            dense_w=self.dense_w.copy(),
            dense_b=self.dense_b.copy(),
            out_w=self.out_w.copy(),
            out_b=self.out_b.copy(),
            version=self.version,
        )

    @property
    def dense_input_width(self) -> int:
        return sum(2 * s.hidden_dim for s in self.specs)


# --- vocabularies and encoding ----------------------------------------------


def channel_sequence(instance: Instance, channel: str) -> list[str]:
    """The raw token sequence an instance contributes to a channel."""
    if channel == CHANNEL_WORDS:
        return list(instance.sdp_tokens)
    if channel == CHANNEL_CLASSES:
        return list(instance.sdp_classes)
    if channel == CHANNEL_ONTO_CONCAT:
        return list(instance.left_chain) + list(instance.right_chain)
    if channel == CHANNEL_ONTO_COMMON:
        return list(instance.common_chain or [])
    raise ValueError(f"unknown channel {channel!r}")


def build_vocabularies(
    instances: Iterable[Instance],
    extra_words: Iterable[str] | None = None,
) -> dict[str, dict[str, int]]:
    """token -> index per channel; 0 pad, 1 oov, then first-occurrence order.

    `extra_words` (e.g. a pretrained-vector word list) extends the words
    channel after the corpus tokens.
    """
    vocabs: dict[str, dict[str, int]] = {
        name: {PAD_TOKEN: PAD_INDEX, OOV_TOKEN: OOV_INDEX} for name in CHANNEL_ORDER
    }
    materialized = list(instances)
    for name in CHANNEL_ORDER:
        vocab = vocabs[name]
        for instance in materialized:
            for token in channel_sequence(instance, name):
                if token not in vocab:
                    vocab[token] = len(vocab)
    if extra_words:
        vocab = vocabs[CHANNEL_WORDS]
        for word in extra_words:
            if word not in vocab:
                vocab[word] = len(vocab)
    return vocabs


def _truncate_sdp(seq: list[str], max_len: int) -> list[str]:
    # keep both endpoints, drop middle tokens
    if len(seq) <= max_len:
        return seq
    head = (max_len + 1) // 2
    tail = max_len - head
    return seq[:head] + (seq[len(seq) - tail:] if tail else [])


def _truncate_chain(chain: list[str], max_len: int) -> list[str]:
    # keep the specific end, drop root-side elements
    return chain[:max_len]


@dataclass
class EncodedDataset:
    ids: dict[str, np.ndarray]  # channel -> (N, T) int64
    labels: np.ndarray  # (N,), 1 positive / 0 negative / -1 unlabeled
    instance_ids: list[str]

    def __len__(self) -> int:
        return len(self.instance_ids)

    def subset(self, indices: np.ndarray) -> "EncodedDataset":
        return EncodedDataset(
            ids={name: arr[indices] for name, arr in self.ids.items()},
            labels=self.labels[indices],
            instance_ids=[self.instance_ids[i] for i in indices],
        )


LABEL_TO_INT = {"positive": 1, "negative": 0, "unlabeled": -1}
INT_TO_LABEL = {1: "positive", 0: "negative"}


class Encoder:
    """Maps instances to fixed-shape index matrices per channel."""

    def __init__(self, specs: list[ChannelSpec], vocabs: dict[str, dict[str, int]]):
        self.specs = specs
        self.vocabs = vocabs

    def _tokens(self, instance: Instance, spec: ChannelSpec) -> list[str]:
        if spec.name in (CHANNEL_WORDS, CHANNEL_CLASSES):
            return _truncate_sdp(channel_sequence(instance, spec.name), spec.max_len)
        if spec.name == CHANNEL_ONTO_CONCAT:
            side = spec.max_len // 2
            return _truncate_chain(list(instance.left_chain), side) + _truncate_chain(
                list(instance.right_chain), side
            )
        return _truncate_chain(channel_sequence(instance, spec.name), spec.max_len)

    def encode(self, instances: list[Instance]) -> EncodedDataset:
        n = len(instances)
        ids: dict[str, np.ndarray] = {}
        for spec in self.specs:
            vocab = self.vocabs[spec.name]
            matrix = np.full((n, spec.max_len), PAD_INDEX, dtype=np.int64)
            for row, instance in enumerate(instances):
                tokens = self._tokens(instance, spec)
                for col, token in enumerate(tokens[: spec.max_len]):
                    matrix[row, col] = vocab.get(token, OOV_INDEX)
            ids[spec.name] = matrix
        labels = np.array(
            [LABEL_TO_INT[i.label] for i in instances], dtype=np.int64
        ) if n else np.zeros(0, dtype=np.int64)
        return EncodedDataset(ids=ids, labels=labels,
                              instance_ids=[i.instance_id for i in instances])


# --- word vectors -------------------------------------------------------------


def load_word_vectors(
    stream: Iterable[str] | TextIO,
    vocab: dict[str, int],
    embed_dim: int,
    seed: int,
) -> np.ndarray:
    """Embedding matrix for the words channel from a text vector file.

    Rows for in-vocabulary words are copied; everything else keeps the
    seeded uniform initialization.  The padding row stays zero.  An optional
    "count dim" header is allowed; its dim must match.
    """
    rng = np.random.default_rng(seed)
    matrix = rng.uniform(-_INIT_SCALE, _INIT_SCALE, size=(len(vocab), embed_dim))
    matrix[PAD_INDEX] = 0.0
    first = True
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        parts = line.split()
        if first:
            first = False
            if len(parts) == 2:
                try:
                    _count, dim = int(parts[0]), int(parts[1])
                except ValueError:
                    dim = None
                if dim is not None:
                    if dim != embed_dim:
                        raise DimensionMismatch(
                            f"vector file dim {dim} vs configured dim {embed_dim}"
                        )
                    continue
        word, values = parts[0], parts[1:]
        try:
            vector = np.array([float(v) for v in values], dtype=np.float64)
        except ValueError as exc:
            raise MalformedVectorLine(f"line {lineno}: non-numeric component") from exc
        if vector.shape[0] != embed_dim:
            raise DimensionMismatch(
                f"line {lineno}: {vector.shape[0]} components vs configured dim {embed_dim}"
            )
        if word in vocab and vocab[word] != PAD_INDEX:
            matrix[vocab[word]] = vector
    return matrix


# --- parameters ---------------------------------------------------------------


def _init_lstm(rng: np.random.Generator, embed_dim: int, hidden: int) -> LstmWeights:
    W = rng.uniform(-_INIT_SCALE, _INIT_SCALE, size=(embed_dim, 4 * hidden))
    R = rng.uniform(-_INIT_SCALE, _INIT_SCALE, size=(hidden, 4 * hidden))
    b = rng.uniform(-_INIT_SCALE, _INIT_SCALE, size=(4 * hidden,))
    b[hidden:2 * hidden] = 1.0  # forget gate
    return LstmWeights(W=W, R=R, b=b)


def init_params(specs: list[ChannelSpec], dense_dim: int, seed: int) -> ModelParams:
    """Uniform [-0.08, 0.08] init from a seeded PCG64 generator; the padding
    embedding row is fixed to zeros and forget-gate biases to 1.0."""
    rng = np.random.default_rng(seed)
    channels: dict[str, ChannelParams] = {}
    for spec in specs:
        embedding = rng.uniform(
            -_INIT_SCALE, _INIT_SCALE, size=(spec.vocab_size, spec.embed_dim)
        )
        embedding[PAD_INDEX] = 0.0
        channels[spec.name] = ChannelParams(
            embedding=embedding,
            fwd=_init_lstm(rng, spec.embed_dim, spec.hidden_dim),
            bwd=_init_lstm(rng, spec.embed_dim, spec.hidden_dim),
        )
    width = sum(2 * s.hidden_dim for s in specs)
    dense_w = rng.uniform(-_INIT_SCALE, _INIT_SCALE, size=(width, dense_dim))
    dense_b = rng.uniform(-_INIT_SCALE, _INIT_SCALE, size=(dense_dim,))
    out_w = rng.uniform(-_INIT_SCALE, _INIT_SCALE, size=(dense_dim, 2))
    out_b = rng.uniform(-_INIT_SCALE, _INIT_SCALE, size=(2,))
    return ModelParams(
        specs=specs,
        channels=channels,
        dense_w=dense_w,
        dense_b=dense_b,
        out_w=out_w,
        out_b=out_b,
    )


# --- forward ------------------------------------------------------------------


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _lstm_run(X: np.ndarray, weights: LstmWeights) -> tuple[np.ndarray, list[dict]]:
    """Run the recurrence over (B, T, D) inputs; returns final h and a cache."""
    B, T, _ = X.shape
    H = weights.R.shape[0]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    cache: list[dict] = []
    for t in range(T):
        x = X[:, t, :]
        a = x @ weights.W + h @ weights.R + weights.b
        i = _sigmoid(a[:, 0 * H:1 * H])
        f = _sigmoid(a[:, 1 * H:2 * H])
        o = _sigmoid(a[:, 2 * H:3 * H])
        g = np.tanh(a[:, 3 * H:4 * H])
        c_next = f * c + i * g
        tanh_c = np.tanh(c_next)
        h_next = o * tanh_c
        cache.append(
            {"x": x, "i": i, "f": f, "o": o, "g": g,
             "c_prev": c, "h_prev": h, "tanh_c": tanh_c}
        )
        h, c = h_next, c_next
    return h, cache


def _lstm_backward(
    d_h_final: np.ndarray, cache: list[dict], weights: LstmWeights
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Backprop through time given the gradient at the final hidden state.

    Returns (dW, dR, db, dX) with dX shaped (B, T, D).
    """
    H = weights.R.shape[0]
    T = len(cache)
    B = d_h_final.shape[0]
    D = weights.W.shape[0]
    dW = np.zeros_like(weights.W)
    dR = np.zeros_like(weights.R)
    db = np.zeros_like(weights.b)
    dX = np.zeros((B, T, D))
    dh = d_h_final.copy()
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        step = cache[t]
        i, f, o, g = step["i"], step["f"], step["o"], step["g"]
        tanh_c = step["tanh_c"]
        do = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c ** 2)
        di = dc * g
        df = dc * step["c_prev"]
        dg = dc * i
        da = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                do * o * (1.0 - o),
                dg * (1.0 - g ** 2),
            ],
            axis=1,
        )
        dW += step["x"].T @ da
        dR += step["h_prev"].T @ da
        db += da.sum(axis=0)
        dX[:, t, :] = da @ weights.W.T
        dh = da @ weights.R.T
        dc = dc * f
    return dW, dR, db, dX


def _forward_cache(
    params: ModelParams,
    batch: dict[str, np.ndarray],
    dropout_mask: np.ndarray | None = None,
) -> tuple[np.ndarray, dict]:
    outputs: list[np.ndarray] = []
    channel_cache: dict[str, dict] = {}
    for spec in params.specs:
        if spec.name not in batch:
            raise ShapeMismatch(f"batch lacks channel {spec.name!r}")
        ids = batch[spec.name]
        if ids.ndim != 2 or ids.shape[1] != spec.max_len:
            raise ShapeMismatch(
                f"{spec.name}: expected (*, {spec.max_len}) ids, got {ids.shape}"
            )
        if ids.min(initial=0) < 0 or ids.max(initial=0) >= spec.vocab_size:
            raise ShapeMismatch(f"{spec.name}: token index out of range")
        ch = params.channels[spec.name]
        X = ch.embedding[ids]  # (B, T, D)
        X_rev = X[:, ::-1, :]
        h_fwd, cache_fwd = _lstm_run(X, ch.fwd)
        h_bwd, cache_bwd = _lstm_run(X_rev, ch.bwd)
        outputs.append(np.concatenate([h_fwd, h_bwd], axis=1))
        channel_cache[spec.name] = {
            "ids": ids, "fwd": cache_fwd, "bwd": cache_bwd
        }
    z = np.concatenate(outputs, axis=1)
    mask = dropout_mask if dropout_mask is not None else 1.0
    zd = z * mask
    dense_pre = zd @ params.dense_w + params.dense_b
    dense = np.tanh(dense_pre)
    logits = dense @ params.out_w + params.out_b
    probs = softmax(logits)
    cache = {
        "channels": channel_cache,
        "zd": zd,
        "mask": mask,
        "dense": dense,
        "probs": probs,
    }
    return probs, cache


def forward(
    params: ModelParams,
    batch: dict[str, np.ndarray],
    train_mode: bool = False,
    dropout_keep: float = 1.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Class probabilities, one row per batch item (rows sum to 1).

    Dropout (inverted scaling) is applied to the dense input only when
    train_mode and a generator is supplied.
    """
    mask = None
    if train_mode and rng is not None and dropout_keep < 1.0:
        width = params.dense_input_width
        n = next(iter(batch.values())).shape[0]
        mask = (rng.random((n, width)) < dropout_keep) / dropout_keep
    probs, _ = _forward_cache(params, batch, mask)
    return probs


# --- loss and gradients ---------------------------------------------------------


def loss(
    probs: np.ndarray, labels: np.ndarray, class_weight_positive: float = 1.0
) -> float:
    """Weighted cross-entropy: -mean(w_y * log p_y), log clamped at 1e-12."""
    weights = np.where(labels == 1, class_weight_positive, 1.0)
    p_true = probs[np.arange(len(labels)), labels]
    return float(-np.mean(weights * np.log(np.maximum(p_true, 1e-12))))


def gradients(
    params: ModelParams,
    batch: dict[str, np.ndarray],
    labels: np.ndarray,
    class_weight_positive: float = 1.0,
    dropout_mask: np.ndarray | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Analytic gradients of the weighted cross-entropy for one batch.

    Returns (loss value, tensor-name -> gradient) with names matching
    ModelParams.iter_tensors().  Pass no dropout mask when checking against
    finite differences.
    """
    probs, cache = _forward_cache(params, batch, dropout_mask)
    loss_value = loss(probs, labels, class_weight_positive)

    B = len(labels)
    weights = np.where(labels == 1, class_weight_positive, 1.0)
    dlogits = probs.copy()
    dlogits[np.arange(B), labels] -= 1.0
    dlogits *= (weights / B)[:, None]

    dense = cache["dense"]
    grads: dict[str, np.ndarray] = {}
    grads["out.W"] = dense.T @ dlogits
    grads["out.b"] = dlogits.sum(axis=0)
    ddense = dlogits @ params.out_w.T
    dpre = ddense * (1.0 - dense ** 2)
    grads["dense.W"] = cache["zd"].T @ dpre
    grads["dense.b"] = dpre.sum(axis=0)
    dz = (dpre @ params.dense_w.T) * cache["mask"]

    offset = 0
    for spec in params.specs:
        H = spec.hidden_dim
        ch = params.channels[spec.name]
        ch_cache = cache["channels"][spec.name]
        d_slice = dz[:, offset:offset + 2 * H]
        offset += 2 * H
        dW_f, dR_f, db_f, dX_f = _lstm_backward(d_slice[:, :H], ch_cache["fwd"], ch.fwd)
        dW_b, dR_b, db_b, dX_rev = _lstm_backward(d_slice[:, H:], ch_cache["bwd"], ch.bwd)
        dX = dX_f + dX_rev[:, ::-1, :]
        d_emb = np.zeros_like(ch.embedding)
        ids = ch_cache["ids"]
        np.add.at(d_emb, ids.ravel(), dX.reshape(-1, dX.shape[-1]))
        grads[f"{spec.name}.embedding"] = d_emb
        grads[f"{spec.name}.fwd.W"] = dW_f
        grads[f"{spec.name}.fwd.R"] = dR_f
        grads[f"{spec.name}.fwd.b"] = db_f
        grads[f"{spec.name}.bwd.W"] = dW_b
        grads[f"{spec.name}.bwd.R"] = dR_b
        grads[f"{spec.name}.bwd.b"] = db_b
    return loss_value, grads


# --- training and prediction ----------------------------------------------------


def _binary_f_score(pred_positive: np.ndarray, gold_positive: np.ndarray) -> float:
    tp = int(np.sum(pred_positive & gold_positive))
    fp = int(np.sum(pred_positive & ~gold_positive))
    fn = int(np.sum(~pred_positive & gold_positive))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def train(
    params: ModelParams,
    train_data: EncodedDataset,
    dev_data: EncodedDataset,
    config: TrainConfig,
) -> tuple[ModelParams, list[dict]]:
    """Plain mini-batch SGD; per-epoch seeded shuffle.

    History records per-epoch mean train loss and dev F-score.  Returns the
    parameters of the best dev-F epoch (ties: earliest; with no epochs, the
    initial parameters).  Raises NonFiniteLoss with the epoch index if a
    batch loss stops being finite.
    """
    if len(train_data) and (train_data.labels < 0).any():
        raise DataError("unlabeled instance in training data")
    rng = np.random.default_rng(config.seed)
    history: list[dict] = []
    best_params = params.copy()
    best_f = -1.0
    width = params.dense_input_width
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_data))
        batch_losses: list[float] = []
        for start in range(0, len(order), config.batch_size):
            indices = order[start:start + config.batch_size]
            sub = train_data.subset(indices)
            mask = None
            if config.dropout_keep < 1.0:
                mask = (
                    rng.random((len(indices), width)) < config.dropout_keep
                ) / config.dropout_keep
            batch_loss, grads = gradients(
                params, sub.ids, sub.labels, config.class_weight_positive, mask
            )
            if not np.isfinite(batch_loss):
                raise NonFiniteLoss(epoch)
            batch_losses.append(batch_loss)
            for name, tensor in params.iter_tensors():
                grad = grads[name]
                if name.endswith(".embedding"):
                    grad = grad.copy()
                    grad[PAD_INDEX] = 0.0  # padding row stays zero
                tensor -= config.learning_rate * grad
        train_loss = float(np.mean(batch_losses)) if batch_losses else 0.0
        if len(dev_data):
            probs = forward(params, dev_data.ids)
            dev_f = _binary_f_score(probs[:, 1] >= 0.5, dev_data.labels == 1)
        else:
            dev_f = 0.0
        history.append({"epoch": epoch, "train_loss": train_loss, "dev_f": dev_f})
        if dev_f > best_f:
            best_f = dev_f
            best_params = params.copy()
    return best_params, history


def predict(
    params: ModelParams, data: EncodedDataset, threshold: float = 0.5
) -> list[Prediction]:
    """Evaluation-mode predictions; label is positive iff prob >= threshold."""
    if not len(data):
        return []
    probs = forward(params, data.ids)
    out = []
    for iid, p in zip(data.instance_ids, probs[:, 1]):
        label = "positive" if p >= threshold else "negative"
        out.append(Prediction(instance_id=iid, prob_positive=float(p), label=label))
    return out


# --- serialization ----------------------------------------------------------------


def save_model(
    params: ModelParams, vocabs: dict[str, dict[str, int]], out: TextIO
) -> None:
    """JSON model file: {version, specs, vocabularies, tensors}; tensors are
    {shape, data} with flat row-major data."""
    payload = {
        "version": params.version,
        "specs": [asdict(s) for s in params.specs],
        "vocabularies": vocabs,
        "tensors": {
            name: {"shape": list(tensor.shape), "data": tensor.ravel().tolist()}
            for name, tensor in params.iter_tensors()
        },
    }
    json.dump(payload, out, ensure_ascii=False)
    out.write("\n")


def load_model(stream: TextIO) -> tuple[ModelParams, dict[str, dict[str, int]]]:
    payload = json.load(stream)
    version = payload.get("version")
    if version != MODEL_VERSION:
        raise DataError(f"unsupported model version {version!r}")
    specs = [ChannelSpec(**s) for s in payload["specs"]]
    tensors = payload["tensors"]

    def tensor(name: str) -> np.ndarray:
        entry = tensors.get(name)
        if entry is None:
            raise ShapeMismatch(f"model file lacks tensor {name!r}")
        try:
            return np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        except ValueError as exc:
            raise ShapeMismatch(f"tensor {name!r}: {exc}") from exc

    channels: dict[str, ChannelParams] = {}
    for spec in specs:
        embedding = tensor(f"{spec.name}.embedding")
        if embedding.shape != (spec.vocab_size, spec.embed_dim):
            raise ShapeMismatch(f"{spec.name}.embedding shape {embedding.shape}")
        channels[spec.name] = ChannelParams(
            embedding=embedding,
            fwd=LstmWeights(
                W=tensor(f"{spec.name}.fwd.W"),
                R=tensor(f"{spec.name}.fwd.R"),
                b=tensor(f"{spec.name}.fwd.b"),
            ),
            bwd=LstmWeights(
                W=tensor(f"{spec.name}.bwd.W"),
                R=tensor(f"{spec.name}.bwd.R"),
                b=tensor(f"{spec.name}.bwd.b"),
            ),
        )
    params = ModelParams(
        specs=specs,
        channels=channels,
        dense_w=tensor("dense.W"),
        dense_b=tensor("dense.b"),
        out_w=tensor("out.W"),
        out_b=tensor("out.b"),
        version=version,
    )
    vocabs = payload["vocabularies"]
    return params, vocabs
