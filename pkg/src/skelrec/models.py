"""Classifier families over the autodiff core.

Three model kinds: a small vision transformer and a convolutional baseline,
both reading 25x25x3 pseudo-images, and the consensus MLP that merges the
per-arrangement posteriors. All parameters live in a flat name -> Tensor
dict so the optimizer, the gradient checker, and the checkpoint codec share
one view of a model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Adam,
    Tensor,
    add,
    broadcast_to,
    concat,
    conv2d,
    cross_entropy,
    dropout,
    gelu,
    index_select,
    layer_norm,
    matmul,
    maxpool2d,
    patchify,
    relu,
    reshape,
    softmax,
    transpose,
)
from .autodiff.checkpoint import load_checkpoint, save_checkpoint

# Seed-stream tags so weight init, dropout masks, and batch shuffling never
# share a generator.
_INIT_STREAM = 0
_DROPOUT_STREAM = 1
_SHUFFLE_STREAM = 2


@dataclass(frozen=True)
class VitConfig:
    image_size: int = 25
    channels: int = 3
    patch_size: int = 6
    embed_dim: int = 64
    num_blocks: int = 8
    num_heads: int = 4
    mlp_hidden: int = 128
    num_classes: int = 14
    dropout: float = 0.1

    def __post_init__(self):
        if self.image_size < 1 or self.patch_size < 1:
            raise ValueError("image_size and patch_size must be positive")
        if self.embed_dim % self.num_heads != 0:
            raise ValueError(
                f"embed_dim {self.embed_dim} not divisible by num_heads {self.num_heads}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.num_classes < 2:
            raise ValueError("need at least two classes")

    @property
    def padded_size(self) -> int:
        return math.ceil(self.image_size / self.patch_size) * self.patch_size

    @property
    def grid(self) -> int:
        return self.padded_size // self.patch_size

    @property
    def num_patches(self) -> int:
        return self.grid * self.grid

    @property
    def num_tokens(self) -> int:
        return self.num_patches + 1

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * self.channels

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.num_heads


@dataclass(frozen=True)
class CnnConfig:
    image_size: int = 25
    channels: int = 3
    conv1_filters: int = 32
    conv2_filters: int = 64
    kernel_size: int = 3
    dense1_units: int = 128
    dense2_units: int = 64
    dropout: float = 0.5
    num_classes: int = 14

    def __post_init__(self):
        if self.flat_dim < 1:
            raise ValueError(f"image_size {self.image_size} too small for two conv/pool stages")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")

    @property
    def flat_dim(self) -> int:
        side = self.image_size
        for _ in range(2):
            side = side - self.kernel_size + 1
            if side < 2:
                # conv output must leave at least one 2x2 pool window
                raise ValueError(f"image_size {self.image_size} too small for two conv/pool stages")
            side //= 2
        return side * side * self.conv2_filters


@dataclass(frozen=True)
class ConsensusConfig:
    num_classifiers: int
    num_classes: int = 14
    hidden: int = 512

    def __post_init__(self):
        if self.num_classifiers < 1:
            raise ValueError("consensus needs at least one classifier")
        if self.num_classes < 2 or self.hidden < 1:
            raise ValueError("bad consensus dimensions")

    @property
    def input_dim(self) -> int:
        return self.num_classifiers * self.num_classes


def _streams(seed: int) -> dict[int, np.random.Generator]:
    return {
        tag: np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(tag,)))
        for tag in (_INIT_STREAM, _DROPOUT_STREAM)
    }


def _trunc_normal(rng: np.random.Generator, shape, std: float, dtype) -> np.ndarray:
    """Normal(0, std) with draws beyond two sigmas redrawn."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return (out * std).astype(dtype)


def _fan_in_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    limit = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class _Model:
    """Shared plumbing: parameter dict, train/eval flag, checkpoints."""

    model_id = "model"

    def __init__(self, seed: int, dtype):
        self.seed = seed
        self.dtype = np.dtype(dtype)
        streams = _streams(seed)
        self._init_rng = streams[_INIT_STREAM]
        self._dropout_rng = streams[_DROPOUT_STREAM]
        self.training = False
        self.params: dict[str, Tensor] = {}

    def _param(self, name: str, data: np.ndarray) -> Tensor:
        t = Tensor(data, requires_grad=True)
        self.params[name] = t
        return t

    @property
    def param_count(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def state(self) -> dict[str, np.ndarray]:
        return {k: p.data for k, p in self.params.items()}

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        if set(arrays) != set(self.params):
            missing = set(self.params) - set(arrays)
            extra = set(arrays) - set(self.params)
            raise ValueError(f"state mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for k, arr in arrays.items():
            p = self.params[k]
            if arr.shape != p.data.shape:
                raise ValueError(f"shape mismatch for {k!r}: {arr.shape} vs {p.data.shape}")
            p.data = arr.astype(self.dtype)

    def save(self, path) -> None:
        save_checkpoint(path, self.model_id, self.state())

    def load(self, path) -> None:
        model_id, arrays = load_checkpoint(path)
        if model_id != self.model_id:
            raise ValueError(f"checkpoint holds {model_id!r}, expected {self.model_id!r}")
        self.load_state(arrays)

    def logits(self, inputs) -> Tensor:
        raise NotImplementedError

    def posteriors(self, inputs) -> Tensor:
        return softmax(self.logits(inputs), axis=-1)

    def predict_posteriors(self, inputs, batch_size: int = 256) -> np.ndarray:
        """Eval-mode posteriors for a full array, computed in chunks."""
        was_training = self.training
        self.training = False
        try:
            rows = [
                self.posteriors(inputs[i : i + batch_size]).data
                for i in range(0, len(inputs), batch_size)
            ]
        finally:
            self.training = was_training
        return np.concatenate(rows, axis=0) if rows else np.zeros((0,), dtype=self.dtype)

    def predict(self, inputs, batch_size: int = 256) -> np.ndarray:
        return self.predict_posteriors(inputs, batch_size).argmax(axis=1)


def _check_images(images: np.ndarray, size: int, channels: int) -> None:
    images = np.asarray(images)
    if images.dtype != np.uint8:
        raise ValueError(f"expected uint8 images, got {images.dtype}")
    if images.ndim != 4 or images.shape[1:] != (size, size, channels):
        raise ValueError(f"expected (B, {size}, {size}, {channels}) images, got {images.shape}")


class VitClassifier(_Model):
    """Pre-norm encoder-only transformer with a class-token readout.

    Images are scaled to [0, 1], zero-padded at the right/bottom edges up to
    a multiple of the patch size, cut into non-overlapping patches, and
    linearly embedded. A learned class token plus learned positional
    embeddings front the stack; the head maps the final class-token state to
    class logits.
    """

    model_id = "vit"

    def __init__(self, cfg: VitConfig, seed: int = 0, dtype=np.float32):
        super().__init__(seed, dtype)
        self.cfg = cfg
        rng, dt = self._init_rng, self.dtype
        d = cfg.embed_dim

        self._param("patch_embed.w", _trunc_normal(rng, (cfg.patch_dim, d), 0.02, dt))
        self._param("patch_embed.b", np.zeros(d, dtype=dt))
        self._param("cls_token", _trunc_normal(rng, (1, 1, d), 0.02, dt))
        self._param("pos_embed", _trunc_normal(rng, (1, cfg.num_tokens, d), 0.02, dt))
        for i in range(cfg.num_blocks):
            pre = f"block{i}."
            self._param(pre + "ln1.gamma", np.ones(d, dtype=dt))
            self._param(pre + "ln1.beta", np.zeros(d, dtype=dt))
            self._param(pre + "attn.qkv.w", _trunc_normal(rng, (d, 3 * d), 0.02, dt))
            self._param(pre + "attn.qkv.b", np.zeros(3 * d, dtype=dt))
            self._param(pre + "attn.out.w", _trunc_normal(rng, (d, d), 0.02, dt))
            self._param(pre + "attn.out.b", np.zeros(d, dtype=dt))
            self._param(pre + "ln2.gamma", np.ones(d, dtype=dt))
            self._param(pre + "ln2.beta", np.zeros(d, dtype=dt))
            self._param(pre + "mlp.fc1.w", _trunc_normal(rng, (d, cfg.mlp_hidden), 0.02, dt))
            self._param(pre + "mlp.fc1.b", np.zeros(cfg.mlp_hidden, dtype=dt))
            self._param(pre + "mlp.fc2.w", _trunc_normal(rng, (cfg.mlp_hidden, d), 0.02, dt))
            self._param(pre + "mlp.fc2.b", np.zeros(d, dtype=dt))
        self._param("ln_f.gamma", np.ones(d, dtype=dt))
        self._param("ln_f.beta", np.zeros(d, dtype=dt))
        self._param("head.w", _trunc_normal(rng, (d, cfg.num_classes), 0.02, dt))
        self._param("head.b", np.zeros(cfg.num_classes, dtype=dt))

    def preprocess(self, images: np.ndarray) -> np.ndarray:
        """uint8 (B, S, S, C) -> float patch rows (B, num_patches, patch_dim)."""
        cfg = self.cfg
        _check_images(images, cfg.image_size, cfg.channels)
        x = images.astype(self.dtype) / np.asarray(255.0, dtype=self.dtype)
        padded = np.zeros((len(images), cfg.padded_size, cfg.padded_size, cfg.channels), self.dtype)
        padded[:, : cfg.image_size, : cfg.image_size, :] = x
        p, g = cfg.patch_size, cfg.grid
        return (
            padded.reshape(len(images), g, p, g, p, cfg.channels)
            .transpose(0, 1, 3, 2, 4, 5)
            .reshape(len(images), cfg.num_patches, cfg.patch_dim)
        )

    def embed(self, patches: np.ndarray) -> Tensor:
        """Patch rows -> token sequence (B, num_tokens, embed_dim)."""
        B = patches.shape[0]
        x = matmul(Tensor(patches), self.params["patch_embed.w"])
        x = add(x, self.params["patch_embed.b"])
        cls = broadcast_to(self.params["cls_token"], (B, 1, self.cfg.embed_dim))
        x = concat([cls, x], axis=1)
        return add(x, self.params["pos_embed"])

    def _attention(self, x: Tensor, i: int) -> Tensor:
        cfg = self.cfg
        B, N = x.data.shape[0], cfg.num_tokens
        nh, dh = cfg.num_heads, cfg.head_dim
        pre = f"block{i}."
        h = layer_norm(x, self.params[pre + "ln1.gamma"], self.params[pre + "ln1.beta"])
        qkv = add(matmul(h, self.params[pre + "attn.qkv.w"]), self.params[pre + "attn.qkv.b"])
        qkv = transpose(reshape(qkv, (B, N, 3, nh, dh)), (2, 0, 3, 1, 4))
        q = index_select(qkv, 0, axis=0)
        k = index_select(qkv, 1, axis=0)
        v = index_select(qkv, 2, axis=0)
        scores = matmul(q, transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(dh))
        ctx = matmul(softmax(scores, axis=-1), v)
        ctx = reshape(transpose(ctx, (0, 2, 1, 3)), (B, N, nh * dh))
        out = add(matmul(ctx, self.params[pre + "attn.out.w"]), self.params[pre + "attn.out.b"])
        return dropout(out, cfg.dropout, self._dropout_rng, self.training)

    def _mlp(self, x: Tensor, i: int) -> Tensor:
        cfg = self.cfg
        pre = f"block{i}."
        h = layer_norm(x, self.params[pre + "ln2.gamma"], self.params[pre + "ln2.beta"])
        h = gelu(add(matmul(h, self.params[pre + "mlp.fc1.w"]), self.params[pre + "mlp.fc1.b"]))
        h = dropout(h, cfg.dropout, self._dropout_rng, self.training)
        h = add(matmul(h, self.params[pre + "mlp.fc2.w"]), self.params[pre + "mlp.fc2.b"])
        return dropout(h, cfg.dropout, self._dropout_rng, self.training)

    def encode(self, tokens: Tensor) -> Tensor:
        """Token sequence -> final class-token features (B, embed_dim)."""
        x = tokens
        for i in range(self.cfg.num_blocks):
            x = add(x, self._attention(x, i))
            x = add(x, self._mlp(x, i))
        x = layer_norm(x, self.params["ln_f.gamma"], self.params["ln_f.beta"])
        return index_select(x, 0, axis=1)

    def logits(self, images: np.ndarray) -> Tensor:
        feats = self.encode(self.embed(self.preprocess(images)))
        return add(matmul(feats, self.params["head.w"]), self.params["head.b"])


class CnnClassifier(_Model):
    """Two conv/pool stages, two dense layers, dropout, and a class head."""

    model_id = "cnn"

    def __init__(self, cfg: CnnConfig, seed: int = 0, dtype=np.float32):
        super().__init__(seed, dtype)
        self.cfg = cfg
        rng, dt, k = self._init_rng, self.dtype, cfg.kernel_size

        def conv(name, cin, cout):
            self._param(name + ".w", _fan_in_uniform(rng, (k, k, cin, cout), k * k * cin, dt))
            self._param(name + ".b", np.zeros(cout, dtype=dt))

        def dense(name, fin, fout):
            self._param(name + ".w", _fan_in_uniform(rng, (fin, fout), fin, dt))
            self._param(name + ".b", np.zeros(fout, dtype=dt))

        conv("conv1", cfg.channels, cfg.conv1_filters)
        conv("conv2", cfg.conv1_filters, cfg.conv2_filters)
        dense("fc1", cfg.flat_dim, cfg.dense1_units)
        dense("fc2", cfg.dense1_units, cfg.dense2_units)
        dense("head", cfg.dense2_units, cfg.num_classes)

    def logits(self, images: np.ndarray) -> Tensor:
        cfg = self.cfg
        _check_images(images, cfg.image_size, cfg.channels)
        x = Tensor(images.astype(self.dtype) / np.asarray(255.0, dtype=self.dtype))
        x = maxpool2d(relu(conv2d(x, self.params["conv1.w"], self.params["conv1.b"])))
        x = maxpool2d(relu(conv2d(x, self.params["conv2.w"], self.params["conv2.b"])))
        x = reshape(x, (x.data.shape[0], cfg.flat_dim))
        x = relu(add(matmul(x, self.params["fc1.w"]), self.params["fc1.b"]))
        x = relu(add(matmul(x, self.params["fc2.w"]), self.params["fc2.b"]))
        x = dropout(x, cfg.dropout, self._dropout_rng, self.training)
        return add(matmul(x, self.params["head.w"]), self.params["head.b"])


class ConsensusMlp(_Model):
    """Merges concatenated per-classifier posteriors into one prediction.

    Input rows are the L posterior vectors laid side by side (classifier 0
    first), so the input width is L * num_classes; one hidden ReLU layer of
    512 units feeds the class head.
    """

    model_id = "consensus"

    def __init__(self, cfg: ConsensusConfig, seed: int = 0, dtype=np.float32):
        super().__init__(seed, dtype)
        self.cfg = cfg
        rng, dt = self._init_rng, self.dtype
        self._param("fc1.w", _fan_in_uniform(rng, (cfg.input_dim, cfg.hidden), cfg.input_dim, dt))
        self._param("fc1.b", np.zeros(cfg.hidden, dtype=dt))
        self._param("head.w", _fan_in_uniform(rng, (cfg.hidden, cfg.num_classes), cfg.hidden, dt))
        self._param("head.b", np.zeros(cfg.num_classes, dtype=dt))

    def logits(self, features: np.ndarray) -> Tensor:
        features = np.asarray(features)
        if features.ndim != 2 or features.shape[1] != self.cfg.input_dim:
            raise ValueError(f"expected (B, {self.cfg.input_dim}) features, got {features.shape}")
        x = Tensor(features.astype(self.dtype))
        x = relu(add(matmul(x, self.params["fc1.w"]), self.params["fc1.b"]))
        return add(matmul(x, self.params["head.w"]), self.params["head.b"])


def stack_posteriors(per_classifier: list[np.ndarray]) -> np.ndarray:
    """Concatenate L posterior matrices (n, c) into consensus rows (n, L*c)."""
    if not per_classifier:
        raise ValueError("no posteriors to stack")
    n = per_classifier[0].shape[0]
    for p in per_classifier:
        if p.shape[0] != n:
            raise ValueError("posterior matrices disagree on sample count")
    return np.concatenate(per_classifier, axis=1)


def fit(
    model: _Model,
    inputs: np.ndarray,
    labels: np.ndarray,
    epochs: int,
    lr: float = 1e-3,
    batch_size: int = 64,
    shuffle_seed: int = 0,
) -> list[float]:
    """Minibatch Adam training on cross-entropy; returns per-epoch mean loss.

    Zero epochs is legal and leaves the freshly initialised model untouched.
    An empty training set is a contract error.
    """
    labels = np.asarray(labels)
    n = len(labels)
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    if len(inputs) != n:
        raise ValueError(f"inputs ({len(inputs)}) and labels ({n}) disagree")
    if epochs < 0:
        raise ValueError("epochs must be >= 0")

    opt = Adam(model.params, lr=lr)
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=shuffle_seed, spawn_key=(_SHUFFLE_STREAM,))
    )
    curve: list[float] = []
    model.training = True
    try:
        for _ in range(epochs):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, batch_size):
                idx = order[start : start + batch_size]
                loss = cross_entropy(model.logits(inputs[idx]), labels[idx])
                opt.zero_grad()
                loss.backward()
                opt.step()
                total += float(loss.data) * len(idx)
            curve.append(total / n)
    finally:
        model.training = False
    return curve
