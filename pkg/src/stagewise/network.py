"""Minimal fully-connected softmax classifier with exact manual gradients.

Parameters live in one flat float64 vector plus shape metadata, so the
Fisher/importance trackers and the parameter-anchoring loss can treat the
model as a plain vector in R^P. Hidden layers use tanh; the output layer is
identity (logits). All gradients are reverse-mode and exact, verified against
central finite differences in the test suite.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import IntegrityError

CHECKPOINT_MAGIC = "stagewise-checkpoint-v1"


@dataclass(frozen=True)
class LayerShape:
    in_dim: int
    out_dim: int
    bias: bool = True

    @property
    def size(self) -> int:
        return self.in_dim * self.out_dim + (self.out_dim if self.bias else 0)


@dataclass
class ParamVector:
    """Flat parameter vector with the dense-layer layout needed to unpack it."""

    values: np.ndarray
    shapes: tuple[LayerShape, ...]
    rng_seed: int

    def __post_init__(self):
        expected = sum(s.size for s in self.shapes)
        if self.values.shape != (expected,):
            raise ValueError(
                f"flat vector has {self.values.shape} entries, layout needs {expected}"
            )

    @property
    def size(self) -> int:
        return self.values.size

    def layer_slices(self):
        """Yield (weight_view, bias_view) per layer; views into the flat vector."""
        offset = 0
        for s in self.shapes:
            w = self.values[offset : offset + s.in_dim * s.out_dim].reshape(
                s.in_dim, s.out_dim
            )
            offset += s.in_dim * s.out_dim
            b = self.values[offset : offset + s.out_dim] if s.bias else None
            offset += s.out_dim if s.bias else 0
            yield w, b

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), self.shapes, self.rng_seed)


@dataclass
class ForwardRecord:
    """Cached activations from one forward pass, consumed by backward()."""

    inputs: tuple          # per-layer input activations, each (B, in_dim)
    logits2d: np.ndarray   # (B, C)
    single: bool

    @property
    def logits(self) -> np.ndarray:
        return self.logits2d[0] if self.single else self.logits2d


def arch_shapes(arch) -> tuple[LayerShape, ...]:
    if len(arch) < 2:
        raise ValueError("architecture needs at least input and output sizes")
    if any(int(a) < 1 for a in arch):
        raise ValueError(f"zero-sized layer in architecture {arch!r}")
    return tuple(
        LayerShape(int(arch[i]), int(arch[i + 1])) for i in range(len(arch) - 1)
    )


def arch_of(params: ParamVector) -> list[int]:
    dims = [params.shapes[0].in_dim]
    dims.extend(s.out_dim for s in params.shapes)
    return dims


def init_params(arch, seed: int) -> ParamVector:
    """Uniform(-1/sqrt(in), 1/sqrt(in)) weights, zero biases, fixed by seed."""
    shapes = arch_shapes(arch)
    rng = np.random.default_rng(seed)
    parts = []
    for s in shapes:
        bound = 1.0 / np.sqrt(s.in_dim)
        parts.append(rng.uniform(-bound, bound, size=s.in_dim * s.out_dim))
        parts.append(np.zeros(s.out_dim))
    return ParamVector(np.concatenate(parts), shapes, rng_seed=int(seed))


def forward(params: ParamVector, x) -> ForwardRecord:
    """Run the affine/tanh stack; accepts one vector (d,) or a batch (B, d)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    a = x[None, :] if single else x
    if a.ndim != 2 or a.shape[1] != params.shapes[0].in_dim:
        raise ValueError(
            f"input dim {a.shape[-1] if a.ndim else '?'} does not match "
            f"network input {params.shapes[0].in_dim}"
        )
    inputs = []
    n_layers = len(params.shapes)
    for li, (w, b) in enumerate(params.layer_slices()):
        inputs.append(a)
        z = a @ w + b
        a = z if li == n_layers - 1 else np.tanh(z)
    return ForwardRecord(inputs=tuple(inputs), logits2d=a, single=single)


def softmax(logits) -> np.ndarray:
    """Max-subtracted softmax along the last axis; rejects NaN input."""
    z = np.asarray(logits, dtype=np.float64)
    if np.isnan(z).any():
        raise ValueError("softmax input contains NaN")
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if np.isnan(z).any():
        raise ValueError("log_softmax input contains NaN")
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _as_batch_dlogits(record: ForwardRecord, dloss_dlogits) -> np.ndarray:
    d = np.asarray(dloss_dlogits, dtype=np.float64)
    if record.single:
        if d.shape != record.logits2d[0].shape:
            raise ValueError(f"dlogits shape {d.shape} mismatches logits")
        return d[None, :]
    if d.shape != record.logits2d.shape:
        raise ValueError(f"dlogits shape {d.shape} mismatches logits {record.logits2d.shape}")
    return d


def backward(params: ParamVector, record: ForwardRecord, dloss_dlogits) -> ParamVector:
    """Exact reverse-mode gradient, summed over the batch dimension."""
    dz = _as_batch_dlogits(record, dloss_dlogits)
    weights = [w for w, _ in params.layer_slices()]
    grads_w = [None] * len(weights)
    grads_b = [None] * len(weights)
    for li in range(len(weights) - 1, -1, -1):
        a_prev = record.inputs[li]
        grads_w[li] = a_prev.T @ dz
        grads_b[li] = dz.sum(axis=0)
        if li > 0:
            da = dz @ weights[li].T
            dz = da * (1.0 - a_prev**2)
    flat = np.concatenate(
        [np.concatenate([gw.ravel(), gb]) for gw, gb in zip(grads_w, grads_b)]
    )
    return ParamVector(flat, params.shapes, rng_seed=params.rng_seed)


def instance_gradients(params: ParamVector, record: ForwardRecord, dloss_dlogits) -> np.ndarray:
    """Per-instance flat gradients, shape (B, P).

    Same recursion as backward() without the batch sum; used to feed the
    per-instance squared gradients of the Fisher estimator.
    """
    dz = _as_batch_dlogits(record, dloss_dlogits)
    weights = [w for w, _ in params.layer_slices()]
    per_layer = [None] * len(weights)
    for li in range(len(weights) - 1, -1, -1):
        a_prev = record.inputs[li]
        gw = np.einsum("bi,bo->bio", a_prev, dz)
        per_layer[li] = (gw, dz)
        if li > 0:
            da = dz @ weights[li].T
            dz = da * (1.0 - a_prev**2)
    batch = record.logits2d.shape[0]
    return np.concatenate(
        [np.concatenate([gw.reshape(batch, -1), gb], axis=1) for gw, gb in per_layer],
        axis=1,
    )


def save_checkpoint(params: ParamVector, path, class_count: int) -> None:
    """Versioned text checkpoint: header line, then one hex float per line."""
    arch = ":".join(str(d) for d in arch_of(params))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"{CHECKPOINT_MAGIC}\tarch={arch}\tC={class_count}\tseed={params.rng_seed}\n"
        )
        for v in params.values:
            fh.write(float(v).hex())
            fh.write("\n")


def load_checkpoint(path) -> tuple[ParamVector, int]:
    """Reload a checkpoint bit-exactly; structural damage raises IntegrityError."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise IntegrityError(f"{path}: empty checkpoint file")
    header = lines[0].split("\t")
    if header[0] != CHECKPOINT_MAGIC or len(header) != 4:
        raise IntegrityError(f"{path}: bad checkpoint header")
    try:
        fields = dict(part.split("=", 1) for part in header[1:])
        arch = [int(d) for d in fields["arch"].split(":")]
        class_count = int(fields["C"])
        seed = int(fields["seed"])
    except (KeyError, ValueError) as exc:
        raise IntegrityError(f"{path}: unparseable checkpoint header: {exc}") from None
    shapes = arch_shapes(arch)
    expected = sum(s.size for s in shapes)
    body = lines[1:]
    if len(body) != expected:
        raise IntegrityError(
            f"{path}: expected {expected} parameter lines, found {len(body)}"
        )
    try:
        values = np.array([float.fromhex(line) for line in body], dtype=np.float64)
    except ValueError:
        raise IntegrityError(f"{path}: corrupt parameter line") from None
    if arch[-1] != class_count:
        raise IntegrityError(f"{path}: output dim {arch[-1]} != C={class_count}")
    return ParamVector(values, shapes, rng_seed=seed), class_count


def params_digest(params: ParamVector) -> str:
    """Stable content hash used by tests and run summaries."""
    return hashlib.sha256(params.values.tobytes()).hexdigest()
