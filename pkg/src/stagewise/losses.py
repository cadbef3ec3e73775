"""The three training-loss terms and their exact gradients.

Total objective per step: ``new + cr + lambda * mr``.

* ``new`` -- class-balanced cross-entropy, weighting class i by
  (1 - gamma) / (1 - gamma**n_i) where n_i is the class's count in the
  current stage (the effective-number-of-samples weighting).
* ``cr`` -- mean squared L2 distance between the current and the frozen
  previous model's softmax outputs restricted to the previous stages'
  classes; gradient flows only into the current model.
* ``mr`` -- quadratic pull of the parameters toward the previous stage's,
  weighted per coordinate by accumulated Fisher plus importance, averaged
  over the parameter count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .network import ParamVector, log_softmax, softmax


@dataclass
class LossBundle:
    value: float
    dlogits: np.ndarray | None = None
    dparams: np.ndarray | None = None


def cb_weights(counts, gamma: float) -> dict:
    """Effective-number weights (1-gamma)/(1-gamma**n) for present classes."""
    if not 0.0 <= gamma < 1.0:
        raise ConfigError(f"gamma must lie in [0, 1), got {gamma}")
    weights = {}
    for cls, n in counts.items():
        if n < 1:
            raise ValueError(f"class {cls!r} has nonpositive count {n}")
        if gamma == 0.0:
            weights[cls] = 1.0
        else:
            weights[cls] = (1.0 - gamma) / (1.0 - gamma**n)
    return weights


def _onehot(index: int, width: int) -> np.ndarray:
    v = np.zeros(width)
    v[index] = 1.0
    return v


def cb_loss(logits, target: int, weights) -> LossBundle:
    """Weighted negative log-softmax of the target class, single instance."""
    logits = np.asarray(logits, dtype=np.float64)
    w = weights.get(target, 0.0)
    if w <= 0.0:
        raise ValueError(
            f"target class {target!r} carries zero class-balance weight "
            "(class absent from the current stage)"
        )
    logp = log_softmax(logits)
    value = w * (-logp[target])
    dlogits = w * (softmax(logits) - _onehot(target, logits.size))
    return LossBundle(value=float(value), dlogits=dlogits)


def cb_loss_batch(logits, targets, weights) -> LossBundle:
    """Mean weighted cross-entropy over a batch; dlogits has shape (B, C)."""
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    batch = logits.shape[0]
    if targets.shape != (batch,):
        raise ValueError("one target per batch row required")
    w = np.array([weights.get(int(t), 0.0) for t in targets])
    if (w <= 0.0).any():
        bad = int(targets[int(np.argmin(w))])
        raise ValueError(
            f"target class {bad!r} carries zero class-balance weight "
            "(class absent from the current stage)"
        )
    logp = log_softmax(logits)
    value = float(np.mean(w * -logp[np.arange(batch), targets]))
    grad = softmax(logits)
    grad[np.arange(batch), targets] -= 1.0
    grad *= (w / batch)[:, None]
    return LossBundle(value=value, dlogits=grad)


def cr_loss(
    new_logits_batch,
    old_logits_batch,
    old_class_ids,
    restrict_softmax: bool = True,
) -> LossBundle:
    """Squared-L2 output distillation over the previous stages' classes.

    Both logit batches are restricted to ``old_class_ids``; by default each
    restricted vector is renormalized with its own softmax so the two
    operands are distributions over the compared support. The value is the
    per-instance sum of squared differences, averaged over the batch; the
    gradient flows only into the new model's logits.
    """
    new = np.atleast_2d(np.asarray(new_logits_batch, dtype=np.float64))
    old = np.atleast_2d(np.asarray(old_logits_batch, dtype=np.float64))
    if new.shape != old.shape:
        raise ValueError(f"batch shape mismatch: {new.shape} vs {old.shape}")
    if new.shape[0] < 1:
        raise ValueError("empty batch")
    ids = np.asarray(list(old_class_ids), dtype=np.int64)
    if ids.size == 0:
        raise ValueError("no previous-stage classes: distillation undefined at stage 1")

    batch = new.shape[0]
    dlogits = np.zeros_like(new)
    if restrict_softmax:
        p = softmax(new[:, ids])
        q = softmax(old[:, ids])
        diff = p - q
        value = float((diff**2).sum() / batch)
        g = (2.0 / batch) * diff
        dsub = p * (g - (g * p).sum(axis=1, keepdims=True))
        dlogits[:, ids] = dsub
    else:
        p = softmax(new)
        q = softmax(old)
        diff = p[:, ids] - q[:, ids]
        value = float((diff**2).sum() / batch)
        g_full = np.zeros_like(p)
        g_full[:, ids] = (2.0 / batch) * diff
        dlogits[:] = p * (g_full - (g_full * p).sum(axis=1, keepdims=True))
    return LossBundle(value=value, dlogits=dlogits)


def _flat(vec) -> np.ndarray:
    if isinstance(vec, ParamVector):
        return vec.values
    return np.asarray(vec, dtype=np.float64)


def mr_loss(params, prev_params, fisher_prev, omega_prev) -> LossBundle:
    """Per-parameter quadratic anchor: sum_i (F_i + O_i) (dtheta_i)^2 / P."""
    theta = _flat(params)
    theta_prev = _flat(prev_params)
    fisher = _flat(fisher_prev)
    omega = _flat(omega_prev)
    n = theta.size
    for name, v in (("prev_params", theta_prev), ("fisher", fisher), ("omega", omega)):
        if v.size != n:
            raise ValueError(f"{name} has length {v.size}, expected {n}")
    if (fisher < 0).any() or (omega < 0).any():
        raise ValueError("negative Fisher or importance entries: tracker state corrupt")
    delta = theta - theta_prev
    coeff = fisher + omega
    value = float(np.sum(coeff * delta**2) / n)
    dparams = 2.0 * coeff * delta / n
    return LossBundle(value=value, dparams=dparams)


def total_loss(new: LossBundle, cr: LossBundle | None, mr: LossBundle | None, lam: float) -> LossBundle:
    """Linear combination new + cr + lam * mr (evaluated in that order)."""
    if lam < 0:
        raise ConfigError(f"lambda must be nonnegative, got {lam}")
    value = new.value
    dlogits = None if new.dlogits is None else new.dlogits.copy()
    if cr is not None:
        value = value + cr.value
        if cr.dlogits is not None:
            if dlogits is None:
                dlogits = cr.dlogits.copy()
            elif dlogits.shape != cr.dlogits.shape:
                raise ValueError(
                    f"dlogits shape mismatch: {dlogits.shape} vs {cr.dlogits.shape}"
                )
            else:
                dlogits = dlogits + cr.dlogits
    dparams = None
    if mr is not None:
        value = value + lam * mr.value
        if mr.dparams is not None:
            dparams = lam * mr.dparams
    return LossBundle(value=float(value), dlogits=dlogits, dparams=dparams)
