"""Linear classifier with a frozen base weight and a trainable low-rank adapter."""

from dataclasses import dataclass

import numpy as np

from .params import ParamVector

P_MIN = 1e-12


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def nll_loss(probs, targets, p_min=P_MIN):
    """Mean negative log-likelihood of ``targets`` under row distributions ``probs``.

    Target probabilities are clipped at ``p_min`` so the loss stays finite.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    targets = np.atleast_1d(np.asarray(targets))
    if not np.allclose(probs.sum(axis=1), 1.0, rtol=0.0, atol=1e-9):
        raise ValueError("each row must sum to 1 within 1e-9")
    p = np.maximum(probs[np.arange(targets.size), targets], p_min)
    return float(np.mean(-np.log(p)))


@dataclass(frozen=True)
class ToyModel:
    """``softmax((W_base + A @ B.T) @ x)``.

    ``A`` is ``(C, r)`` and ``B`` is stored ``(F, r)`` so that every row of
    both factors spans the rank dimension. Only the adapter ever changes.
    """

    base: ParamVector
    adapter: ParamVector
    num_features: int
    num_classes: int
    rank: int

    @classmethod
    def init(cls, num_features, num_classes, rank=4, seed=0, base_scale=0.1, adapter_scale=None):
        rng = np.random.default_rng([seed, 17])
        w = base_scale * rng.standard_normal((num_classes, num_features))
        if adapter_scale is None:
            adapter_scale = 1.0 / np.sqrt(num_features)
        a = np.zeros((num_classes, rank))
        b = adapter_scale * rng.standard_normal((num_features, rank))
        base = ParamVector.from_arrays({"base.W": w})
        adapter = ParamVector.from_arrays({"adapter.A": a, "adapter.B": b})
        return cls(base, adapter, num_features, num_classes, rank)

    def factors(self, values=None):
        v = self.adapter.values if values is None else values
        c, f, r = self.num_classes, self.num_features, self.rank
        return v[: c * r].reshape(c, r), v[c * r :].reshape(f, r)

    def weight(self, values=None):
        a, b = self.factors(values)
        return self.base.values.reshape(self.num_classes, self.num_features) + a @ b.T

    def with_adapter(self, adapter):
        self.adapter.check_combinable(adapter)
        return ToyModel(self.base, adapter, self.num_features, self.num_classes, self.rank)

    def logits(self, x, values=None):
        return np.asarray(x, dtype=np.float64) @ self.weight(values).T

    def predict_proba(self, x, values=None):
        return softmax(self.logits(x, values))

    def predict(self, x):
        return np.argmax(self.logits(x), axis=1)

    def loss(self, x, y, values=None):
        z = self.logits(x, values)
        zmax = z.max(axis=1, keepdims=True)
        lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
        return float(np.mean(lse - z[np.arange(len(y)), y]))

    def loss_and_grad(self, x, y, values=None):
        """Mean NLL and its gradient with respect to the flat adapter values."""
        x = np.asarray(x, dtype=np.float64)
        a, b = self.factors(values)
        w = self.base.values.reshape(self.num_classes, self.num_features) + a @ b.T
        z = x @ w.T
        p = softmax(z)
        n = len(y)
        rows = np.arange(n)
        loss = float(np.mean(-np.log(np.maximum(p[rows, y], P_MIN))))
        g = p
        g[rows, y] -= 1.0
        g /= n
        dw = g.T @ x
        grad = np.concatenate([(dw @ b).ravel(), (dw.T @ a).ravel()])
        return loss, grad
