"""Adam optimizer over a ParamStore."""

import numpy as np

from .errors import ConfigError


class AdamState:
    """First/second moment accumulators plus the step counter."""

    def __init__(self, store, lr=0.001, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.epsilon = float(epsilon)
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in store.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in store.items()}

    def export_arrays(self, prefix):
        """Flatten moments (and step/lr) into {name: ndarray} for checkpoints."""
        out = {f"{prefix}meta": np.array([self.t, self.lr], dtype=np.float32)}
        for name, arr in self.m.items():
            out[f"{prefix}m.{name}"] = arr
        for name, arr in self.v.items():
            out[f"{prefix}v.{name}"] = arr
        return out


def adam_step(store, state):
    """Apply one bias-corrected Adam update; zero all grads afterwards."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** state.t
    bias2 = 1.0 - b2 ** state.t
    # effective step folds both bias corrections into one scalar
    step = state.lr * np.sqrt(bias2) / bias1
    eps = state.epsilon * np.sqrt(bias2)
    for name, p in store.items():
        g = p.grad
        if g is None:
            raise ConfigError(f"adam_step: parameter {name!r} has no gradient")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        g *= g  # grad buffer is reused as scratch and zeroed below
        g *= 1.0 - b2
        v += g
        denom = np.sqrt(v)
        denom += eps
        np.divide(m, denom, out=denom)
        denom *= step
        p.data -= denom
        p.grad[...] = 0.0
