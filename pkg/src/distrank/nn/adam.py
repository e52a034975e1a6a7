"""Adam optimizer with bias correction.

    m <- b1*m + (1-b1)*g          mhat = m / (1 - b1^t)
    v <- b2*v + (1-b2)*g^2        vhat = v / (1 - b2^t)
    p <- p - lr * mhat / (sqrt(vhat) + eps)

Moments are kept per parameter tensor in the model's dtype; the step is a
pure function returning fresh tensors and a fresh state, so trajectories are
reproducible and a state can be checkpointed mid-run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams

__all__ = ["AdamState", "init_adam", "adam_step"]


@dataclass(frozen=True)
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict, repr=False)
    v: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"step count must be >= 0, got {self.t}")
        if set(self.m) != set(self.v):
            raise ValueError("first/second moment accumulators disagree on parameter names")


def init_adam(params: ModelParams, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    zeros = {name: np.zeros_like(t) for name, t in params.tensors.items()}
    return AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps, t=0,
                     m=zeros, v={name: z.copy() for name, z in zeros.items()})


def adam_step(params: ModelParams, grads: dict, state: AdamState):
    """One update; returns (new ModelParams, new AdamState) with t advanced."""
    if set(grads) != set(params.tensors):
        raise ValueError("gradient names do not match parameter names")
    if state.m and set(state.m) != set(params.tensors):
        raise ValueError("optimizer state does not match parameter names")
    t = state.t + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    new_t, new_m, new_v = {}, {}, {}
    for name, p in params.tensors.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        m_prev = state.m.get(name, np.zeros_like(p))
        v_prev = state.v.get(name, np.zeros_like(p))
        m = state.beta1 * m_prev + (1.0 - state.beta1) * g
        v = state.beta2 * v_prev + (1.0 - state.beta2) * (g * g)
        update = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        new_t[name] = (p - update).astype(p.dtype, copy=False)
        new_m[name] = m.astype(p.dtype, copy=False)
        new_v[name] = v.astype(p.dtype, copy=False)
    return (
        ModelParams(params.config, new_t),
        AdamState(lr=state.lr, beta1=state.beta1, beta2=state.beta2, eps=state.eps,
                  t=t, m=new_m, v=new_v),
    )
