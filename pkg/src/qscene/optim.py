"""Adam with bias correction, usable on arrays of any shape."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ContractError, NumericalError


@dataclass
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)

    @classmethod
    def like(cls, params, **hyper) -> "AdamState":
        params = np.asarray(params, dtype=float)
        return cls(m=np.zeros_like(params), v=np.zeros_like(params), **hyper)


def adam_step(state: AdamState, params, grads):
    """One Adam update. Returns ``(new_state, new_params)``; inputs are not mutated."""
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape:
        raise ContractError(f"params {params.shape} and grads {grads.shape} differ in shape")
    m = np.zeros_like(params) if state.m is None else state.m
    v = np.zeros_like(params) if state.v is None else state.v
    if m.shape != params.shape or v.shape != params.shape:
        raise ContractError("Adam moments do not match the parameter shape")
    bad = ~np.isfinite(grads)
    if bad.any():
        idx = np.unravel_index(int(np.argmax(bad)), grads.shape)
        raise NumericalError(f"non-finite gradient at parameter index {idx if len(idx) > 1 else idx[0]}")

    t = state.step + 1
    m = state.beta1 * m + (1.0 - state.beta1) * grads
    v = state.beta2 * v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(state.lr, state.beta1, state.beta2, state.eps, t, m, v)
    return new_state, new_params
