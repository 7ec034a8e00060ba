"""Adagrad with per-coordinate accumulated squared gradients.

Update: acc += g*g; theta -= lr * g / (sqrt(acc) + eps).  Parameters are
updated in place, so the dict passed in must hold the live arrays.
"""

from __future__ import annotations

import numpy as np


class Adagrad:
    def __init__(self, tensors: dict[str, np.ndarray], learning_rate: float, epsilon: float = 1e-8):
        self.tensors = tensors
        self.learning_rate = learning_rate
        self.epsilon = epsilon
        self.accum = {name: np.zeros_like(t) for name, t in tensors.items()}

    def step(self, grads: dict[str, np.ndarray]):
        for name, g in grads.items():
            acc = self.accum[name]
            acc += g * g
            self.tensors[name] -= self.learning_rate * g / (np.sqrt(acc) + self.epsilon)
