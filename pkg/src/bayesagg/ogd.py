"""Online Gradient Descent over a Euclidean ball with a fixed step size.

The step size 2W / (Z sqrt(T)) assumes the horizon T is known up front;
a doubling-trick wrapper is available for unknown horizons but nothing
in the package turns it on by default.
"""

import math
from dataclasses import dataclass, replace

import numpy as np


def project_ball(z, W):
    """Euclidean projection onto the ball of radius W: W * z / max(||z||, W).

    Interior points are returned unchanged (exact fixed point); the
    rescale loop guards against the rounded result landing a hair outside
    the ball, which makes the projection exactly idempotent.
    """
    z = np.asarray(z, dtype=float)
    norm = float(np.linalg.norm(z))
    if norm <= W:
        return z
    out = z * (W / norm)
    norm = float(np.linalg.norm(out))
    while norm > W:
        out = out * (W / norm)
        norm = float(np.linalg.norm(out))
    return out


@dataclass(frozen=True)
class OgdState:
    """One learner's state: hypothesis, ball radius, step size, round count.

    States are values; ogd_step returns a new one.  z_bound is the gradient
    norm the step size was tuned for; gradients exceeding it are rescaled
    defensively and counted in clipped_gradients.
    """

    h: np.ndarray
    W: float
    eta: float
    t: int = 0
    z_bound: float = math.inf
    clipped_gradients: int = 0


def ogd_init(n, W, Z, T):
    """Zero-initialized state with step size sqrt(4 W^2 / (Z^2 T))."""
    if W <= 0 or Z <= 0 or T <= 0:
        raise ValueError("W, Z, T must all be positive")
    eta = 2.0 * W / (Z * math.sqrt(T))
    return OgdState(h=np.zeros(n), W=W, eta=eta, z_bound=Z)

def ogd_step(state, gradient):
    """One projected gradient step; the input state is left unmodified."""
    gradient = np.asarray(gradient, dtype=float)
    clipped = state.clipped_gradients
    norm = float(np.linalg.norm(gradient))
    if norm > state.z_bound:
        gradient = gradient * (state.z_bound / norm)
        clipped += 1
    h = project_ball(state.h - state.eta * gradient, state.W)
    return replace(state, h=h, t=state.t + 1, clipped_gradients=clipped)


class DoublingOgd:
    """Horizon-free wrapper: restarts OGD on epochs of doubling length.

    Off by default everywhere; provided for callers that cannot commit to
    a horizon.
    """

    def __init__(self, n, W, Z):
        self.n = n
        self.W = W
        self.Z = Z
        self.epoch_length = 1
        self.epoch_used = 0
        self.state = ogd_init(n, W, Z, 1)

    @property
    def h(self):
        return self.state.h

    def step(self, gradient):
        self.state = ogd_step(self.state, gradient)
        self.epoch_used += 1
        if self.epoch_used >= self.epoch_length:
            self.epoch_length *= 2
            self.epoch_used = 0
            self.state = ogd_init(self.n, self.W, self.Z, self.epoch_length)
