"""Small reference instances.

``repeated_game`` and ``controlled_chain`` are approachable toward the
nonpositive orthant; ``constant_reward`` is not.
"""

from __future__ import annotations

import numpy as np

from .game_model import GameModel
from .geometry import Box


def nonpositive_orthant(dim: int = 2) -> Box:
    return Box(np.full(dim, -np.inf), np.zeros(dim))


def repeated_game() -> GameModel:
    """Single-state 2x2 game: action 0 pays (-1, -1); action 1 pays (1, 1) or (-2, 2)."""
    reward = np.array([[[[-1.0, -1.0], [-1.0, -1.0]], [[1.0, 1.0], [-2.0, 2.0]]]])
    return GameModel(np.ones((1, 2, 2, 1)), reward)


def controlled_chain() -> GameModel:
    """Two states, 2x2 actions, strictly positive kernel.

    Action 0 is cautious: its rewards leave one coordinate slightly positive
    in each state, but the adversary cannot hold the chain in either state
    long enough to push the average out of the orthant.  Action 1 pays
    large rewards on one coordinate.
    """
    to_first = np.array(
        [
            [[0.5, 0.6], [0.7, 0.2]],  # from state 0: (up, ua)
            [[0.5, 0.4], [0.3, 0.8]],  # from state 1
        ]
    )
    kernel = np.stack([to_first, 1.0 - to_first], axis=-1)
    reward = np.array(
        [
            [[[-1.0, 0.3], [-0.8, 0.1]], [[1.0, 1.0], [-1.5, 1.5]]],
            [[[0.3, -1.0], [0.1, -0.8]], [[1.5, -1.5], [1.0, 1.0]]],
        ]
    )
    return GameModel(kernel, reward)


def constant_reward(value=(1.0, 1.0)) -> GameModel:
    """Every step pays the same vector; the orthant is out of reach."""
    reward = np.broadcast_to(np.asarray(value, dtype=float), (1, 2, 2, len(value)))
    return GameModel(np.ones((1, 2, 2, 1)), reward)


def random_model(
    rng: np.random.Generator, n_states: int, n_player: int, n_adversary: int, dim: int = 2,
    concentration: float = 1.0,
) -> GameModel:
    """Strictly positive Dirichlet kernel with Gaussian rewards."""
    kernel = rng.dirichlet(np.full(n_states, concentration), size=(n_states, n_player, n_adversary))
    kernel = np.maximum(kernel, 1e-3)
    kernel /= kernel.sum(axis=-1, keepdims=True)
    reward = rng.normal(size=(n_states, n_player, n_adversary, dim))
    return GameModel(kernel, reward)
