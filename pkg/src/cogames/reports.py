"""Grid and sweep reports shared by the CLI and the plotting helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .best_response import RegularizationParams, best_response, regularized_best_response
from .core import CardinalGame, ContextOrdinalGame
from .errors import ValidationError
from .metrics import classical_exploitability


@dataclass
class Landscape:
    coords: np.ndarray        # grid coordinates of the first action's probability
    values: np.ndarray        # (grid_n, grid_n, num_players); [i, j] is x_1 = coords[i], x_2 = coords[j]
    metric: str

    @property
    def worst(self) -> np.ndarray:
        return self.values.max(axis=2)

    def rows(self) -> list:
        out = []
        for i, a in enumerate(self.coords):
            for j, b in enumerate(self.coords):
                v = self.values[i, j]
                out.append([float(a), float(b), *map(float, v), float(v.max())])
        return out

    def header(self) -> list:
        n = self.values.shape[2]
        return ["x1", "x2"] + [f"eps_{k}" for k in range(n)] + ["eps_max"]


def grid_coords(grid_n: int) -> np.ndarray:
    if grid_n < 1:
        raise ValidationError("grid_n must be at least 1")
    if grid_n == 1:
        return np.array([0.5])
    return np.arange(grid_n) / (grid_n - 1)


def landscape(game, metric: str = "emd", rule="borda", params: RegularizationParams | None = None,
              grid_n: int = 21) -> Landscape:
    """Exploitability over the probabilities both players give their first action.

    ``metric`` is ``"classical"`` (needs a cardinal game) or ``"emd"`` (needs a COG).
    """
    counts = tuple(game.action_counts)
    if counts != (2, 2):
        raise ValidationError(f"landscapes need a 2x2 game, got action counts {counts}")
    if metric == "classical":
        if not isinstance(game, CardinalGame):
            raise ValidationError("classical exploitability needs cardinal payoffs")
        def cell(prof):
            return classical_exploitability(game, prof)[0]
    elif metric == "emd":
        if not isinstance(game, ContextOrdinalGame):
            raise ValidationError("EMD exploitability needs a context-ordinal game")
        # a player's response only depends on the opponent's coordinate, so cache it;
        # the result equals emd_exploitability cell by cell
        responses = {}

        def distance(player, own, other):
            key = (player, float(other[0]))
            if key not in responses:
                if params is None or params.is_identity():
                    responses[key] = best_response(game, player, [other], rule)
                else:
                    responses[key] = regularized_best_response(game, player, [other], rule, params)
            r = responses[key]
            if isinstance(r, np.ndarray):
                return float(0.5 * np.abs(r - own).sum())
            return r.distance(own)

        def cell(prof):
            return np.array([distance(0, prof[0], prof[1]), distance(1, prof[1], prof[0])])
    else:
        raise ValidationError(f"unknown landscape metric {metric!r}")
    coords = grid_coords(grid_n)
    values = np.empty((grid_n, grid_n, 2))
    for i, a in enumerate(coords):
        for j, b in enumerate(coords):
            values[i, j] = cell([np.array([a, 1 - a]), np.array([b, 1 - b])])
    return Landscape(coords, values, metric)


def rbr_sweep(cog: ContextOrdinalGame, player: int, x_minus_i, rule, p_values, q: float = 0.0,
              mu=None, num_samples: int = 1000, seed: int = 0) -> np.ndarray:
    """Regularized best response for each replacement probability; one row per ``p``."""
    rows = []
    for p in p_values:
        params = RegularizationParams(p=float(p), q=q, mu=mu, num_samples=num_samples, seed=seed)
        rows.append(regularized_best_response(cog, player, x_minus_i, rule, params))
    return np.array(rows)
