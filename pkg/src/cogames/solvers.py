"""Equilibrium learning: regularized FTRL, fictitious play and logit homotopy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import softmax

from .best_response import RegularizationParams, best_response, regularized_best_response
from .core import CardinalGame, ContextOrdinalGame, as_strategy, uniform
from .errors import SolverError, ValidationError
from .voting import get_rule, winner_mask


@dataclass
class Trajectory:
    """Learning history.

    ``averages[t]`` is the running uniform average of rounds ``0..t`` (round 0 is the
    initial strategy), ``iterates[t]`` the strategy actually played at round ``t``.
    Both lists therefore hold ``T + 1`` profiles.
    """

    averages: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    averaging: str = "average"

    @property
    def num_rounds(self) -> int:
        return len(self.iterates) - 1

    @property
    def final(self) -> list:
        return self.averages[-1] if self.averaging == "average" else self.iterates[-1]


@dataclass(frozen=True)
class SolverConfig:
    """Settings shared by the learning dynamics.

    ``rules`` is one rule id or one per player; ``schedule`` is ``"one_over_t"``
    (p_t = 1/(t+1)) or ``"constant:<p>"``.
    """

    rules: tuple | str = "borda"
    T: int = 100
    q: float = 0.1
    mu: tuple | None = None
    num_samples: int = 100
    seed: int = 0
    averaging: str = "average"
    schedule: str = "one_over_t"

    def __post_init__(self):
        if self.T < 1:
            raise ValidationError("T must be at least 1")
        if self.averaging not in ("average", "last"):
            raise ValidationError("averaging must be 'average' or 'last'")
        self.p_at(1)

    def rule_for(self, player: int):
        if isinstance(self.rules, str):
            return get_rule(self.rules)
        return get_rule(self.rules[player])

    def mu_for(self, player: int, m: int) -> np.ndarray:
        if self.mu is None or self.mu[player] is None:
            return uniform(m)
        return as_strategy(self.mu[player], m)

    def p_at(self, t: int) -> float:
        if self.schedule == "one_over_t":
            return 1.0 / (t + 1)
        if self.schedule.startswith("constant:"):
            p = float(self.schedule.split(":", 1)[1])
            if not 0 <= p <= 1:
                raise ValidationError("constant schedule needs p in [0, 1]")
            return p
        raise ValidationError(f"unknown schedule {self.schedule!r}")


def _co_players(profile, i):
    return [x for j, x in enumerate(profile) if j != i]


def _run(n, counts, config, respond) -> Trajectory:
    x0 = [config.mu_for(i, counts[i]) for i in range(n)]
    traj = Trajectory([x0], [x0], config.averaging)
    total = [x.copy() for x in x0]
    for t in range(1, config.T + 1):
        avg = traj.averages[-1]
        played = [respond(i, t, _co_players(avg, i)) for i in range(n)]
        total = [s + x for s, x in zip(total, played)]
        traj.iterates.append(played)
        traj.averages.append([s / (t + 1) for s in total])
    return traj


def ftrl_solve(cog: ContextOrdinalGame, config: SolverConfig) -> Trajectory:
    """Each round, every player plays the regularized best response to the co-players'
    running average, with replacement probability ``p_t`` from the schedule."""
    rules = [config.rule_for(i) for i in range(cog.num_players)]

    def respond(i, t, x_minus_i):
        params = RegularizationParams(p=config.p_at(t), q=config.q,
                                      mu=tuple(config.mu_for(i, cog.action_counts[i])),
                                      num_samples=config.num_samples,
                                      seed=_round_seed(config.seed, t))
        return regularized_best_response(cog, i, x_minus_i, rules[i], params)

    return _run(cog.num_players, cog.action_counts, config, respond)


def _round_seed(seed, t) -> int:
    # common random numbers: every player uses the same stream in a round, so the
    # dynamics of a symmetric game stay exactly symmetric
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, t]).generate_state(1)[0])


def fictitious_play(game, config: SolverConfig) -> Trajectory:
    """Best respond (canonical member, no regularization) to the co-players' running average.

    ``game`` may be a COG (uses the configured rules) or a cardinal game (expected
    payoff argmax, ties split uniformly).
    """
    if isinstance(game, CardinalGame):
        def respond(i, t, x_minus_i):
            prof = list(x_minus_i)
            prof.insert(i, None)
            u = game.expected_payoffs(i, prof)
            mask = winner_mask(u).astype(float)
            return mask / mask.sum()
    else:
        rules = [config.rule_for(i) for i in range(game.num_players)]

        def respond(i, t, x_minus_i):
            return best_response(game, i, x_minus_i, rules[i]).canonical()

    return _run(game.num_players, game.action_counts, config, respond)


def iterate_diffs(traj: Trajectory) -> np.ndarray:
    """L1 change of the running averages between consecutive rounds, summed over players."""
    a = traj.averages
    return np.array([sum(np.abs(x - y).sum() for x, y in zip(a[t], a[t - 1]))
                     for t in range(1, len(a))])


def lle_solve(nfg: CardinalGame, t0: float = 10.0, min_temperature: float = 0.1, steps: int = 50,
              damping: float = 0.5, tol: float = 1e-8, max_iter: int = 10_000,
              init=None, progress=None) -> list:
    """Follow the logit equilibrium from temperature ``t0`` down to ``min_temperature``.

    At each of ``steps`` geometrically spaced temperatures the damped update
    ``x_i <- (1 - damping) x_i + damping softmax(u_i(., x_{-i}) / tau)`` runs until the
    largest L1 residual is at most ``tol``; the last profile is returned.
    """
    if nfg.num_players < 2:
        raise ValidationError("logit homotopy needs at least two players")
    if not 0 < damping <= 1:
        raise ValidationError("damping must lie in (0, 1]")
    if t0 < min_temperature or min_temperature <= 0:
        raise ValidationError("need t0 >= min_temperature > 0")
    n = nfg.num_players
    x = [uniform(m) for m in nfg.action_counts] if init is None else [np.array(v, float) for v in init]
    temps = np.geomspace(t0, min_temperature, steps) if steps > 1 else np.array([min_temperature])
    for k, tau in enumerate(temps):
        for it in range(max_iter):
            target = [softmax(nfg.expected_payoffs(i, x) / tau) for i in range(n)]
            residual = max(float(np.abs(b - xi).sum()) for b, xi in zip(target, x))
            if residual <= tol:
                break
            x = [(1 - damping) * xi + damping * b for xi, b in zip(x, target)]
        else:
            raise SolverError(f"logit fixed point at temperature {tau:.4g} stalled "
                              f"with residual {residual:.3g}", residual)
        if progress is not None:
            progress(k, tau, it, residual)
    return x
