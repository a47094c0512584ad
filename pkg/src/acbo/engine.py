"""Outer optimization loops: replay buffer, alpha schedule, episodes and reports."""
from __future__ import annotations

import csv
import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import actor_continuous as ac
from . import actor_discrete as ad
from .critic import Critic, ScoredDesign, critic_update, make_critic, predict_many
from .nn_core import AdamState

log = logging.getLogger(__name__)

RUN_CSV_HEADER = ("episode", "score", "best_score", "alpha", "critic_loss", "actor_objective")
DISTRIBUTION_CSV_HEADER = ("design_index", "p_theta", "p_star")


class ObjectiveError(RuntimeError):
    """The black-box objective failed; carries the episode index."""

    def __init__(self, episode: int, cause: BaseException):
        super().__init__(f"objective failed at episode {episode}: {cause!r}")
        self.episode = episode
        self.cause = cause


class ReplayBuffer:
    """Store of queried (design, score) pairs with best-so-far tracking.

    ``capacity=None`` keeps everything; otherwise the oldest entry is evicted.
    Ties for the best score go to the earliest stored entry.
    """

    def __init__(self, capacity: Optional[int] = None):
        if capacity is not None and capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._entries: deque[ScoredDesign] = deque()
        self._best: Optional[ScoredDesign] = None

    def __len__(self):
        return len(self._entries)

    @property
    def entries(self) -> list[ScoredDesign]:
        return list(self._entries)

    @property
    def best(self) -> Optional[ScoredDesign]:
        return self._best

    def store(self, entry: ScoredDesign) -> "ReplayBuffer":
        if not math.isfinite(entry.score):
            raise ValueError("cannot store a non-finite score")
        self._entries.append(entry)
        evicted = None
        if self.capacity is not None and len(self._entries) > self.capacity:
            evicted = self._entries.popleft()
        if evicted is not None and evicted is self._best:
            self._best = None
            for e in self._entries:
                if self._best is None or e.score > self._best.score:
                    self._best = e
        elif self._best is None or entry.score > self._best.score:
            self._best = entry
        return self

    def sample(self, n: int, rng: np.random.Generator) -> list[ScoredDesign]:
        """``n`` entries drawn uniformly with replacement."""
        if not self._entries:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, len(self._entries), size=n)
        return [self._entries[i] for i in idx]


@dataclass(frozen=True)
class RunConfig:
    episodes: int = 2000
    rounds: int = 10
    critic_batch: int = 64
    actor_batch: int = 64
    alpha_initial: float = 1e-1
    alpha_final: float = 1e-3
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    seed: int = 0
    actor_hidden: tuple[int, ...] = (64, 64)
    critic_hidden: tuple[int, ...] = (64, 64)
    buffer_capacity: Optional[int] = None
    warmup: Optional[int] = None
    noise_input: str = "constant"
    noise_dim: int = 1

    def __post_init__(self):
        for name in ("episodes", "critic_batch", "actor_batch", "noise_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.alpha_final < 0 or self.alpha_initial < 0:
            raise ValueError("alpha_initial and alpha_final must be nonnegative")
        if self.alpha_final > self.alpha_initial:
            raise ValueError("alpha_final must not exceed alpha_initial")
        if self.alpha_final == 0 and self.alpha_initial > 0:
            raise ValueError("alpha_final must be positive for a geometric schedule")
        for name in ("lr_actor", "lr_critic"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.buffer_capacity is not None and self.buffer_capacity < 1:
            raise ValueError("buffer_capacity must be >= 1")
        if self.warmup is not None and self.warmup < 0:
            raise ValueError("warmup must be >= 0")
        if self.noise_input not in ac.NOISE_INPUTS:
            raise ValueError(f"noise_input must be one of {ac.NOISE_INPUTS}")
        object.__setattr__(self, "actor_hidden", tuple(int(w) for w in self.actor_hidden))
        object.__setattr__(self, "critic_hidden", tuple(int(w) for w in self.critic_hidden))

    @property
    def warmup_episodes(self) -> int:
        return max(self.critic_batch, 10) if self.warmup is None else self.warmup


def alpha_at(config: RunConfig, episode: int) -> float:
    """Geometric interpolation from alpha_initial (episode 1) to alpha_final (episode M)."""
    M = config.episodes
    if not 1 <= episode <= M:
        raise ValueError(f"episode {episode} outside 1..{M}")
    a0, a1 = config.alpha_initial, config.alpha_final
    if M == 1 or a0 == a1:
        return a0
    a = a0 * (a1 / a0) ** ((episode - 1) / (M - 1))
    return min(max(a, a1), a0)


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    design: object
    score: float
    alpha: float
    best_score: float
    critic_loss: float
    actor_objective: float


@dataclass
class RunReport:
    rows: list[EpisodeRecord]
    final_best: ScoredDesign
    seed: int
    actor: object = None
    critic: Optional[Critic] = None
    p_theta: Optional[np.ndarray] = None
    p_star: Optional[np.ndarray] = None

    @property
    def episodes_run(self) -> int:
        return len(self.rows)

    @property
    def scores(self) -> np.ndarray:
        return np.array([r.score for r in self.rows])

    @property
    def best_scores(self) -> np.ndarray:
        return np.array([r.best_score for r in self.rows])


# called after every episode; returning True ends the run early
Monitor = Callable[[int, object, Critic], Optional[bool]]


def _query(objective, design, episode):
    try:
        y = float(objective(design))
    except Exception as exc:
        raise ObjectiveError(episode, exc) from exc
    if not math.isfinite(y):
        raise ObjectiveError(episode, ValueError(f"non-finite score {y}"))
    return y


def _fit_critic(critic, opt, buf, config, rng):
    loss = math.nan
    for _ in range(config.rounds):
        batch = buf.sample(config.critic_batch, rng)
        critic, opt, loss = critic_update(critic, batch, opt, config.lr_critic)
    return critic, opt, loss


def run_continuous(config: RunConfig, objective, dim: Optional[int] = None,
                   rng: Optional[np.random.Generator] = None,
                   monitor: Optional[Monitor] = None) -> RunReport:
    """Optimize a black-box scorer over (-1, 1)^dim with one query per episode."""
    dim = dim if dim is not None else objective.dim
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    critic = make_critic(dim, rng, config.critic_hidden)
    actor = ac.make_actor(dim, rng, config.actor_hidden, noise_dim=config.noise_dim,
                          noise_input=config.noise_input)
    c_opt = AdamState.for_params(critic.params)
    a_opt = AdamState.for_params(actor.params)
    buf = ReplayBuffer(config.buffer_capacity)
    rows = []
    for ep in range(1, config.episodes + 1):
        alpha = alpha_at(config, ep)
        x = ac.sample_design(actor, ac.draw_noise(actor, rng, 1))[0]
        y = _query(objective, x, ep)
        buf.store(ScoredDesign(x, y))
        critic, c_opt, c_loss = _fit_critic(critic, c_opt, buf, config, rng)
        a_obj = math.nan
        if ep > config.warmup_episodes:
            for _ in range(config.rounds):
                noise = ac.draw_noise(actor, rng, config.actor_batch)
                actor, a_opt, a_obj = ac.actor_update_continuous(
                    actor, critic, noise, alpha, a_opt, config.lr_actor)
        rows.append(EpisodeRecord(ep, x, y, alpha, buf.best.score, c_loss, a_obj))
        if monitor is not None and monitor(ep, actor, critic):
            break
    return RunReport(rows, buf.best, config.seed, actor=actor, critic=critic)


def run_discrete(config: RunConfig, objective, n_designs: Optional[int] = None,
                 rng: Optional[np.random.Generator] = None,
                 monitor: Optional[Monitor] = None) -> RunReport:
    """Optimize a black-box scorer over design indices ``0..n_designs-1``."""
    n = n_designs if n_designs is not None else objective.n_designs
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    critic = make_critic(n, rng, config.critic_hidden, discrete=True)
    actor = ad.make_discrete_actor(n, rng, config.actor_hidden)
    c_opt = AdamState.for_params(critic.params)
    a_opt = AdamState.for_params(actor.params)
    buf = ReplayBuffer(config.buffer_capacity)
    rows = []
    for ep in range(1, config.episodes + 1):
        alpha = alpha_at(config, ep)
        P = ad.design_distribution(actor)
        x = int(rng.choice(n, p=P))
        y = _query(objective, x, ep)
        buf.store(ScoredDesign(x, y))
        critic, c_opt, c_loss = _fit_critic(critic, c_opt, buf, config, rng)
        a_obj = math.nan
        if ep > config.warmup_episodes:
            for _ in range(config.rounds):
                actor, a_opt, a_obj = ad.actor_update_discrete(
                    actor, critic, alpha, a_opt, config.lr_actor)
        rows.append(EpisodeRecord(ep, x, y, alpha, buf.best.score, c_loss, a_obj))
        if monitor is not None and monitor(ep, actor, critic):
            break
    p_theta = ad.design_distribution(actor)
    p_star = None
    if config.alpha_final > 0:
        p_star = ad.optimal_distribution(predict_many(critic, np.arange(n)), config.alpha_final)
    return RunReport(rows, buf.best, config.seed, actor=actor, critic=critic,
                     p_theta=p_theta, p_star=p_star)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_run_csv(report: RunReport, fh, provenance: str = "") -> None:
    """Learning-curve rows, preceded by a ``# seed=...`` provenance line."""
    fh.write(f"# seed={report.seed}{(' ' + provenance) if provenance else ''}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(RUN_CSV_HEADER)
    for r in report.rows:
        w.writerow([r.episode, _fmt(r.score), _fmt(r.best_score), _fmt(r.alpha),
                    _fmt(r.critic_loss), _fmt(r.actor_objective)])


def write_distribution_csv(report: RunReport, fh) -> None:
    fh.write(f"# seed={report.seed}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(DISTRIBUTION_CSV_HEADER)
    p_star = report.p_star if report.p_star is not None else np.full(len(report.p_theta), np.nan)
    for i, (p, q) in enumerate(zip(report.p_theta, p_star)):
        w.writerow([i, _fmt(p), _fmt(q)])


def write_best_design_csv(report: RunReport, fh) -> None:
    best = report.final_best
    fh.write(f"# seed={report.seed} score={_fmt(best.score)}\n")
    w = csv.writer(fh, lineterminator="\n")
    values = np.atleast_1d(np.asarray(best.design))
    if values.dtype.kind in "iu":
        w.writerow(("design_index", "score"))
        w.writerow([int(values[0]), _fmt(best.score)])
        return
    w.writerow(("coordinate", "value"))
    for i, v in enumerate(values):
        w.writerow([i, _fmt(v)])


def read_run_csv(fh) -> list[dict]:
    """Parse a run CSV (provenance comment lines are skipped)."""
    lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or tuple(reader.fieldnames) != RUN_CSV_HEADER:
        raise ValueError(f"unexpected run CSV header: {reader.fieldnames}")
    return [{k: (int(v) if k == "episode" else float(v)) for k, v in row.items()} for row in reader]
