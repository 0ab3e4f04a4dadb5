"""Heuristic shilling attacks and the surrogate-gradient AIA baseline.

All attackers return a :class:`FakeProfileBatch` of dense integer rows
(0 = unrated). Target items always get the maximal rating.
"""
from __future__ import annotations

import copy

from dataclasses import dataclass, field

import numpy as np

from .dataset import AttackBudget, MatrixStats, RatingMatrix
from .diffcore import Adam, Tensor
from .surrogate import PRETRAIN_LR, as_dense, make_surrogate


@dataclass(eq=False)
class FakeProfileBatch:
    rows: np.ndarray
    attacker: str
    seed: int
    template_users: tuple | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64)

    def __len__(self):
        return self.rows.shape[0]

    def ids(self, prefix="fake_"):
        return [f"{prefix}{k}" for k in range(len(self))]

    def to_bytes(self) -> bytes:
        return self.rows.astype("<i8").tobytes()


def _round_ratings(values, rating_max):
    return np.rint(np.clip(values, 1, rating_max)).astype(np.int64)


def _filler_pool(num_items, budget, allowed=None):
    banned = np.zeros(num_items, dtype=bool)
    banned[list(budget.targets)] = True
    banned[list(budget.selected)] = True
    if allowed is not None:
        banned |= ~allowed
    return np.flatnonzero(~banned)


def _sample_fillers(rng, pool, p):
    return rng.choice(pool, size=min(p, len(pool)), replace=False)


def _gaussian_fill(name, stats, budget, seed, per_item, selected=()):
    rng = np.random.default_rng(seed)
    m = stats.num_items
    allowed = stats.item_count > 0 if per_item else None
    pool = _filler_pool(m, budget, allowed)
    rows = np.zeros((budget.attack_size, m), dtype=np.int64)
    for v in range(budget.attack_size):
        fill = _sample_fillers(rng, pool, budget.profile_size)
        if per_item:
            draws = rng.normal(stats.item_mean[fill], stats.item_std[fill])
        else:
            draws = rng.normal(stats.global_mean, stats.global_std, size=len(fill))
        rows[v, fill] = _round_ratings(draws, budget.rating_max)
    rows[:, list(selected)] = budget.rating_max
    rows[:, list(budget.targets)] = budget.rating_max
    return FakeProfileBatch(rows, name, seed)


def random_attack(stats: MatrixStats, budget: AttackBudget, seed: int) -> FakeProfileBatch:
    """Fillers ~ N(global mean, global std), clipped and rounded."""
    return _gaussian_fill("random", stats, budget, seed, per_item=False)


def average_attack(stats: MatrixStats, budget: AttackBudget, seed: int) -> FakeProfileBatch:
    """Fillers ~ N(item mean, item std); only items with training ratings are fillers."""
    return _gaussian_fill("average", stats, budget, seed, per_item=True)


def segment_attack(budget: AttackBudget, seed: int, num_items: int) -> FakeProfileBatch:
    """Selected items and targets at the maximum, ``P`` random fillers at 1."""
    if not budget.selected:
        raise ValueError("segment attack needs at least one selected item")
    rng = np.random.default_rng(seed)
    pool = _filler_pool(num_items, budget)
    rows = np.zeros((budget.attack_size, num_items), dtype=np.int64)
    for v in range(budget.attack_size):
        rows[v, _sample_fillers(rng, pool, budget.profile_size)] = 1
    rows[:, list(budget.selected)] = budget.rating_max
    rows[:, list(budget.targets)] = budget.rating_max
    return FakeProfileBatch(rows, "segment", seed)


def bandwagon_attack(stats: MatrixStats, budget: AttackBudget, seed: int,
                     num_selected: int = 1) -> FakeProfileBatch:
    """Most popular items at the maximum; fillers rated as in the random attack.

    Uses ``budget.selected`` when given, else the ``num_selected`` most-rated
    non-target items.
    """
    selected = budget.selected
    if not selected:
        order = np.lexsort((np.arange(stats.num_items), -stats.item_count))
        selected = tuple(int(i) for i in order if i not in budget.targets)[:num_selected]
        budget = AttackBudget(budget.attack_size, budget.profile_size, budget.targets,
                              selected, budget.rating_max)
    batch = _gaussian_fill("bandwagon", stats, budget, seed, per_item=False, selected=selected)
    return batch


def null_attack(num_items: int, seed: int = 0) -> FakeProfileBatch:
    return FakeProfileBatch(np.zeros((0, num_items), dtype=np.int64), "none", seed)


@dataclass
class AIAConfig:
    surrogate: str = "wrmf"
    surrogate_params: dict = field(default_factory=dict)
    surrogate_optimizer: str = "sgd"
    surrogate_lr: float = 1e-4
    pretrain_steps: int = 150
    pretrain_lr: float | None = None       # per-surrogate default
    inner_steps: int = 10
    inner_lr: float = 1e-4
    steps: int = 20
    lr: float = 0.1
    restart_surrogate: bool = True          # every step starts from the pretrained state


def aia_attack(real: RatingMatrix, budget: AttackBudget, config: AIAConfig | None = None,
               seed: int = 0) -> FakeProfileBatch:
    """Optimize copies of ``A`` real profiles against a surrogate via last-step unrolling.

    The nonzero pattern is each template's full pattern (no profile-size
    limit). The lowest-loss iterate is kept, then clipped and rounded.
    """
    cfg = config or AIAConfig()
    rng = np.random.default_rng(seed)
    X = as_dense(real)
    n, m = X.shape
    A, rmax = budget.attack_size, budget.rating_max
    templates = rng.choice(n, size=A, replace=A > n)
    targets = list(budget.targets)

    fake = Tensor(X[templates].copy(), "fake")
    fake.values[:, targets] = rmax
    support = fake.values != 0
    learnable = support.copy()
    learnable[:, targets] = False

    history = []
    best_rows, best_loss = fake.values.copy(), np.inf
    if cfg.steps > 0:
        surrogate = make_surrogate(cfg.surrogate, n + A, m, seed=seed, **cfg.surrogate_params)
        surrogate.fit(np.vstack([X, fake.values]), cfg.pretrain_steps,
                      lr=cfg.pretrain_lr or PRETRAIN_LR[cfg.surrogate])
        pretrained = copy.deepcopy(surrogate)
        opt = Adam([fake], lr=cfg.lr)
        for _ in range(cfg.steps):
            Xs = np.vstack([X, fake.values])
            if cfg.restart_surrogate:
                surrogate = copy.deepcopy(pretrained)
            if cfg.inner_steps > 1:
                surrogate.fit(Xs, cfg.inner_steps - 1, cfg.surrogate_optimizer, cfg.surrogate_lr)
            grad, loss = surrogate.unrolled_attack_grad(fake.values, X, targets, cfg.inner_lr,
                                                        mask=support)
            history.append(loss)
            if loss < best_loss:
                best_loss, best_rows = loss, fake.values.copy()
            fake.grad[...] = np.where(learnable, grad, 0.0)
            opt.step()
            fake.values[...] = np.where(support, np.clip(fake.values, 1, rmax), 0.0)
            if not cfg.restart_surrogate:
                surrogate.sgd_step(Xs, cfg.inner_lr, mask=np.vstack([X != 0, support]))

    rows = np.where(support, _round_ratings(best_rows, rmax), 0)
    rows[:, targets] = rmax
    return FakeProfileBatch(rows, "aia", seed, tuple(int(t) for t in templates),
                            {"loss": history})
