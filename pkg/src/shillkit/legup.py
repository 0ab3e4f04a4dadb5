"""Leg-UP attacker.

Pipeline: sample template profiles from real users, map each template to
preferences in (0, 1) (per-item free parameters or an autoencoder), turn
preferences into 1..5 ratings with a per-fake-user learnable discretization,
and train against (a) a surrogate recommender through a one-step unrolled
inner update and (b) an MLP discriminator, in alternating minimax rounds.

During training the step function of the discretization is replaced by the
piecewise-linear ``heaviside_soft``; hard ratings are produced only when the
final batch is assembled.
"""
from __future__ import annotations

import copy

import struct
from dataclasses import dataclass, field

import numpy as np

from .attacks import FakeProfileBatch
from .dataset import AttackBudget
from .diffcore import (BCE_EPS, Adam, Dense, NonFiniteError, ReLU, Sequential, Sigmoid, Tanh,
                       Tensor, sigmoid, softmax)
from .surrogate import PRETRAIN_LR, as_dense, make_surrogate, promotion_loss

NUM_LEVELS = 5
ROUNDING_THRESHOLDS = np.array([0.2, 0.4, 0.6, 0.8])
TAU_FLOOR = 1e-6  # keeps every threshold strictly inside (0, 1) for any logits


# -- templates ---------------------------------------------------------------

@dataclass(eq=False)
class TemplateBatch:
    rows: np.ndarray
    source_users: tuple

    @property
    def support(self):
        return self.rows != 0


def sample_templates(real, budget: AttackBudget, seed: int) -> TemplateBatch:
    """``A`` users drawn uniformly with replacement; keep ``P`` of each one's rated items.

    Target items are never kept as template entries.
    """
    X = as_dense(real)
    n, m = X.shape
    seq = np.random.SeedSequence(seed)
    user_rng, *row_seeds = seq.spawn(budget.attack_size + 1)
    users = np.random.default_rng(user_rng).integers(0, n, size=budget.attack_size)
    rows = np.zeros((budget.attack_size, m))
    targets = list(budget.targets)
    for v, (u, rs) in enumerate(zip(users, row_seeds)):
        rated = np.flatnonzero(X[u])
        rated = rated[~np.isin(rated, targets)]
        if len(rated) > budget.profile_size:
            rated = np.sort(np.random.default_rng(rs).choice(rated, budget.profile_size,
                                                             replace=False))
        rows[v, rated] = X[u, rated]
    return TemplateBatch(rows, tuple(int(u) for u in users))


# -- discretization ----------------------------------------------------------

def heaviside_soft(x, t, xi=0.1):
    """Three-segment linear stand-in for the step ``[x > t]`` on [0, 1].

    With ``tm = min(t, 1 - t)``, ``a = t - tm/2`` and ``b = t + tm/2``: slope
    ``xi / a`` below ``a``, slope ``(1 - 2 xi) / tm`` through ``(t, 0.5)`` on
    ``[a, b]``, slope ``xi / (1 - b)`` above ``b``; continuous, 0 at 0, 1 at 1.
    """
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    tm = np.minimum(t, 1.0 - t)
    a = t - tm / 2.0
    b = t + tm / 2.0
    # each piece is written from an anchor whose value must come out exact
    low = x * xi / a
    high = 1.0 - xi * (1.0 - x) / (1.0 - b)
    slope = (1.0 - 2.0 * xi) / tm
    mid = np.where(x < t, xi + (x - a) * slope, 0.5 + (x - t) * slope)
    return np.where(x < a, low, np.where(x > b, high, mid))


def heaviside_soft_grad(x, t, xi=0.1):
    """Partial derivatives ``(dH/dx, dH/dt)`` of :func:`heaviside_soft`."""
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    tm = np.minimum(t, 1.0 - t)
    dtm = np.where(t < 0.5, 1.0, -1.0)
    a = t - tm / 2.0
    b = t + tm / 2.0
    da = 1.0 - dtm / 2.0
    db = 1.0 + dtm / 2.0
    low_x = xi / a
    low_t = -x * xi * da / a ** 2
    high_x = xi / (1.0 - b)
    high_t = xi * db * (x - 1.0) / (1.0 - b) ** 2
    mid_x = (1.0 - 2.0 * xi) / tm
    mid_t = -(1.0 - 2.0 * xi) / tm - (x - t) * (1.0 - 2.0 * xi) * dtm / tm ** 2
    below, above = x < a, x > b
    gx = np.where(below, low_x, np.where(above, high_x, mid_x))
    gt = np.where(below, low_t, np.where(above, high_t, mid_t))
    return np.broadcast_to(gx, np.broadcast(x, t).shape), gt


def tau_from_logits(logits):
    """Row-softmax segment widths, floored at ``TAU_FLOOR``; rows sum to 1."""
    return TAU_FLOOR + (1.0 - NUM_LEVELS * TAU_FLOOR) * softmax(np.asarray(logits, float))


def cumulative_thresholds(tau):
    """First four running sums of each row of ``tau`` (the segment boundaries)."""
    return np.cumsum(np.asarray(tau, dtype=np.float64), axis=-1)[..., :NUM_LEVELS - 1]


def discretize(preferences, tau=None, mode="hard", xi=0.1):
    """Map preferences in (0, 1) to ratings.

    ``tau`` holds per-row segment widths (shape ``(rows, 5)``); rows of
    ``preferences`` index fake users. ``hard`` gives ``1 + #{k: x > cum_k}``,
    ``soft`` the same sum with :func:`heaviside_soft`, ``rounding`` uses the
    fixed boundaries 0.2/0.4/0.6/0.8 and ignores ``tau``.
    """
    x = np.asarray(preferences, dtype=np.float64)
    if mode not in ("hard", "soft", "rounding"):
        raise ValueError(f"unknown discretization mode {mode!r}")
    cum = ROUNDING_THRESHOLDS if mode == "rounding" else cumulative_thresholds(tau)
    if cum.ndim == 2:
        # one threshold row per fake user: broadcast over that user's items
        cum = cum[:, None, :]
    xs = x[..., None]
    if mode == "soft":
        return 1.0 + heaviside_soft(xs, cum, xi).sum(axis=-1)
    return (1 + np.sum(xs > cum, axis=-1)).astype(np.int64)


# -- generator ---------------------------------------------------------------

class Generator:
    """Preference learner plus discretization parameters.

    ``mode="autoencoder"``: ReLU encoder / tanh decoder over template rows
    (scaled by ``1 / rating_max``), decoder output mapped to (0, 1) by
    ``(y + 1) / 2``. ``mode="simple"``: ``sigmoid(omega_i)`` per item.
    ``tau_logits`` holds one softmax row of segment widths per fake user.
    """

    def __init__(self, num_items, num_fake, mode="autoencoder", hidden=128, seed=0,
                 rating_max=5, discretization="learnable", xi=0.1):
        if mode not in ("autoencoder", "simple"):
            raise ValueError("generator mode must be 'autoencoder' or 'simple'")
        if discretization not in ("learnable", "rounding"):
            raise ValueError("discretization must be 'learnable' or 'rounding'")
        rng = np.random.default_rng(seed)
        self.mode, self.rating_max = mode, rating_max
        self.discretization, self.xi = discretization, xi
        if mode == "autoencoder":
            self.net = Sequential(Dense(num_items, hidden, rng, "gen.enc"), ReLU(),
                                  Dense(hidden, num_items, rng, "gen.dec"), Tanh())
        else:
            self.omega = Tensor(np.zeros(num_items), "gen.omega")
        self.tau_logits = Tensor(np.zeros((num_fake, NUM_LEVELS)), "gen.tau_logits")

    def parameters(self):
        core = self.net.parameters() if self.mode == "autoencoder" else [self.omega]
        return core + ([self.tau_logits] if self.discretization == "learnable" else [])

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def tau(self):
        return tau_from_logits(self.tau_logits.values)

    def preferences(self, template_rows):
        """Preferences in (0, 1) on template-nonzero positions, zero elsewhere."""
        mask = template_rows != 0
        self._mask = mask
        if self.mode == "autoencoder":
            y = self.net.forward(template_rows / self.rating_max)
            self._pref = (y + 1.0) / 2.0 * mask
        else:
            self._s = sigmoid(self.omega.values)
            self._pref = np.broadcast_to(self._s, mask.shape) * mask
        return self._pref

    def ratings(self, template_rows):
        """Training-time continuous ratings on the template support (0 elsewhere)."""
        x = self.preferences(template_rows)
        mask = self._mask
        if self.discretization == "rounding":
            # continuous counterpart of the fixed rounding: nearest integer of 5x + 0.5
            return (NUM_LEVELS * x + 0.5) * mask
        cum = cumulative_thresholds(self.tau())
        self._cum = cum
        return (1.0 + heaviside_soft(x[..., None], cum[:, None, :], self.xi).sum(-1)) * mask

    def hard_ratings(self, template_rows):
        x = self.preferences(template_rows)
        mode = "rounding" if self.discretization == "rounding" else "hard"
        return discretize(x, self.tau(), mode) * self._mask

    def backward(self, grad_ratings):
        """Accumulate parameter gradients from d(loss)/d(ratings) of the last ``ratings`` call."""
        g = grad_ratings * self._mask
        x = self._pref
        if self.discretization == "rounding":
            g_pref = NUM_LEVELS * g
        else:
            gx, gt = heaviside_soft_grad(x[..., None], self._cum[:, None, :], self.xi)
            g_pref = (g[..., None] * gx).sum(-1) * self._mask
            g_cum = (g[..., None] * gt * self._mask[..., None]).sum(axis=1)  # (A, 4)
            # cum_k = sum_{j <= k} tau_j  ->  dL/dtau_j = sum_{k >= j} dL/dcum_k
            g_tau = np.zeros((g_cum.shape[0], NUM_LEVELS))
            g_tau[:, :NUM_LEVELS - 1] = np.cumsum(g_cum[:, ::-1], axis=1)[:, ::-1]
            s = softmax(self.tau_logits.values)
            scale = 1.0 - NUM_LEVELS * TAU_FLOOR
            self.tau_logits.grad += scale * s * (g_tau - np.sum(s * g_tau, axis=1, keepdims=True))
        if self.mode == "autoencoder":
            self.net.backward(g_pref / 2.0)
        else:
            self.omega.grad += (g_pref * self._s * (1.0 - self._s)).sum(axis=0)

    def state_dict(self):
        return {p.name: p.values for p in self.parameters()}

    def load_state_dict(self, state):
        for p in self.parameters():
            if p.name not in state or state[p.name].shape != p.shape:
                raise ValueError(f"missing or mis-shaped tensor {p.name!r}")
            p.values = np.array(state[p.name], dtype=np.float64)


# -- discriminator -----------------------------------------------------------

class Discriminator:
    """MLP over full profile rows (zeros = unrated) -> probability of being real."""

    def __init__(self, num_items, hidden=(512, 128), seed=0, rating_max=5):
        rng = np.random.default_rng(seed)
        layers, width = [], num_items
        for k, h in enumerate(hidden):
            layers += [Dense(width, h, rng, f"dis.h{k}"), ReLU()]
            width = h
        layers += [Dense(width, 1, rng, "dis.out"), Sigmoid()]
        self.net = Sequential(*layers)
        self.rating_max = rating_max

    def parameters(self):
        return self.net.parameters()

    def zero_grad(self):
        self.net.zero_grad()

    def forward(self, rows):
        return self.net.forward(np.atleast_2d(rows) / self.rating_max)[:, 0]

    def backward(self, grad_prob):
        """Accumulates parameter grads; returns d(loss)/d(rows)."""
        return self.net.backward(grad_prob[:, None]) / self.rating_max

    def state_dict(self):
        return {p.name: p.values for p in self.parameters()}

    def load_state_dict(self, state):
        for p in self.parameters():
            p.values = np.array(state[p.name], dtype=np.float64)


def discriminate(disc: Discriminator, profile_row) -> float:
    return float(disc.forward(np.asarray(profile_row, dtype=np.float64)[None, :])[0])


# -- losses ------------------------------------------------------------------

def generation_direct(scores, targets, users=None):
    """Promotion loss: summed negative log-softmax of the targets. ``(value, grad)``."""
    return promotion_loss(np.atleast_2d(scores), targets, users)


def generation_nuke(scores, targets, users=None):
    value, grad = promotion_loss(np.atleast_2d(scores), targets, users)
    return -value, -grad


def generation_indirect(fake_soft, template_rows):
    """Squared reconstruction error over template-nonzero positions. ``(value, grad)``."""
    mask = template_rows != 0
    diff = (fake_soft - template_rows) * mask
    return float(np.sum(diff * diff)), 2.0 * diff


def discrimination(real_probs, fake_probs):
    """``mean log D(real) + mean log(1 - D(fake))`` and its grads w.r.t. both inputs."""
    pr = np.clip(np.asarray(real_probs, dtype=np.float64), BCE_EPS, 1 - BCE_EPS)
    pf = np.clip(np.asarray(fake_probs, dtype=np.float64), BCE_EPS, 1 - BCE_EPS)
    value = float(np.mean(np.log(pr)) + np.mean(np.log(1.0 - pf)))
    return value, 1.0 / (pr * pr.size), -1.0 / ((1.0 - pf) * pf.size)


def in_segment_users(real, selected, min_rating=4):
    X = as_dense(real)
    selected = list(selected)
    if not selected:
        raise ValueError("in-segment users need at least one selected item")
    return np.flatnonzero(np.all(X[:, selected] >= min_rating, axis=1))


def in_segment_loss(scores, targets, segment_users):
    segment_users = np.asarray(segment_users, dtype=np.int64)
    if segment_users.size == 0:
        raise ValueError("no in-segment users: every user rated some selected item below 4; "
                         "choose different selected items")
    return promotion_loss(np.atleast_2d(scores), targets, segment_users)


# -- training ----------------------------------------------------------------

@dataclass
class LegUPConfig:
    epochs: int = 50
    k1: int = 1
    k2: int = 1
    T: int = 10
    generator: str = "autoencoder"          # or "simple"
    generation_loss: str = "direct"         # or "indirect"
    discretization: str = "learnable"       # or "rounding"
    use_discriminator: bool = True
    xi: float = 0.1
    hidden: int = 128
    dis_hidden: tuple = (512, 128)
    lr_g: float = 1e-3
    lr_d: float = 1e-3
    surrogate: str = "wrmf"
    surrogate_params: dict = field(default_factory=dict)
    surrogate_optimizer: str = "sgd"
    surrogate_lr: float = 1e-4
    pretrain_steps: int = 150
    pretrain_lr: float | None = None       # per-surrogate default
    inner_lr: float = 1e-4
    restart_surrogate: bool = True          # each generator step starts from the pretrained state
    resample: str = "epoch"                 # "epoch", "step" or "never"
    segment_users: tuple | None = None      # restrict the promotion loss (in-segment attack)

    def validate(self):
        errors = []
        for name in ("k1", "k2", "T"):
            if getattr(self, name) < 1:
                errors.append(f"{name} must be >= 1")
        if self.epochs < 0:
            errors.append("epochs must be >= 0")
        if self.generator not in ("autoencoder", "simple"):
            errors.append(f"unknown generator {self.generator!r}")
        if self.generation_loss not in ("direct", "indirect"):
            errors.append(f"unknown generation loss {self.generation_loss!r}")
        if self.discretization not in ("learnable", "rounding"):
            errors.append(f"unknown discretization {self.discretization!r}")
        if self.resample not in ("epoch", "step", "never"):
            errors.append(f"unknown resample policy {self.resample!r}")
        if not 0 < self.xi < 0.5:
            errors.append("xi must lie in (0, 0.5)")
        if self.surrogate not in ("wrmf", "iautorec"):
            errors.append(f"unknown surrogate {self.surrogate!r}")
        return errors


@dataclass(eq=False)
class LegUPResult:
    generator: Generator
    discriminator: Discriminator | None
    templates: TemplateBatch
    history: dict
    config: LegUPConfig
    seed: int


def fake_rows_from(ratings, budget):
    rows = np.array(ratings, dtype=np.float64)
    rows[:, list(budget.targets)] = budget.rating_max
    return rows


def generator_objective(gen, templates, budget, cfg, real, surrogate=None, disc=None):
    """One generator-side evaluation: losses plus accumulated generator gradients.

    The surrogate (if used) is the frozen ``T - 1``-step model; it is not
    modified. Returns a dict of loss terms and the soft fake rows.
    """
    X = as_dense(real)
    soft = gen.ratings(templates.rows)
    rows = fake_rows_from(soft, budget)
    out = {}
    if cfg.generation_loss == "direct":
        support = templates.support.copy()
        support[:, list(budget.targets)] = True
        users = None if cfg.segment_users is None else np.asarray(cfg.segment_users)
        if users is not None and users.size == 0:
            raise ValueError("in-segment attack with an empty user segment")
        g_rows, gen_loss = surrogate.unrolled_attack_grad(rows, X, list(budget.targets),
                                                          cfg.inner_lr, users=users,
                                                          mask=support)
    else:
        gen_loss, g_rows = generation_indirect(soft, templates.rows)
    out["gen"] = gen_loss
    if disc is not None:
        p = disc.forward(rows)
        pf = np.clip(p, BCE_EPS, 1 - BCE_EPS)
        out["adv"] = float(np.mean(np.log(1.0 - pf)))
        disc.zero_grad()
        g_rows = g_rows + disc.backward(-1.0 / ((1.0 - pf) * pf.size))
        disc.zero_grad()
    g_rows = np.array(g_rows)
    g_rows[:, list(budget.targets)] = 0.0
    gen.backward(g_rows)
    return out, rows


def train(real, budget: AttackBudget, config: LegUPConfig | None = None, seed: int = 0,
          log=None) -> LegUPResult:
    """Alternate discriminator and generator rounds for ``config.epochs`` epochs.

    Per epoch: ``k1`` discriminator steps, then ``k2`` generator steps, each
    preceded by ``T - 1`` surrogate steps on the poisoned matrix and followed
    by the committed (unrolled) SGD step.
    """
    cfg = config or LegUPConfig()
    errors = cfg.validate()
    if errors:
        raise ValueError("; ".join(errors))
    X = as_dense(real)
    n, m = X.shape
    A = budget.attack_size
    seq = np.random.SeedSequence(seed)
    s_gen, s_dis, s_sur, s_loop = (int(s.generate_state(1)[0]) for s in seq.spawn(4))
    rng = np.random.default_rng(s_loop)

    gen = Generator(m, A, cfg.generator, cfg.hidden, s_gen, budget.rating_max,
                    cfg.discretization, cfg.xi)
    disc = Discriminator(m, cfg.dis_hidden, s_dis, budget.rating_max) if cfg.use_discriminator else None
    opt_g = Adam(gen.parameters(), lr=cfg.lr_g)
    opt_d = Adam(disc.parameters(), lr=cfg.lr_d) if disc else None

    templates = sample_templates(X, budget, int(rng.integers(2**63)))
    surrogate = None
    if cfg.generation_loss == "direct":
        surrogate = make_surrogate(cfg.surrogate, n + A, m, seed=s_sur, **cfg.surrogate_params)
        init_rows = fake_rows_from(gen.ratings(templates.rows), budget)
        surrogate.fit(np.vstack([X, init_rows]), cfg.pretrain_steps,
                      lr=cfg.pretrain_lr or PRETRAIN_LR[cfg.surrogate])
        pretrained = copy.deepcopy(surrogate)

    keys = ["gen", "total"] + (["dis", "adv", "real"] if disc else [])
    history = {k: [] for k in keys}
    for epoch in range(cfg.epochs):
        if cfg.resample == "epoch" and epoch > 0:
            templates = sample_templates(X, budget, int(rng.integers(2**63)))

        dis_vals, real_logs = [], []
        if disc is not None:
            for _ in range(cfg.k1):
                real_rows = X[rng.integers(0, n, size=A)]
                fake = fake_rows_from(gen.ratings(templates.rows), budget)
                disc.zero_grad()
                probs = disc.forward(np.vstack([real_rows, fake]))
                value, g_r, g_f = discrimination(probs[:A], probs[A:])
                disc.backward(-np.concatenate([g_r, g_f]))  # ascend on the objective
                opt_d.step()
                dis_vals.append(value)
                real_logs.append(float(np.mean(np.log(np.clip(disc.forward(real_rows),
                                                              BCE_EPS, 1 - BCE_EPS)))))

        for _ in range(cfg.k2):
            if cfg.resample == "step":
                templates = sample_templates(X, budget, int(rng.integers(2**63)))
            if surrogate is not None:
                if cfg.restart_surrogate:
                    surrogate = copy.deepcopy(pretrained)
                current = fake_rows_from(gen.ratings(templates.rows), budget)
                Xs = np.vstack([X, current])
                if cfg.T > 1:
                    surrogate.fit(Xs, cfg.T - 1, cfg.surrogate_optimizer, cfg.surrogate_lr)
            gen.zero_grad()
            terms, rows = generator_objective(gen, templates, budget, cfg, X, surrogate, disc)
            for p in gen.parameters():
                if not np.all(np.isfinite(p.grad)):
                    raise NonFiniteError(f"Leg-UP diverged at epoch {epoch}")
            opt_g.step()
            if surrogate is not None and not cfg.restart_surrogate:
                support = templates.support.copy()
                support[:, list(budget.targets)] = True
                surrogate.sgd_step(Xs, cfg.inner_lr, mask=np.vstack([X != 0, support]))

        history["gen"].append(terms["gen"])
        total = terms["gen"]
        if disc is not None:
            history["dis"].append(float(np.mean(dis_vals)))
            history["adv"].append(terms["adv"])
            history["real"].append(real_logs[-1])
            total += real_logs[-1] + terms["adv"]
        if not np.isfinite(total):
            raise NonFiniteError(f"Leg-UP diverged at epoch {epoch}")
        history["total"].append(total)
        if log is not None:
            log(f"epoch {epoch}: " + " ".join(f"{k}={v[-1]:.4f}" for k, v in history.items()))

    return LegUPResult(gen, disc, templates, history, cfg, seed)


def assemble_fake_batch(gen: Generator, templates: TemplateBatch, budget: AttackBudget,
                        seed: int = 0) -> FakeProfileBatch:
    """Hard ratings on each template's support plus the targets at the maximum."""
    rows = gen.hard_ratings(templates.rows).astype(np.int64)
    rows[:, list(budget.targets)] = budget.rating_max
    return FakeProfileBatch(rows, "legup", seed, templates.source_users)


def legup_attack(real, budget: AttackBudget, config: LegUPConfig | None = None,
                 seed: int = 0, log=None) -> FakeProfileBatch:
    result = train(real, budget, config, seed, log=log)
    batch = assemble_fake_batch(result.generator, result.templates, budget, seed)
    batch.info["history"] = result.history
    batch.info["result"] = result
    return batch


# -- serialization -----------------------------------------------------------

MAGIC = b"SHKTPARM"
FORMAT_VERSION = 1


def save_params(path, tensors: dict) -> None:
    """Flat little-endian binary: magic, version, count, then (name, shape, float64 data)."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", FORMAT_VERSION, len(tensors)))
        for name, arr in tensors.items():
            arr = np.ascontiguousarray(arr, dtype="<f8")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def load_params(path) -> dict:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a parameter file")
    off = len(MAGIC)
    version, count = struct.unpack_from("<HI", data, off)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    off += struct.calcsize("<HI")
    out = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off:off + nlen].decode("utf-8")
        off += nlen
        (ndim,) = struct.unpack_from("<B", data, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}Q", data, off)
        off += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        out[name] = np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(shape).copy()
        off += 8 * size
    return out


def save_result(path, result: LegUPResult) -> None:
    tensors = dict(result.generator.state_dict())
    if result.discriminator is not None:
        tensors.update(result.discriminator.state_dict())
    tensors["templates.rows"] = result.templates.rows
    save_params(path, tensors)
