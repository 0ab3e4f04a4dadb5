"""Attack-effect measurement, PCA-based fake-profile detection and 2-D export.

HR@K counts real users who did not rate the target in training and whose
top-K (train-rated items excluded, ties to the lower item index) contains
the target. Injected users never count.
"""
from __future__ import annotations

import csv
import json
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .attacks import FakeProfileBatch
from .dataset import AttackBudget, DatasetSplit, RatingMatrix
from .victims import fit_victim


class EvaluationError(ValueError):
    pass


def evaluation_users(train: RatingMatrix, target: int, num_real: int | None = None):
    n = train.num_users if num_real is None else num_real
    rated = np.zeros(n, dtype=bool)
    hit = (train.items == target) & (train.users < n)
    rated[train.users[hit]] = True
    return np.flatnonzero(~rated)


def target_ranks(scores, rated, target):
    """0-based rank of ``target`` among each row's unrated items (ties to lower index)."""
    st = scores[:, target][:, None]
    cand = ~rated
    idx = np.arange(scores.shape[1])
    ahead = (scores > st) | ((scores == st) & (idx[None, :] < target))
    return np.sum(ahead & cand, axis=1)


def hit_ratio(victim, train: RatingMatrix, target: int, k: int = 10,
              num_real: int | None = None) -> float:
    """Share of evaluation users whose top-``k`` contains ``target``.

    ``train`` is the matrix the victim was fitted on; only its first
    ``num_real`` users (default: all) are evaluated.
    """
    if k < 1:
        raise EvaluationError("K must be >= 1")
    users = evaluation_users(train, target, num_real)
    if users.size == 0:
        raise EvaluationError(f"no evaluation users for target {target}: every user rated it")
    scores = np.asarray(victim.predict_all_rows(users), dtype=np.float64)
    rated = train.to_csr()[users].toarray() != 0
    return float(np.mean(target_ranks(scores, rated, target) < k))


# -- detection ---------------------------------------------------------------

def _zscore_rows(dense):
    mu = dense.mean(axis=1, keepdims=True)
    sd = dense.std(axis=1, keepdims=True)
    sd[sd == 0] = 1.0
    return (dense - mu) / sd


def pca_user_scores(matrix: RatingMatrix, k: int = 3):
    """Squared coefficient norm of each user over the top-``k`` principal directions.

    Rows are z-scored; the directions are the leading eigenvectors of the
    user-user correlation matrix, obtained from the SVD of the z-scored matrix.
    """
    Z = _zscore_rows(matrix.to_dense())
    U, s, _ = np.linalg.svd(Z, full_matrices=False)
    rank = int(np.sum(s > s[0] * 1e-10)) if s.size and s[0] > 0 else 0
    if rank < k:
        warnings.warn(f"covariance rank {rank} < k={k}; using k={rank}", RuntimeWarning)
        k = rank
    return np.sum(U[:, :k] ** 2, axis=1)


def detect(matrix: RatingMatrix, m: int, k: int = 3):
    """Flag the ``m`` users with the lowest PCA coefficient scores (ties to lower index)."""
    if not 0 <= m <= matrix.num_users:
        raise EvaluationError(f"m must lie in [0, {matrix.num_users}]")
    if m == 0:
        return set()
    scores = pca_user_scores(matrix, k)
    order = np.lexsort((np.arange(len(scores)), scores))
    return set(int(u) for u in order[:m])


def precision_recall(flagged, truth):
    flagged, truth = set(flagged), set(truth)
    hits = len(flagged & truth)
    precision = hits / len(flagged) if flagged else 0.0
    recall = hits / len(truth) if truth else 0.0
    return precision, recall


def export_projection(matrix: RatingMatrix, labels, out) -> np.ndarray:
    """Write ``user_id,x,y,is_fake`` rows of the top-2 principal-component coordinates."""
    if matrix.num_users < 2:
        raise EvaluationError("projection needs at least two users")
    Z = _zscore_rows(matrix.to_dense())
    Zc = Z - Z.mean(axis=0)
    U, s, _ = np.linalg.svd(Zc, full_matrices=False)
    coords = np.zeros((matrix.num_users, 2))
    width = min(2, s.size)
    coords[:, :width] = U[:, :width] * s[:width]
    labels = list(labels)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "x", "y", "is_fake"])
        for uid, (x, y), fake in zip(matrix.user_ids, coords, labels):
            writer.writerow([uid, repr(float(x)), repr(float(y)), int(bool(fake))])
    return coords


# -- experiment cells --------------------------------------------------------

REPORT_FIELDS = ("dataset", "attacker", "victim", "target", "hr_before", "hr_after",
                 "precision", "recall", "num_fake", "attack_seed", "victim_seed", "wall_clock")


@dataclass
class ExperimentReport:
    dataset: str
    attacker: str
    victim: str
    target: int
    hr_before: float
    hr_after: float
    precision: float
    recall: float
    num_fake: int
    attack_seed: int
    victim_seed: int
    wall_clock: float = 0.0
    loss_curves: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("hr_before", "hr_after", "precision", "recall"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise EvaluationError(f"{name}={value} outside [0, 1]")
        if self.num_fake and abs(self.precision - self.recall) > 1e-12:
            # detector flags exactly as many users as were injected
            raise EvaluationError("precision and recall differ although |flagged| = |truth|")

    def row(self):
        d = asdict(self)
        return [d[k] for k in REPORT_FIELDS]


def inject(train: RatingMatrix, batch: FakeProfileBatch) -> RatingMatrix:
    if len(batch) == 0:
        return train
    return train.with_rows(batch.rows, batch.ids())


def detection_scores(train: RatingMatrix, batch: FakeProfileBatch, k: int = 3, m=None):
    """Precision/recall of :func:`detect` with ``m`` defaulting to the number of fakes."""
    polluted = inject(train, batch)
    truth = set(range(train.num_users, polluted.num_users))
    m = len(truth) if m is None else m
    return precision_recall(detect(polluted, m, k), truth)


def run_attack_cell(split: DatasetSplit, attacker, victim_kind: str, budget: AttackBudget,
                    attack_seed: int, victim_seed: int, victim_params=None, k: int = 10,
                    detector_k: int = 3, dataset_label: str = "dataset",
                    attacker_label: str | None = None) -> ExperimentReport:
    """Fit, attack, refit from scratch, and measure one (attacker, victim, target) cell.

    ``attacker(train, budget, seed)`` returns a :class:`FakeProfileBatch`.
    """
    start = time.perf_counter()
    train = split.train
    params = victim_params or {}
    target = int(budget.targets[0])
    before = fit_victim(victim_kind, train, victim_seed, **params)
    hr_before = hit_ratio(before, train, target, k)
    batch = attacker(train, budget, attack_seed)
    polluted = inject(train, batch)
    after = fit_victim(victim_kind, polluted, victim_seed, **params)
    hr_after = hit_ratio(after, polluted, target, k, num_real=train.num_users)
    precision, recall = detection_scores(train, batch, detector_k) if len(batch) else (0.0, 0.0)
    return ExperimentReport(dataset_label, attacker_label or batch.attacker, victim_kind, target,
                            hr_before, hr_after, precision, recall, len(batch), attack_seed,
                            victim_seed, time.perf_counter() - start,
                            {k_: list(v) for k_, v in batch.info.get("history", {}).items()})


def write_reports(reports, csv_path, json_path=None) -> None:
    """One CSV row per cell (sorted by cell coordinates); loss curves go to JSON."""
    reports = sorted(reports, key=lambda r: (r.dataset, r.attacker, r.victim, r.target))
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_FIELDS)
        for r in reports:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in r.row()])
    if json_path is not None:
        curves = {f"{r.dataset}/{r.attacker}/{r.victim}/{r.target}": r.loss_curves
                  for r in reports if r.loss_curves}
        with open(json_path, "w") as fh:
            json.dump(curves, fh, indent=1, sort_keys=True)


def read_reports(csv_path):
    with open(csv_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        out.append(ExperimentReport(
            row["dataset"], row["attacker"], row["victim"], int(row["target"]),
            float(row["hr_before"]), float(row["hr_after"]), float(row["precision"]),
            float(row["recall"]), int(row["num_fake"]), int(row["attack_seed"]),
            int(row["victim_seed"]), float(row["wall_clock"])))
    return out
