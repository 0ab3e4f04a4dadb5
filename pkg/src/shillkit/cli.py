"""Command-line entry point.

    shillkit validate <config>
    shillkit run <config>
    shillkit summarize <dir-or-report.csv>...
    shillkit detect <matrix>... --m M --k K
    shillkit project <matrix>... --out coords.csv

Exit codes: 0 ok, 1 some cells failed, 2 configuration or input error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import attacks, evaluation, legup
from . import dataset as ds
from .config import ConfigError, load_config
from .victims import fit_victim

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
FAKE_PREFIX = "fake_"


def cell_seed(master, *coords) -> int:
    """Stable 63-bit seed from the master seed and a cell's coordinates."""
    digest = hashlib.sha256(repr((int(master),) + tuple(coords)).encode()).digest()
    return int.from_bytes(digest[:8], "little") & (2**63 - 1)


def build_attacker(kind, params, train, budget):
    """Callable ``(train, budget, seed) -> FakeProfileBatch`` for a validated attacker spec."""
    if kind == "none":
        return lambda tr, b, s: attacks.null_attack(tr.num_items, s)
    if kind in ("random", "average", "bandwagon"):
        stats = ds.stats(train)
        fn = {"random": attacks.random_attack, "average": attacks.average_attack}.get(kind)
        if kind == "bandwagon":
            n_sel = params.get("num_selected", 1)
            return lambda tr, b, s: attacks.bandwagon_attack(stats, b, s, n_sel)
        return lambda tr, b, s: fn(stats, b, s)
    if kind == "segment":
        return lambda tr, b, s: attacks.segment_attack(b, s, tr.num_items)
    if kind == "aia":
        cfg = attacks.AIAConfig(**params)
        return lambda tr, b, s: attacks.aia_attack(tr, b, cfg, s)
    if kind == "legup":
        params = dict(params)
        in_segment = params.pop("in_segment", False)
        params["dis_hidden"] = tuple(params["dis_hidden"])
        if in_segment:
            users = legup.in_segment_users(train, budget.selected)
            if users.size == 0:
                raise ValueError("no in-segment users for the selected items; "
                                 "choose different selected items")
            params["segment_users"] = tuple(int(u) for u in users)
        cfg = legup.LegUPConfig(**params)
        return lambda tr, b, s: legup.legup_attack(tr, b, cfg, s)
    raise ValueError(f"unknown attacker kind {kind!r}")


def _job_logger(path):
    logger = logging.getLogger(f"shillkit.job.{path}")
    logger.setLevel(logging.INFO)
    logger.propagate = False
    handler = logging.FileHandler(path, mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(message)s"))
    logger.addHandler(handler)
    return logger, handler


def _close(logger, handler):
    logger.removeHandler(handler)
    handler.close()


# Jobs run in worker processes; each returns (key, ok, payload).

def _attack_job(key, spec, train, budget, seed, detector_m, detector_k, log_path):
    logger, handler = _job_logger(log_path)
    try:
        logger.info("attack %s target=%s seed=%d", spec.label, budget.targets, seed)
        attacker = build_attacker(spec.kind, spec.params, train, budget)
        start = time.perf_counter()
        batch = attacker(train, budget, seed)
        elapsed = time.perf_counter() - start
        history = {k: [float(x) for x in v] for k, v in batch.info.get("history", {}).items()}
        if "loss" in batch.info:
            history = {"loss": [float(x) for x in batch.info["loss"]]}
        for name, curve in history.items():
            logger.info("%s: %s", name, " ".join(f"{x:.4f}" for x in curve))
        precision = recall = 0.0
        if len(batch):
            m = min(detector_m, train.num_users + len(batch))
            polluted = evaluation.inject(train, batch)
            truth = set(range(train.num_users, polluted.num_users))
            flagged = evaluation.detect(polluted, m, detector_k)
            precision, recall = evaluation.precision_recall(flagged, truth)
        logger.info("generated %d rows in %.2fs; detector precision=%.4f recall=%.4f",
                    len(batch), elapsed, precision, recall)
        return key, True, {"rows": batch.rows, "history": history, "precision": precision,
                           "recall": recall, "seconds": elapsed}
    except Exception:
        logger.error("failed:\n%s", traceback.format_exc())
        return key, False, traceback.format_exc()
    finally:
        _close(logger, handler)


def _victim_job(key, spec, matrix, target, seed, top_k, num_real, log_path):
    logger, handler = _job_logger(log_path)
    try:
        start = time.perf_counter()
        victim = fit_victim(spec.kind, matrix, seed, **spec.params)
        hr = evaluation.hit_ratio(victim, matrix, target, top_k, num_real=num_real)
        elapsed = time.perf_counter() - start
        logger.info("victim %s target=%d seed=%d users=%d hr@%d=%.6f (%.2fs)", spec.label, target,
                    seed, matrix.num_users, top_k, hr, elapsed)
        return key, True, {"hr": hr, "seconds": elapsed}
    except Exception:
        logger.error("failed:\n%s", traceback.format_exc())
        return key, False, traceback.format_exc()
    finally:
        _close(logger, handler)


def _execute(jobs, parallelism):
    """Run ``(fn, args)`` jobs serially or on a process pool; results keyed by job key."""
    if parallelism <= 1:
        return {r[0]: r[1:] for r in (fn(*args) for fn, args in jobs)}
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        futures = [pool.submit(fn, *args) for fn, args in jobs]
        return {r[0]: r[1:] for r in (f.result() for f in futures)}


def write_fakes(batch, train, path):
    """Fake rows as ``user,item,rating`` with ``fake_`` user IDs and the train item IDs."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user", "item", "rating"])
        for uid, row in zip(batch.ids(FAKE_PREFIX), batch.rows):
            for i in np.flatnonzero(row):
                writer.writerow([uid, train.item_ids[i], int(row[i])])


def run_experiment(cfg, echo=print) -> int:
    """Execute the attackers x victims x targets grid; returns the exit status."""
    out = Path(cfg.output_dir)
    logs = out / "logs"
    logs.mkdir(parents=True, exist_ok=True)
    train = cfg.split.train
    label = cfg.dataset_label
    with open(out / "config.json", "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=1, default=lambda o: o.__dict__, sort_keys=True)

    # phase 1: fake batches per (attacker, target) and clean baselines per (victim, target)
    jobs = []
    for spec in cfg.attackers:
        for t in cfg.targets:
            seed = cell_seed(cfg.seed, "attack", label, spec.label, t)
            jobs.append((_attack_job, (("attack", spec.label, t), spec, train, cfg.budget(t), seed,
                                       cfg.detector_m, cfg.detector_k,
                                       str(logs / f"attack__{spec.label}__{t}.log"))))
    vseeds = {(v.label, t): cell_seed(cfg.seed, "victim", label, v.label, t)
              for v in cfg.victims for t in cfg.targets}
    for v in cfg.victims:
        for t in cfg.targets:
            jobs.append((_victim_job, (("before", v.label, t), v, train, t, vseeds[v.label, t],
                                       cfg.top_k, None, str(logs / f"clean__{v.label}__{t}.log"))))
    results = _execute(jobs, cfg.parallelism)

    # phase 2: refit each victim from scratch on each polluted matrix
    jobs = []
    (out / "fakes").mkdir(exist_ok=True)
    for a in cfg.attackers:
        for t in cfg.targets:
            ok, payload = results[("attack", a.label, t)]
            if not ok:
                continue
            batch = attacks.FakeProfileBatch(payload["rows"], a.label, 0)
            write_fakes(batch, train, out / "fakes" / f"{a.label}__{t}.csv")
            polluted = evaluation.inject(train, batch)
            for v in cfg.victims:
                jobs.append((_victim_job, (("after", a.label, v.label, t), v, polluted, t,
                                           vseeds[v.label, t], cfg.top_k, train.num_users,
                                           str(logs / f"{a.label}__{v.label}__{t}.log"))))
    results.update(_execute(jobs, cfg.parallelism))

    reports, failed = [], []
    for a in cfg.attackers:
        for v in cfg.victims:
            for t in cfg.targets:
                parts = [("attack", a.label, t), ("before", v.label, t),
                         ("after", a.label, v.label, t)]
                status = [results.get(p, (False, "not run")) for p in parts]
                if not all(ok for ok, _ in status):
                    failed.append(f"{a.label}/{v.label}/{t}")
                    continue
                att, before, after = (payload for _, payload in status)
                reports.append(evaluation.ExperimentReport(
                    label, a.label, v.label, int(t), before["hr"], after["hr"],
                    att["precision"], att["recall"], len(att["rows"]),
                    cell_seed(cfg.seed, "attack", label, a.label, t), vseeds[v.label, t],
                    att["seconds"] + after["seconds"], att["history"]))
    evaluation.write_reports(reports, out / "report.csv", out / "loss_curves.json")
    echo(f"wrote {len(reports)} report rows to {out / 'report.csv'}")
    if failed:
        echo(f"{len(failed)} cell(s) failed: {', '.join(failed)} (see {logs})", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def summarize(paths):
    """Best / top-2 counts per attacker, ranking attackers by hr_after in each cell.

    Ties share the better rank (competition ranking).
    """
    reports = []
    for p in paths:
        p = Path(p)
        files = sorted(p.rglob("report.csv")) if p.is_dir() else [p]
        for f in files:
            reports.extend(evaluation.read_reports(f))
    cells = {}
    for r in reports:
        cells.setdefault((r.dataset, r.victim, r.target), {})[r.attacker] = r.hr_after
    counts = {r.attacker: [0, 0] for r in reports}
    for scores in cells.values():
        for attacker, hr in scores.items():
            rank = 1 + sum(other > hr for other in scores.values())
            counts[attacker][0] += rank == 1
            counts[attacker][1] += rank <= 2
    return {a: {"best": c[0], "top2": c[1]} for a, c in sorted(counts.items())}, len(cells)


def _load_matrices(paths):
    """Load and merge rating files on external IDs (later files may add users and items)."""
    triples = []
    for p in paths:
        m = ds.load_matrix(p)
        triples.extend((m.user_ids[u], m.item_ids[i], int(r))
                       for u, i, r in zip(m.users, m.items, m.ratings))
    users = list(dict.fromkeys(t[0] for t in triples))
    items = ds.sort_ids(set(t[1] for t in triples))
    uidx = {u: k for k, u in enumerate(users)}
    iidx = {i: k for k, i in enumerate(items)}
    return ds.RatingMatrix(np.array([uidx[t[0]] for t in triples], dtype=np.int64),
                           np.array([iidx[t[1]] for t in triples], dtype=np.int64),
                           np.array([t[2] for t in triples], dtype=np.int64), users, items)


def _parser():
    parser = argparse.ArgumentParser(prog="shillkit", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("validate", help="check a config and print it with defaults filled")
    p.add_argument("config")
    p = sub.add_parser("run", help="run an experiment grid")
    p.add_argument("config")
    p = sub.add_parser("summarize", help="best/top-2 counts per attacker")
    p.add_argument("paths", nargs="+", help="run directories or report.csv files")
    p = sub.add_parser("detect", help="flag likely fake users with the PCA detector")
    p.add_argument("matrix", nargs="+", help="rating files, merged on user/item IDs")
    p.add_argument("--m", type=int, required=True, help="number of users to flag")
    p.add_argument("--k", type=int, default=3, help="principal components")
    p = sub.add_parser("project", help="export 2-D PCA coordinates of every user")
    p.add_argument("matrix", nargs="+")
    p.add_argument("--out", required=True)
    return parser


def _echo(*args, file=None):
    print(*args, file=file or sys.stdout)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.verb in ("validate", "run"):
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            for err in exc.errors:
                _echo(f"error: {err}", file=sys.stderr)
            return EXIT_CONFIG
        if args.verb == "validate":
            _echo(json.dumps(cfg.to_dict(), indent=1, default=lambda o: o.__dict__))
            return EXIT_OK
        return run_experiment(cfg, _echo)
    if args.verb == "summarize":
        try:
            table, num_cells = summarize(args.paths)
        except (OSError, KeyError, ValueError) as exc:
            _echo(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        writer = csv.writer(sys.stdout)
        writer.writerow(["attacker", "best", "top2", "cells"])
        for attacker, c in table.items():
            writer.writerow([attacker, c["best"], c["top2"], num_cells])
        return EXIT_OK
    try:
        matrix = _load_matrices(args.matrix)
    except (OSError, ds.DatasetError) as exc:
        _echo(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    labels = [str(u).startswith(FAKE_PREFIX) for u in matrix.user_ids]
    if args.verb == "detect":
        try:
            flagged = evaluation.detect(matrix, args.m, args.k)
        except evaluation.EvaluationError as exc:
            _echo(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        for u in sorted(flagged):
            _echo(matrix.user_ids[u])
        truth = {u for u, fake in enumerate(labels) if fake}
        if truth:
            precision, recall = evaluation.precision_recall(flagged, truth)
            _echo(f"precision={precision:.4f} recall={recall:.4f}", file=sys.stderr)
        return EXIT_OK
    try:
        evaluation.export_projection(matrix, labels, args.out)
    except (OSError, evaluation.EvaluationError) as exc:
        _echo(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
