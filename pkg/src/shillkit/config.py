"""Experiment configuration: TOML file -> validated, fully defaulted grid.

Layout::

    [dataset]   path, format, label, min_user_ratings, test_fraction, split_seed
    [budget]    attack_size, profile_size, num_selected | selected,
                targets | (num_targets, target_seed)
    [[attackers]]  name, kind (defaults to name), any attacker hyperparameters
    [[victims]]    name, kind (defaults to name), any victim hyperparameters
    [detector]  m (defaults to attack_size), k
    [run]       output_dir, parallelism, seed, top_k

Validation gathers every problem before reporting.
"""
from __future__ import annotations

import dataclasses
import inspect
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import dataset as ds
from .attacks import AIAConfig
from .legup import LegUPConfig
from .victims import make_victim

OUTPUT_ENV = "SHILLKIT_OUTPUT_DIR"

ATTACKER_KINDS = ("none", "random", "average", "segment", "bandwagon", "aia", "legup")
OUT_OF_SCOPE = ("dcgan", "wgan")
VICTIM_KEYS = {"svd": "SVD", "nmf": "NMF", "slopeone": "SlopeOne", "uautorec": "UAutoRec",
               "iautorec": "IAutoRec", "neumf": "NeuMF"}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ComponentSpec:
    label: str
    kind: str
    params: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    dataset_path: str
    dataset_format: str
    dataset_label: str
    min_user_ratings: int
    test_fraction: float
    split_seed: int
    attack_size: int
    profile_size: int
    selected: tuple
    targets: tuple
    attackers: list
    victims: list
    detector_m: int
    detector_k: int
    output_dir: str
    parallelism: int
    seed: int
    top_k: int
    split: ds.DatasetSplit | None = field(default=None, repr=False, compare=False)

    def budget(self, target):
        return ds.AttackBudget(self.attack_size, self.profile_size, (int(target),),
                               tuple(self.selected))

    def to_dict(self):
        d = dataclasses.asdict(self)
        d.pop("split")
        return d


def load_toml(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _norm_key(kind):
    return str(kind).lower().replace("-", "").replace("_", "")


def _attacker_defaults(kind, params, errors, label):
    """Fill defaults for one attacker; unknown keys are errors."""
    params = dict(params)
    if kind == "legup":
        names = {f.name for f in dataclasses.fields(LegUPConfig)}
        in_segment = bool(params.pop("in_segment", False))
        bad = sorted(set(params) - names - {"segment_users"})
        if bad:
            errors.append(f"attacker {label!r}: unknown Leg-UP keys {bad}")
            return params
        if "dis_hidden" in params:
            params["dis_hidden"] = tuple(params["dis_hidden"])
        cfg = LegUPConfig(**params)
        errors.extend(f"attacker {label!r}: {e}" for e in cfg.validate())
        out = dataclasses.asdict(cfg)
        out["dis_hidden"] = list(out["dis_hidden"])
        out["in_segment"] = in_segment
        return out
    if kind == "aia":
        names = {f.name for f in dataclasses.fields(AIAConfig)}
        bad = sorted(set(params) - names)
        if bad:
            errors.append(f"attacker {label!r}: unknown AIA keys {bad}")
            return params
        return dataclasses.asdict(AIAConfig(**params))
    if kind == "bandwagon":
        bad = sorted(set(params) - {"num_selected"})
        if bad:
            errors.append(f"attacker {label!r}: unknown keys {bad}")
        return {"num_selected": int(params.get("num_selected", 1))}
    if params:
        errors.append(f"attacker {label!r}: {kind} takes no hyperparameters, got {sorted(params)}")
    return {}


def _components(raw_list, section, errors):
    specs = []
    if not isinstance(raw_list, list) or not raw_list:
        errors.append(f"[[{section}]] must list at least one entry")
        return specs
    seen = set()
    for pos, entry in enumerate(raw_list):
        entry = dict(entry)
        label = entry.pop("name", None)
        kind = entry.pop("kind", label)
        if label is None:
            errors.append(f"{section}[{pos}]: missing 'name'")
            continue
        if label in seen:
            errors.append(f"{section}: duplicate name {label!r}")
        seen.add(label)
        specs.append(ComponentSpec(str(label), str(kind), entry))
    return specs


def _check_victim(spec, errors):
    key = _norm_key(spec.kind)
    if key not in VICTIM_KEYS:
        errors.append(f"victim {spec.label!r}: unknown kind {spec.kind!r}")
        return
    spec.kind = VICTIM_KEYS[key]
    try:
        victim = make_victim(spec.kind)
        sig = inspect.signature(type(victim).__init__)
        allowed = set(sig.parameters) - {"self", "axis"}
        bad = sorted(set(spec.params) - allowed)
        if bad:
            errors.append(f"victim {spec.label!r}: unknown hyperparameters {bad}")
            return
        defaults = {k: p.default for k, p in sig.parameters.items()
                    if k in allowed and p.default is not inspect.Parameter.empty}
        defaults.update(spec.params)
        spec.params = {k: (list(v) if isinstance(v, tuple) else v) for k, v in defaults.items()}
        make_victim(spec.kind, **spec.params)
    except (TypeError, ValueError) as exc:
        errors.append(f"victim {spec.label!r}: {exc}")


def _int(section, key, default, errors, low=None):
    value = section.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        errors.append(f"{key} must be an integer, got {value!r}")
        return default
    if low is not None and value < low:
        errors.append(f"{key} must be >= {low}, got {value}")
    return value


def validate(raw: dict, base_dir=None, load_data: bool = True) -> ExperimentConfig:
    """Normalize a parsed config or raise :class:`ConfigError` with every problem found."""
    errors = []
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    known = {"dataset", "budget", "attackers", "victims", "detector", "run"}
    for extra in sorted(set(raw) - known):
        errors.append(f"unknown section [{extra}]")

    d = dict(raw.get("dataset", {}))
    path = d.get("path")
    if path is None:
        errors.append("dataset.path is required")
        resolved = None
    else:
        resolved = Path(path) if Path(path).is_absolute() else base / path
        if not resolved.exists():
            errors.append(f"dataset.path {str(resolved)!r} does not exist")
            resolved = None
    fmt = d.get("format", "csv" if str(path).endswith(".csv") else "movielens")
    if fmt not in ("movielens", "csv"):
        errors.append(f"dataset.format must be 'movielens' or 'csv', got {fmt!r}")
    label = str(d.get("label", Path(str(path)).parent.name or "dataset"))
    min_user = _int(d, "min_user_ratings", 0, errors, low=0)
    test_fraction = d.get("test_fraction", 0.1)
    if not isinstance(test_fraction, (int, float)) or not 0 < test_fraction < 1:
        errors.append("dataset.test_fraction must lie in (0, 1)")
    split_seed = _int(d, "split_seed", 0, errors)

    b = dict(raw.get("budget", {}))
    attack_size = _int(b, "attack_size", 50, errors)
    if attack_size is not None and attack_size <= 0:
        errors.append(f"budget.attack_size must be > 0, got {attack_size}")
    profile_size = _int(b, "profile_size", None, errors, low=1)
    num_selected = _int(b, "num_selected", 3, errors, low=0)
    selected = b.get("selected")
    targets = b.get("targets")
    num_targets = _int(b, "num_targets", 5, errors, low=1)
    target_seed = _int(b, "target_seed", 0, errors)
    if targets is not None and not targets:
        errors.append("budget.targets must be nonempty")

    attackers = _components(raw.get("attackers", []), "attackers", errors)
    for spec in attackers:
        key = _norm_key(spec.kind)
        if key in OUT_OF_SCOPE:
            errors.append(f"attacker {spec.label!r}: {spec.kind!r} is unsupported (out of scope)")
            continue
        if key not in ATTACKER_KINDS:
            errors.append(f"attacker {spec.label!r}: unknown kind {spec.kind!r}; "
                          f"expected one of {', '.join(ATTACKER_KINDS)}")
            continue
        spec.kind = key
        spec.params = _attacker_defaults(key, spec.params, errors, spec.label)
        no_selected = (not selected) if selected is not None else num_selected == 0
        if key == "segment" and no_selected:
            errors.append(f"attacker {spec.label!r}: segment attack needs selected items")
    victims = _components(raw.get("victims", []), "victims", errors)
    for spec in victims:
        _check_victim(spec, errors)

    det = dict(raw.get("detector", {}))
    detector_m = _int(det, "m", attack_size, errors, low=0)
    detector_k = _int(det, "k", 3, errors, low=1)

    r = dict(raw.get("run", {}))
    output_dir = os.environ.get(OUTPUT_ENV) or r.get("output_dir", "runs/experiment")
    output_dir = str(Path(output_dir) if Path(output_dir).is_absolute() else base / output_dir)
    parallelism = _int(r, "parallelism", 1, errors, low=1)
    seed = _int(r, "seed", 0, errors)
    top_k = _int(r, "top_k", 10, errors, low=1)

    split = None
    if not errors and load_data and resolved is not None:
        try:
            matrix = ds.load_matrix(resolved, fmt)
            if min_user:
                matrix = ds.filter_matrix(matrix, min_user)
            split = ds.split(matrix, float(test_fraction), split_seed)
            train = split.train
            if profile_size is None:
                profile_size = ds.average_profile_size(train)
            if targets is None:
                targets = ds.pick_targets(train, num_targets, target_seed)
            bad = [t for t in targets if not 0 <= t < train.num_items]
            if bad:
                errors.append(f"targets out of range: {bad}")
            if selected is None:
                selected = ds.pick_selected(train, num_selected, "popular", exclude=targets)
            elif set(targets) & set(selected):
                errors.append(f"targets overlap selected items: "
                              f"{sorted(set(targets) & set(selected))}")
            if detector_m is not None and detector_m > train.num_users + attack_size:
                errors.append("detector.m exceeds the number of users after injection")
        except (OSError, ds.DatasetError) as exc:
            errors.append(f"dataset: {exc}")
    if errors:
        raise ConfigError(errors)

    return ExperimentConfig(
        dataset_path=str(resolved), dataset_format=fmt, dataset_label=label,
        min_user_ratings=min_user, test_fraction=float(test_fraction), split_seed=split_seed,
        attack_size=attack_size, profile_size=profile_size,
        selected=tuple(int(s) for s in (selected or ())),
        targets=tuple(int(t) for t in (targets or ())),
        attackers=attackers, victims=victims, detector_m=detector_m, detector_k=detector_k,
        output_dir=output_dir, parallelism=parallelism, seed=seed, top_k=top_k, split=split)


def load_config(path, load_data: bool = True) -> ExperimentConfig:
    try:
        raw = load_toml(path)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    return validate(raw, Path(path).resolve().parent, load_data)
