"""Seeded, portable generation of every data split used in the evaluation.

All randomness flows through the package's portable PRNG so a (corpus, spec)
pair yields a byte-identical assignment on any platform. Strata are always
visited in lexicographic label order and shuffles are Fisher-Yates over
ascending row positions, which pins the full output to the seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .errors import LabelError, RangeError, StratumError
from .rng import Xoshiro256StarStar
from .store import Corpus

ROLE_SUPPORT = "support"
ROLE_VALIDATION = "validation"
ROLE_TEST = "test"
ROLE_EXCLUDED = "excluded"
ROLES = (ROLE_SUPPORT, ROLE_VALIDATION, ROLE_TEST, ROLE_EXCLUDED)

_DEFAULT_ROLES = {
    1: (ROLE_SUPPORT,),
    2: (ROLE_SUPPORT, ROLE_TEST),
    3: (ROLE_SUPPORT, ROLE_VALIDATION, ROLE_TEST),
}


@dataclass(frozen=True)
class SplitSpec:
    kind: str
    parameters: dict
    seed: int

    def to_json(self) -> str:
        return json.dumps(
            {"kind": self.kind, "parameters": self.parameters, "seed": self.seed},
            sort_keys=True,
            separators=(",", ":"),
        )


@dataclass
class SplitAssignment:
    """Per-sample roles plus the spec that produced them.

    For OOD-style splits the held-out checkpoint labels are carried
    explicitly so downstream code can tell in-domain validation/test samples
    from out-of-domain ones.
    """

    sample_ids: tuple[str, ...]
    roles: tuple[str, ...]
    provenance: SplitSpec
    ood_validation_checkpoints: tuple[str, ...] = ()
    ood_test_checkpoints: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        assert len(self.sample_ids) == len(self.roles)

    def rows_with_role(self, role: str) -> list[int]:
        return [i for i, r in enumerate(self.roles) if r == role]

    @property
    def ood_checkpoints(self) -> frozenset[str]:
        return frozenset(self.ood_validation_checkpoints) | frozenset(
            self.ood_test_checkpoints
        )

    def write_jsonl(self, path: Union[str, Path]) -> None:
        header = {
            "spec": json.loads(self.provenance.to_json()),
            "ood_validation_checkpoints": sorted(self.ood_validation_checkpoints),
            "ood_test_checkpoints": sorted(self.ood_test_checkpoints),
        }
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
            for sid, role in zip(self.sample_ids, self.roles):
                fh.write(
                    json.dumps(
                        {"sample_id": sid, "role": role},
                        sort_keys=True,
                        separators=(",", ":"),
                    )
                    + "\n"
                )

    @classmethod
    def read_jsonl(cls, path: Union[str, Path]) -> "SplitAssignment":
        with open(path, "r", encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            ids, roles = [], []
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                ids.append(obj["sample_id"])
                roles.append(obj["role"])
        spec = SplitSpec(**header["spec"])
        return cls(
            sample_ids=tuple(ids),
            roles=tuple(roles),
            provenance=spec,
            ood_validation_checkpoints=tuple(header.get("ood_validation_checkpoints", ())),
            ood_test_checkpoints=tuple(header.get("ood_test_checkpoints", ())),
        )


def _field_values(corpus: Corpus, field_name: str) -> list[str]:
    values = [rec.get(field_name) for rec in corpus.records]
    missing = [r.sample_id for r, v in zip(corpus.records, values) if v is None]
    if missing:
        raise LabelError(
            f"{len(missing)} samples have no {field_name!r} value",
            sample_ids=missing,
        )
    return values  # type: ignore[return-value]


def _strata(values: Sequence[str]) -> dict[str, list[int]]:
    out: dict[str, list[int]] = {}
    for i, v in enumerate(values):
        out.setdefault(v, []).append(i)
    return {k: out[k] for k in sorted(out)}


def _largest_remainder(total: int, ratios: Sequence[float]) -> list[int]:
    """Integer bucket sizes summing to total; ties go to the earlier bucket."""
    quotas = [total * r for r in ratios]
    sizes = [int(q) for q in quotas]
    leftover = total - sum(sizes)
    remainders = sorted(
        range(len(ratios)), key=lambda i: (-(quotas[i] - sizes[i]), i)
    )
    for i in remainders[:leftover]:
        sizes[i] += 1
    return sizes


def _check_ratios(ratios: Sequence[float]) -> None:
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise RangeError(f"ratios must sum to 1, got {sum(ratios)}")
    if any(r < 0 for r in ratios):
        raise RangeError("ratios must be non-negative")


def _ratio_assign(
    rng: Xoshiro256StarStar,
    strata: dict[str, list[int]],
    ratios: Sequence[float],
    roles_out: list[Optional[str]],
    bucket_roles: Sequence[str],
) -> None:
    n_buckets = sum(1 for r in ratios if r > 0)
    for label, rows in strata.items():
        if len(rows) < n_buckets:
            raise StratumError(
                f"stratum {label!r} has {len(rows)} samples, "
                f"needs at least {n_buckets}"
            )
        rows = list(rows)
        rng.shuffle(rows)
        sizes = _largest_remainder(len(rows), ratios)
        start = 0
        for size, role in zip(sizes, bucket_roles):
            for i in rows[start : start + size]:
                roles_out[i] = role
            start += size


def ratio_split(
    corpus: Corpus,
    ratios: Sequence[float],
    seed: int,
    stratify_by: str = "checkpoint",
    roles: Optional[Sequence[str]] = None,
) -> SplitAssignment:
    """Stratified ratio split with largest-remainder rounding per stratum."""
    _check_ratios(ratios)
    if roles is None:
        try:
            roles = _DEFAULT_ROLES[len(ratios)]
        except KeyError:
            raise RangeError(
                f"no default role names for {len(ratios)} ratio buckets; pass roles="
            )
    if len(roles) != len(ratios):
        raise RangeError("roles and ratios must have equal length")
    rng = Xoshiro256StarStar(seed)
    values = _field_values(corpus, stratify_by)
    assigned: list[Optional[str]] = [None] * len(corpus)
    _ratio_assign(rng, _strata(values), ratios, assigned, roles)
    spec = SplitSpec(
        kind="ratio_split",
        parameters={"ratios": list(ratios), "stratify_by": stratify_by, "roles": list(roles)},
        seed=seed,
    )
    return SplitAssignment(
        sample_ids=corpus.sample_ids, roles=tuple(assigned), provenance=spec
    )


def per_class_support(corpus: Corpus, n_per_class: int, seed: int) -> SplitAssignment:
    """At most n_per_class samples per class go to support, the rest to test.
    Classes smaller than n_per_class saturate (all samples in support)."""
    if n_per_class < 1:
        raise RangeError(f"n_per_class must be >= 1, got {n_per_class}")
    rng = Xoshiro256StarStar(seed)
    labels = [corpus.class_names[i] for i in corpus.labels.tolist()]
    assigned: list[Optional[str]] = [None] * len(corpus)
    for _, rows in _strata(labels).items():
        rows = list(rows)
        rng.shuffle(rows)
        take = min(n_per_class, len(rows))
        for i in rows[:take]:
            assigned[i] = ROLE_SUPPORT
        for i in rows[take:]:
            assigned[i] = ROLE_TEST
    spec = SplitSpec(
        kind="per_class_count",
        parameters={"n_per_class": n_per_class},
        seed=seed,
    )
    return SplitAssignment(
        sample_ids=corpus.sample_ids, roles=tuple(assigned), provenance=spec
    )


def ood_holdout(
    corpus: Corpus,
    per_dataset: int,
    seed: int,
    in_domain_ratios: Sequence[float] = (0.8, 0.1, 0.1),
) -> SplitAssignment:
    """Hold out per_dataset checkpoints from each dataset as out-of-domain.

    Held-out checkpoints are split half to validation and half to test with
    no overlap; remaining in-domain samples get a stratified ratio split
    (default 80:10:10 over support/validation/test).
    """
    if per_dataset < 0:
        raise RangeError(f"per_dataset must be >= 0, got {per_dataset}")
    _check_ratios(in_domain_ratios)
    rng = Xoshiro256StarStar(seed)
    datasets = _field_values(corpus, "dataset")
    checkpoints = _field_values(corpus, "checkpoint")

    ood: list[str] = []
    for dataset, rows in _strata(datasets).items():
        ckpts = sorted({checkpoints[i] for i in rows})
        if per_dataset > 0 and len(ckpts) <= per_dataset:
            raise StratumError(
                f"dataset {dataset!r} has {len(ckpts)} checkpoints, "
                f"needs more than {per_dataset} to hold {per_dataset} out"
            )
        rng.shuffle(ckpts)
        ood.extend(ckpts[:per_dataset])

    pool = list(ood)
    rng.shuffle(pool)
    half = len(pool) // 2
    ood_val = tuple(sorted(pool[:half]))
    ood_test = tuple(sorted(pool[half:]))

    assigned: list[Optional[str]] = [None] * len(corpus)
    val_set, test_set = set(ood_val), set(ood_test)
    in_rows: list[int] = []
    for i, ckpt in enumerate(checkpoints):
        if ckpt in val_set:
            assigned[i] = ROLE_VALIDATION
        elif ckpt in test_set:
            assigned[i] = ROLE_TEST
        else:
            in_rows.append(i)

    in_strata: dict[str, list[int]] = {}
    for i in in_rows:
        in_strata.setdefault(checkpoints[i], []).append(i)
    in_strata = {k: in_strata[k] for k in sorted(in_strata)}
    _ratio_assign(
        rng,
        in_strata,
        in_domain_ratios,
        assigned,
        (ROLE_SUPPORT, ROLE_VALIDATION, ROLE_TEST),
    )
    spec = SplitSpec(
        kind="ood_holdout",
        parameters={
            "per_dataset": per_dataset,
            "in_domain_ratios": list(in_domain_ratios),
        },
        seed=seed,
    )
    return SplitAssignment(
        sample_ids=corpus.sample_ids,
        roles=tuple(assigned),
        provenance=spec,
        ood_validation_checkpoints=ood_val,
        ood_test_checkpoints=ood_test,
    )


def leave_n_out(
    corpus: Corpus,
    group_by: str,
    n: Union[int, str],
    seed: int,
) -> SplitAssignment:
    """Hold n checkpoints (or "half", rounding down, min 1) out of every
    group; all their samples go to test, the rest to support."""
    if n == "half":
        per_group = None
    else:
        n = int(n)
        if n < 1:
            raise RangeError(f"n must be >= 1 or 'half', got {n}")
        per_group = n
    rng = Xoshiro256StarStar(seed)
    groups = _field_values(corpus, group_by)
    checkpoints = _field_values(corpus, "checkpoint")

    held: set[str] = set()
    for group, rows in _strata(groups).items():
        ckpts = sorted({checkpoints[i] for i in rows})
        take = per_group if per_group is not None else max(1, len(ckpts) // 2)
        if len(ckpts) <= take:
            raise StratumError(
                f"group {group!r} has {len(ckpts)} checkpoints, "
                f"needs more than {take} to hold {take} out"
            )
        rng.shuffle(ckpts)
        held.update(ckpts[:take])

    roles = tuple(
        ROLE_TEST if ckpt in held else ROLE_SUPPORT for ckpt in checkpoints
    )
    spec = SplitSpec(
        kind="leave_n_out",
        parameters={"group_by": group_by, "n": n},
        seed=seed,
    )
    return SplitAssignment(
        sample_ids=corpus.sample_ids,
        roles=roles,
        provenance=spec,
        ood_test_checkpoints=tuple(sorted(held)),
    )
