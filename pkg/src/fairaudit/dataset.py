"""Profile data model, corpus I/O, label binarization, splits, and synthetic data.

A corpus is an ordered list of :class:`Profile` records. Each profile carries
five text fields in a fixed canonical order (the ``Combined`` field is the
newline-joined concatenation of the other four when not supplied), a map of
decision-stage labels, and a final outcome string.

File formats
------------
* JSONL: one object per line with keys ``id``, ``gcea``, ``gceo``, ``piq``,
  ``leadership``, ``combined`` (optional), ``labels`` (object with optional
  ``sl``/``ar``/``of``; unknown keys are preserved verbatim), ``type``. UTF-8.
* CSV: columns ``id,gcea,gceo,piq,leadership,combined,sl,ar,of,type`` with
  RFC-4180 quoting for embedded newlines. Empty cells mean "absent".
* Latent sidecar: JSONL of ``{id, q, group, field_q}``.
* Split assignment: JSON ``{seed, ratios, train, validation, test}``.
* Decision vector: JSON ``{source, index_order, values}``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._util import canonical_json
from .errors import (
    AlignmentError,
    IntegrityError,
    MissingLabelError,
    MissingLatentError,
    ParseError,
    SizeError,
)

FIELD_ORDER = ("GCEA", "GCEO", "PIQ", "Leadership", "Combined")
JUDGED_FIELDS = FIELD_ORDER[:4]
STAGES = ("SL", "AR", "OF")
OUTCOME_STAGE = "Type"

POSITIVE_LABEL = {"SL": "Shortlisted", "AR": "Recommended", "OF": "Offered", "Type": "Offered"}
NEGATIVE_LABEL = {
    "SL": "Not Shortlisted",
    "AR": "Not Recommended",
    "OF": "Not Offered",
    "Type": "Not Offered",
}

_JSON_FIELD_KEYS = ("gcea", "gceo", "piq", "leadership")
_STAGE_BY_JSON_KEY = {"sl": "SL", "ar": "AR", "of": "OF"}
_JSON_KEY_BY_STAGE = {v: k for k, v in _STAGE_BY_JSON_KEY.items()}


def derive_combined(fields: dict[str, str]) -> str:
    return "\n".join(fields.get(name, "") for name in JUDGED_FIELDS)


@dataclass(frozen=True)
class Profile:
    """One applicant record: text fields plus decision labels."""

    id: str
    fields: dict[str, str]
    labels: dict[str, str] = field(default_factory=dict)
    outcome: str | None = None

    def __post_init__(self):
        if not self.id:
            raise IntegrityError("profile id must be nonempty")
        filled = {name: self.fields.get(name, "") for name in FIELD_ORDER}
        if not filled["Combined"]:
            filled["Combined"] = derive_combined(filled)
        object.__setattr__(self, "fields", filled)


@dataclass(frozen=True, eq=False)
class DecisionVector:
    """Binary decisions from one source, aligned to an explicit id order."""

    source: str
    values: np.ndarray
    index_order: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int64)
        if values.ndim != 1 or len(values) != len(self.index_order):
            raise AlignmentError(
                f"{self.source}: values shape {values.shape} does not match "
                f"{len(self.index_order)} ids"
            )
        if values.size and not np.isin(values, (0, 1)).all():
            raise IntegrityError(f"{self.source}: decision values must be 0 or 1")
        if len(set(self.index_order)) != len(self.index_order):
            raise IntegrityError(f"{self.source}: duplicate ids in index_order")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "index_order", tuple(self.index_order))

    def __len__(self) -> int:
        return len(self.index_order)

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "index_order": list(self.index_order),
            "values": [int(v) for v in self.values],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DecisionVector":
        return cls(obj["source"], np.asarray(obj["values"]), tuple(obj["index_order"]))


@dataclass(frozen=True)
class SplitAssignment:
    """Disjoint train/validation/test id partitions plus their provenance."""

    train: tuple[str, ...]
    validation: tuple[str, ...]
    test: tuple[str, ...]
    seed: int
    ratios: tuple[float, float, float]

    def subsets(self) -> dict[str, tuple[str, ...]]:
        return {"train": self.train, "validation": self.validation, "test": self.test}

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "ratios": list(self.ratios),
            "train": list(self.train),
            "validation": list(self.validation),
            "test": list(self.test),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SplitAssignment":
        return cls(
            tuple(obj["train"]),
            tuple(obj["validation"]),
            tuple(obj["test"]),
            int(obj["seed"]),
            tuple(float(r) for r in obj["ratios"]),
        )


@dataclass(frozen=True)
class LatentRecord:
    """Hidden generative state for one synthetic profile."""

    q: float
    group: int
    field_q: dict[str, float]


@dataclass(frozen=True)
class RaterConfig:
    """Parameters of the simulated rater panels.

    ``bias_shift`` maps a latent group to a threshold shift applied to every
    stage for members of that group: a positive shift makes raters stricter
    with that group, lowering its positive rate.
    """

    quality_weights: dict[str, float] = field(
        default_factory=lambda: {name: 1.0 for name in JUDGED_FIELDS}
    )
    noise_sigma: float = 0.25
    bias_shift: dict[int, float] = field(default_factory=dict)
    stage_thresholds: tuple[float, float, float] = (0.4, 0.5, 0.6)
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        sl, ar, of = self.stage_thresholds
        if not (sl <= ar <= of):
            raise ValueError("stage thresholds must be nondecreasing (SL <= AR <= OF)")
        weights = [self.quality_weights.get(name, 0.0) for name in JUDGED_FIELDS]
        if any(w < 0 for w in weights) or not any(w > 0 for w in weights):
            raise ValueError("quality_weights must be nonnegative and not all zero")


# ---------------------------------------------------------------------------
# corpus I/O


def _profile_from_record(obj: dict, line: int) -> Profile:
    if not isinstance(obj, dict):
        raise ParseError("record is not an object", line)
    pid = obj.get("id")
    if not isinstance(pid, str) or not pid:
        raise ParseError("missing or empty 'id'", line)
    fields = {}
    any_text = False
    for name, key in zip(JUDGED_FIELDS, _JSON_FIELD_KEYS):
        value = obj.get(key, "")
        if value is None:
            value = ""
        if not isinstance(value, str):
            raise ParseError(f"field {key!r} must be a string", line)
        any_text = any_text or bool(value)
        fields[name] = value
    combined = obj.get("combined", "")
    if combined:
        if not isinstance(combined, str):
            raise ParseError("field 'combined' must be a string", line)
        fields["Combined"] = combined
        any_text = True
    if not any_text:
        raise ParseError(f"record {pid!r} carries no text fields", line)
    labels: dict[str, str] = {}
    raw_labels = obj.get("labels", {})
    if raw_labels is None:
        raw_labels = {}
    if not isinstance(raw_labels, dict):
        raise ParseError("'labels' must be an object", line)
    for key, value in raw_labels.items():
        if not isinstance(value, str):
            raise ParseError(f"label {key!r} must be a string", line)
        labels[_STAGE_BY_JSON_KEY.get(key, key)] = value
    outcome = obj.get("type")
    if outcome is not None and not isinstance(outcome, str):
        raise ParseError("'type' must be a string", line)
    return Profile(pid, fields, labels, outcome)


def _check_unique_ids(profiles: list[Profile]) -> None:
    seen: set[str] = set()
    for p in profiles:
        if p.id in seen:
            raise IntegrityError(f"duplicate profile id {p.id!r}")
        seen.add(p.id)


def load_corpus(path, format: str | None = None) -> list[Profile]:
    """Load profiles from JSONL or CSV, in file order.

    The format is inferred from the extension unless given explicitly.
    """
    path = str(path)
    if format is None:
        format = "csv" if path.endswith(".csv") else "jsonl"
    if format not in ("jsonl", "csv"):
        raise ValueError(f"unknown corpus format {format!r}")
    profiles: list[Profile] = []
    if format == "jsonl":
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid JSON ({exc.msg})", line_no) from exc
                profiles.append(_profile_from_record(obj, line_no))
    else:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "id" not in reader.fieldnames:
                raise ParseError("CSV must have a header row including 'id'", 1)
            for row_no, row in enumerate(reader, start=2):
                obj = {
                    "id": row.get("id") or "",
                    "combined": row.get("combined") or "",
                    "labels": {
                        key: row[key]
                        for key in ("sl", "ar", "of")
                        if row.get(key)
                    },
                    "type": row.get("type") or None,
                }
                for key in _JSON_FIELD_KEYS:
                    obj[key] = row.get(key) or ""
                profiles.append(_profile_from_record(obj, row_no))
    _check_unique_ids(profiles)
    return profiles


def _profile_to_record(p: Profile) -> dict:
    labels = {}
    for stage, value in p.labels.items():
        labels[_JSON_KEY_BY_STAGE.get(stage, stage)] = value
    record = {
        "id": p.id,
        "gcea": p.fields["GCEA"],
        "gceo": p.fields["GCEO"],
        "piq": p.fields["PIQ"],
        "leadership": p.fields["Leadership"],
        "combined": p.fields["Combined"],
        "labels": labels,
    }
    if p.outcome is not None:
        record["type"] = p.outcome
    return record


def save_corpus(profiles: list[Profile], path, format: str | None = None) -> None:
    """Write profiles in canonical form; ``load_corpus`` round-trips it."""
    path = str(path)
    if format is None:
        format = "csv" if path.endswith(".csv") else "jsonl"
    if format == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for p in profiles:
                fh.write(canonical_json(_profile_to_record(p)))
                fh.write("\n")
    elif format == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["id", "gcea", "gceo", "piq", "leadership", "combined", "sl", "ar", "of", "type"]
            )
            for p in profiles:
                writer.writerow(
                    [
                        p.id,
                        p.fields["GCEA"],
                        p.fields["GCEO"],
                        p.fields["PIQ"],
                        p.fields["Leadership"],
                        p.fields["Combined"],
                        p.labels.get("SL", ""),
                        p.labels.get("AR", ""),
                        p.labels.get("OF", ""),
                        p.outcome or "",
                    ]
                )
    else:
        raise ValueError(f"unknown corpus format {format!r}")


# ---------------------------------------------------------------------------
# labels


def binarize_labels(profiles: list[Profile], stage: str, strict: bool = False) -> DecisionVector:
    """Map one stage's categorical labels to a 0/1 vector in profile order.

    The stage's positive token ("Shortlisted", "Recommended", or "Offered")
    maps to 1 and anything else to 0. With ``strict=True`` a label that is
    neither the positive token nor the canonical negative raises instead.
    ``stage="Type"`` reads the outcome field.
    """
    if stage not in POSITIVE_LABEL:
        raise ValueError(f"unknown stage {stage!r}; expected one of {sorted(POSITIVE_LABEL)}")
    raw: list[str | None] = []
    for p in profiles:
        raw.append(p.outcome if stage == OUTCOME_STAGE else p.labels.get(stage))
    missing = [p.id for p, value in zip(profiles, raw) if value is None]
    if missing:
        raise MissingLabelError(stage, missing)
    positive = POSITIVE_LABEL[stage]
    if strict:
        allowed = {positive, NEGATIVE_LABEL[stage]}
        bad = [p.id for p, value in zip(profiles, raw) if value not in allowed]
        if bad:
            raise IntegrityError(
                f"stage {stage!r}: unrecognized labels in strict mode for ids {bad[:10]}"
            )
    values = np.array([1 if value == positive else 0 for value in raw], dtype=np.int64)
    prefix = "truth" if stage == OUTCOME_STAGE else "human"
    return DecisionVector(f"{prefix}:{stage}", values, tuple(p.id for p in profiles))


def attach_stage_labels(
    profiles: list[Profile], decisions: dict[str, DecisionVector]
) -> list[Profile]:
    """Return new profiles with stage labels set from decision vectors."""
    by_id = {p.id: p for p in profiles}
    values: dict[str, dict[str, str]] = {pid: {} for pid in by_id}
    for stage, vector in decisions.items():
        if stage not in POSITIVE_LABEL:
            raise ValueError(f"unknown stage {stage!r}")
        for pid, v in zip(vector.index_order, vector.values):
            values[pid][stage] = POSITIVE_LABEL[stage] if v else NEGATIVE_LABEL[stage]
    out = []
    for p in profiles:
        labels = dict(p.labels)
        labels.update(values[p.id])
        out.append(Profile(p.id, dict(p.fields), labels, p.outcome))
    return out


# ---------------------------------------------------------------------------
# splits


def _largest_remainder(total: int, quotas: list[float]) -> list[int]:
    base = [math.floor(quota) for quota in quotas]
    remainder = total - sum(base)
    fractions = sorted(
        range(len(quotas)), key=lambda i: (-(quotas[i] - base[i]), i)
    )
    for i in fractions[:remainder]:
        base[i] += 1
    return base


def split_corpus(
    profiles: list[Profile],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
    stratify_on: str | None = None,
) -> SplitAssignment:
    """Deterministic seeded partition into train/validation/test.

    Sizes follow the floor rule: ``|train| = floor(r0*N)``,
    ``|validation| = floor(r1*N)``, remainder to test. With ``stratify_on``
    set, positives of that stage are apportioned by largest remainder so each
    split's positive rate stays within ``1/|split|`` of the corpus rate.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError("ratios must be three nonnegative fractions")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)!r}")
    n = len(profiles)
    if n < 3:
        raise SizeError(f"need at least 3 profiles to split, got {n}")
    _check_unique_ids(profiles)
    n_train = math.floor(ratios[0] * n)
    n_val = math.floor(ratios[1] * n)
    n_test = n - n_train - n_val
    sizes = (n_train, n_val, n_test)
    if min(sizes) < 1:
        raise SizeError(
            f"corpus of {n} cannot give every split at least one member under ratios {ratios}"
        )
    ids = [p.id for p in profiles]
    rng = np.random.default_rng(seed)
    if stratify_on is None:
        perm = rng.permutation(n)
        shuffled = [ids[i] for i in perm]
        parts = (
            shuffled[:n_train],
            shuffled[n_train : n_train + n_val],
            shuffled[n_train + n_val :],
        )
    else:
        stage_values = binarize_labels(profiles, stratify_on).values
        pos = [i for i in range(n) if stage_values[i] == 1]
        neg = [i for i in range(n) if stage_values[i] == 0]
        pos = [pos[i] for i in rng.permutation(len(pos))]
        neg = [neg[i] for i in rng.permutation(len(neg))]
        pos_counts = _largest_remainder(len(pos), [s * len(pos) / n for s in sizes])
        parts = []
        pos_at = neg_at = 0
        for size, n_pos in zip(sizes, pos_counts):
            n_neg = size - n_pos
            chunk = pos[pos_at : pos_at + n_pos] + neg[neg_at : neg_at + n_neg]
            pos_at += n_pos
            neg_at += n_neg
            parts.append([ids[i] for i in sorted(chunk)])
    return SplitAssignment(tuple(parts[0]), tuple(parts[1]), tuple(parts[2]), seed, tuple(ratios))


def save_split(split: SplitAssignment, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(split.to_dict()))
        fh.write("\n")


def load_split(path) -> SplitAssignment:
    with open(path, "r", encoding="utf-8") as fh:
        return SplitAssignment.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# synthetic corpus

_FIELD_NOISE = 0.08
_TOKENS_MIN, _TOKENS_MAX = 30, 60


def generate_synthetic_corpus(
    n: int, vocab_size: int = 400, seed: int = 0
) -> tuple[list[Profile], dict[str, LatentRecord]]:
    """Generate a seeded corpus whose token statistics track a latent quality.

    Recipe, fully determined by ``(n, vocab_size, seed)``:

    * each profile draws a base quality ``Uniform(0,1)`` and a group bit;
    * each judged field gets a field quality ``clip(base + N(0, 0.08), 0, 1)``
      and the profile quality ``q`` is the equal-weight average of the four;
    * field text is 30..60 tokens, each drawn from the upper half of the
      vocabulary with probability equal to the field quality, else the lower
      half, so positive-token frequency is an observable proxy for ``q``;
    * the outcome is "Offered" iff ``q >= 0.5``.

    The group bit never influences the text. Latents are returned separately
    (and persisted via :func:`save_latents`) so no learner can read them.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if vocab_size < 10:
        raise ValueError("vocab_size must be >= 10")
    rng = np.random.default_rng(seed)
    half = vocab_size // 2
    width = max(5, len(str(max(n - 1, 0))))
    ones = np.ones(len(JUDGED_FIELDS))
    profiles: list[Profile] = []
    latents: dict[str, LatentRecord] = {}
    for i in range(n):
        pid = f"P{i:0{width}d}"
        base = rng.uniform()
        group = int(rng.integers(0, 2))
        field_q = np.clip(base + rng.normal(0.0, _FIELD_NOISE, len(JUDGED_FIELDS)), 0.0, 1.0)
        q = float(np.average(field_q, weights=ones))
        fields = {}
        for name, fq in zip(JUDGED_FIELDS, field_q):
            length = int(rng.integers(_TOKENS_MIN, _TOKENS_MAX + 1))
            from_upper = rng.random(length) < fq
            offsets = rng.integers(0, half, length)
            tokens = [
                f"w{half + off:04d}" if up else f"w{off:04d}"
                for up, off in zip(from_upper, offsets)
            ]
            fields[name] = " ".join(tokens)
        outcome = POSITIVE_LABEL["Type"] if q >= 0.5 else NEGATIVE_LABEL["Type"]
        profiles.append(Profile(pid, fields, {}, outcome))
        latents[pid] = LatentRecord(
            q, group, {name: float(fq) for name, fq in zip(JUDGED_FIELDS, field_q)}
        )
    return profiles, latents


def save_latents(latents: dict[str, LatentRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pid, rec in latents.items():
            fh.write(
                canonical_json(
                    {"id": pid, "q": rec.q, "group": rec.group, "field_q": rec.field_q}
                )
            )
            fh.write("\n")


def load_latents(path) -> dict[str, LatentRecord]:
    latents: dict[str, LatentRecord] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", line_no) from exc
            latents[obj["id"]] = LatentRecord(
                float(obj["q"]), int(obj["group"]), dict(obj.get("field_q", {}))
            )
    return latents


# ---------------------------------------------------------------------------
# rater simulation


def simulate_raters(
    profiles: list[Profile],
    latents: dict[str, LatentRecord],
    config: RaterConfig,
) -> dict[str, DecisionVector]:
    """Simulate biased, noisy human panels for the SL/AR/OF funnel.

    Each stage draws its own judgment noise per profile (panels differ across
    stages). A profile passes a stage when its noisy weighted field quality
    clears that stage's threshold plus the profile's group bias shift, and
    decisions cascade: failing an earlier stage forces failure at all later
    ones.
    """
    missing = [p.id for p in profiles if p.id not in latents]
    if missing:
        raise MissingLatentError(
            f"latent records missing for ids: {', '.join(missing[:10])}"
        )
    weights = np.array([config.quality_weights.get(name, 0.0) for name in JUDGED_FIELDS])
    rng = np.random.default_rng(config.seed)
    n = len(profiles)
    noise = rng.normal(0.0, config.noise_sigma, (n, len(STAGES))) if n else np.zeros((0, 3))
    ids = tuple(p.id for p in profiles)
    decisions = np.zeros((n, len(STAGES)), dtype=np.int64)
    for i, p in enumerate(profiles):
        rec = latents[p.id]
        field_q = np.array([rec.field_q[name] for name in JUDGED_FIELDS])
        base = np.average(field_q, weights=weights)
        shift = config.bias_shift.get(rec.group, 0.0)
        passing = True
        for s, threshold in enumerate(config.stage_thresholds):
            score = base + noise[i, s]
            passing = passing and (score >= threshold + shift)
            decisions[i, s] = 1 if passing else 0
    return {
        stage: DecisionVector(f"human:{stage}", decisions[:, s], ids)
        for s, stage in enumerate(STAGES)
    }


def save_decisions(vector: DecisionVector, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(vector.to_dict()))
        fh.write("\n")


def load_decisions(path) -> DecisionVector:
    with open(path, "r", encoding="utf-8") as fh:
        return DecisionVector.from_dict(json.load(fh))
