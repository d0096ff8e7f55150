"""Challenge-format event ingestion, sentinel handling, and splits.

Input files are comma-separated UTF-8 text with a header row.  The train
schema is ``EventId``, the 30 feature columns below in order, ``Weight``,
``Label`` (label 's' or 'b'); the test schema is ``EventId`` plus the 30
features.  The literal value -999.0 marks a feature that is physically
undefined for an event (e.g. jet variables when no jet exists).

Standard deviations everywhere in this package divide by N (population
convention); the per-feature statistics table and the feature scaler
share this single setting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Prng
from .errors import SchemaError

SENTINEL = -999.0

# N in the denominator; shared by FeatureScaler and analysis.feature_stats
STD_DDOF = 0

FEATURE_NAMES = (
    "DER_mass_MMC",
    "DER_mass_transverse_met_lep",
    "DER_mass_vis",
    "DER_pt_h",
    "DER_deltaeta_jet_jet",
    "DER_mass_jet_jet",
    "DER_prodeta_jet_jet",
    "DER_deltar_tau_lep",
    "DER_pt_tot",
    "DER_sum_pt",
    "DER_pt_ratio_lep_tau",
    "DER_met_phi_centrality",
    "DER_lep_eta_centrality",
    "PRI_tau_pt",
    "PRI_tau_eta",
    "PRI_tau_phi",
    "PRI_lep_pt",
    "PRI_lep_eta",
    "PRI_lep_phi",
    "PRI_met",
    "PRI_met_phi",
    "PRI_met_sumet",
    "PRI_jet_num",
    "PRI_jet_leading_pt",
    "PRI_jet_leading_eta",
    "PRI_jet_leading_phi",
    "PRI_jet_subleading_pt",
    "PRI_jet_subleading_eta",
    "PRI_jet_subleading_phi",
    "PRI_jet_all_pt",
)

N_FEATURES = len(FEATURE_NAMES)


@dataclass
class Event:
    id: int
    features: np.ndarray
    weight: Optional[float] = None
    label: Optional[str] = None  # 's' or 'b'


class Dataset:
    """Column-major store of events; immutable after construction."""

    def __init__(self, ids, features, weights=None, labels=None, feature_names=None):
        self.ids = np.asarray(ids, dtype=np.int64)
        self.features = np.ascontiguousarray(features, dtype=np.float64)
        n = self.ids.shape[0]
        if self.features.shape[0] != n:
            raise ValueError(
                f"{n} ids but {self.features.shape[0]} feature rows"
            )
        self.weights = None if weights is None else np.asarray(weights, dtype=np.float64)
        self.labels = None if labels is None else np.asarray(labels, dtype=np.int8)
        if self.weights is not None and self.weights.shape[0] != n:
            raise ValueError("weights length does not match event count")
        if self.labels is not None and self.labels.shape[0] != n:
            raise ValueError("labels length does not match event count")
        if feature_names is None:
            feature_names = tuple(f"f{i}" for i in range(self.features.shape[1]))
        self.feature_names = tuple(feature_names)
        if len(self.feature_names) != self.features.shape[1]:
            raise ValueError("feature_names length does not match feature columns")

    def __len__(self) -> int:
        return self.ids.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def has_weights(self) -> bool:
        return self.weights is not None

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    def event(self, i: int) -> Event:
        return Event(
            id=int(self.ids[i]),
            features=self.features[i].copy(),
            weight=None if self.weights is None else float(self.weights[i]),
            label=None if self.labels is None else ("s" if self.labels[i] == 1 else "b"),
        )

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.ids[idx],
            self.features[idx],
            None if self.weights is None else self.weights[idx],
            None if self.labels is None else self.labels[idx],
            self.feature_names,
        )

    def class_weight_totals(self) -> tuple[float, float]:
        """(signal total, background total) of the importance weights."""
        if self.weights is None or self.labels is None:
            raise ValueError("weight totals need both weights and labels")
        sig = self.labels == 1
        return float(self.weights[sig].sum()), float(self.weights[~sig].sum())

    def signatures(self) -> np.ndarray:
        """Per-event missingness mask, bit i set iff feature i == -999.0."""
        bits = (self.features == SENTINEL).astype(np.int64)
        powers = np.left_shift(np.int64(1), np.arange(self.n_features, dtype=np.int64))
        return bits @ powers


def missingness_signature(event: Event) -> int:
    """Bitmask with bit i set iff features[i] equals the sentinel exactly."""
    mask = 0
    for i, value in enumerate(event.features):
        if value == SENTINEL:
            mask |= 1 << i
    return mask


def _parse_header(line: str, expected: list[str]) -> None:
    names = [c.strip() for c in line.rstrip("\r\n").split(",")]
    if len(names) != len(expected):
        raise SchemaError(
            f"expected {len(expected)} columns, found {len(names)}"
        )
    for got, want in zip(names, expected):
        if got != want:
            raise SchemaError(f"header mismatch: expected column {want!r}, found {got!r}")


def load_csv(path, schema: str = "train") -> Dataset:
    """Read a train- or test-schema event file into a Dataset.

    Row order is preserved.  Raises SchemaError for a malformed header,
    an unparseable number (with its line number), a label outside
    {'s', 'b'}, or a negative weight.
    """
    if schema not in ("train", "test"):
        raise ValueError(f"schema must be 'train' or 'test', got {schema!r}")
    is_train = schema == "train"
    expected = ["EventId", *FEATURE_NAMES]
    if is_train:
        expected += ["Weight", "Label"]

    ids: list[int] = []
    rows: list[list[float]] = []
    weights: list[float] = []
    labels: list[int] = []

    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.strip():
            raise SchemaError(f"{path}: missing header row")
        _parse_header(header, expected)
        n_cols = len(expected)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\r\n").split(",")
            if len(parts) != n_cols:
                raise SchemaError(
                    f"{path}:{lineno}: expected {n_cols} fields, found {len(parts)}"
                )
            try:
                ids.append(int(parts[0]))
                rows.append([float(v) for v in parts[1 : 1 + N_FEATURES]])
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: bad numeric field ({exc})") from None
            if is_train:
                try:
                    w = float(parts[1 + N_FEATURES])
                except ValueError as exc:
                    raise SchemaError(f"{path}:{lineno}: bad weight ({exc})") from None
                if w < 0.0:
                    raise SchemaError(f"{path}:{lineno}: negative weight {w}")
                label = parts[2 + N_FEATURES].strip()
                if label not in ("s", "b"):
                    raise SchemaError(f"{path}:{lineno}: label {label!r} not in {{'s','b'}}")
                weights.append(w)
                labels.append(1 if label == "s" else 0)

    features = np.array(rows, dtype=np.float64).reshape(len(ids), N_FEATURES)
    return Dataset(
        ids,
        features,
        weights if is_train else None,
        labels if is_train else None,
        FEATURE_NAMES,
    )


def partition_by_missingness(d: Dataset) -> list[tuple[int, Dataset]]:
    """Group events by missingness mask and drop each group's dead columns.

    Groups come back largest first (ties by ascending mask); the union of
    groups is the input, and no retained column in any group contains the
    sentinel.
    """
    masks = d.signatures()
    order: list[int] = []
    groups: dict[int, list[int]] = {}
    for i, m in enumerate(masks.tolist()):
        if m not in groups:
            groups[m] = []
            order.append(m)
        groups[m].append(i)

    ranked = sorted(groups.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    out = []
    for mask, idx in ranked:
        keep = [j for j in range(d.n_features) if not (mask >> j) & 1]
        sub = d.subset(idx)
        out.append(
            (
                mask,
                Dataset(
                    sub.ids,
                    sub.features[:, keep],
                    sub.weights,
                    sub.labels,
                    [d.feature_names[j] for j in keep],
                ),
            )
        )
    return out


@dataclass
class FeatureScaler:
    """Per-feature affine standardization fitted on training data.

    Sentinel entries are excluded from the fit; at apply time a valid
    entry x maps to (x - mean) / std and a sentinel entry maps to 0.0
    (the mean in standardized space).  Features that are constant or have
    no valid entries keep std 1 and are flagged.
    """

    means: np.ndarray
    stds: np.ndarray
    flagged: np.ndarray  # bool per feature: constant or no valid entries
    feature_names: tuple[str, ...]

    FORMAT = "exoticnet-scaler v1"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.FORMAT + "\n")
            for name, m, s, f in zip(self.feature_names, self.means, self.stds, self.flagged):
                fh.write(f"{name} {m:.17g} {s:.17g} {int(f)}\n")

    @classmethod
    def load(cls, path) -> "FeatureScaler":
        with open(path, "r", encoding="utf-8") as fh:
            magic = fh.readline().strip()
            if magic != cls.FORMAT:
                raise SchemaError(f"{path}: not a scaler file (got {magic!r})")
            names, means, stds, flags = [], [], [], []
            for line in fh:
                if not line.strip():
                    continue
                name, m, s, f = line.split()
                names.append(name)
                means.append(float(m))
                stds.append(float(s))
                flags.append(bool(int(f)))
        return cls(np.array(means), np.array(stds), np.array(flags), tuple(names))


def fit_standardizer(d: Dataset) -> FeatureScaler:
    n_feat = d.n_features
    means = np.zeros(n_feat)
    stds = np.ones(n_feat)
    flagged = np.zeros(n_feat, dtype=bool)
    for j in range(n_feat):
        col = d.features[:, j]
        valid = col[col != SENTINEL]
        if valid.size == 0:
            flagged[j] = True
            continue
        m = float(valid.mean())
        s = float(valid.std(ddof=STD_DDOF))
        means[j] = m
        if s > 0.0:
            stds[j] = s
        else:
            flagged[j] = True
    return FeatureScaler(means, stds, flagged, d.feature_names)


def apply_standardizer(scaler: FeatureScaler, d: Dataset) -> Dataset:
    if len(scaler.means) != d.n_features:
        raise ValueError(
            f"scaler has {len(scaler.means)} features, dataset has {d.n_features}"
        )
    valid = d.features != SENTINEL
    out = np.where(valid, (d.features - scaler.means) / scaler.stds, 0.0)
    return Dataset(d.ids, out, d.weights, d.labels, d.feature_names)


def _renormalize_class_weights(full: Dataset, part: Dataset) -> np.ndarray:
    """Scale part's weights so each class's total matches the full set's."""
    w = part.weights.copy()
    for cls in (0, 1):
        total = full.weights[full.labels == cls].sum()
        in_part = part.labels == cls
        part_total = w[in_part].sum()
        if part_total > 0.0:
            w[in_part] *= total / part_total
    return w


def split_stratified(
    d: Dataset, valid_fraction: float, rng: Prng
) -> tuple[Dataset, Dataset]:
    """Label-stratified random split with per-class weight renormalization.

    Both outputs get their class weight totals rescaled to the full set's,
    so a significance computed on either side is on the same footing as on
    the whole set.
    """
    if not 0.0 < valid_fraction < 1.0:
        raise ValueError(f"valid_fraction must be in (0, 1), got {valid_fraction}")
    if d.labels is None or d.weights is None:
        raise ValueError("stratified split needs labels and weights")

    valid_idx: list[np.ndarray] = []
    train_idx: list[np.ndarray] = []
    for cls in (1, 0):
        members = np.flatnonzero(d.labels == cls)
        perm = rng.permutation(len(members))
        k = int(round(valid_fraction * len(members)))
        valid_idx.append(members[perm[:k]])
        train_idx.append(members[perm[k:]])
    tr = d.subset(np.sort(np.concatenate(train_idx)))
    va = d.subset(np.sort(np.concatenate(valid_idx)))

    tr = Dataset(tr.ids, tr.features, _renormalize_class_weights(d, tr), tr.labels, tr.feature_names)
    va = Dataset(va.ids, va.features, _renormalize_class_weights(d, va), va.labels, va.feature_names)
    return tr, va


def subsample_stratified(d: Dataset, n: int, rng: Prng) -> Dataset:
    """Class-proportional subsample of n events, weights renormalized so
    per-class totals still equal the full set's (keeps AMS comparable)."""
    if not 0 < n <= len(d):
        raise ValueError(f"subsample size {n} out of range 1..{len(d)}")
    if d.labels is None or d.weights is None:
        raise ValueError("stratified subsample needs labels and weights")
    sig = np.flatnonzero(d.labels == 1)
    bkg = np.flatnonzero(d.labels == 0)
    n_sig = int(round(n * len(sig) / len(d)))
    n_sig = min(max(n_sig, 0), min(n, len(sig)))
    n_bkg = n - n_sig
    take_s = sig[rng.permutation(len(sig))[:n_sig]]
    take_b = bkg[rng.permutation(len(bkg))[:n_bkg]]
    sub = d.subset(np.sort(np.concatenate([take_s, take_b])))
    return Dataset(
        sub.ids, sub.features, _renormalize_class_weights(d, sub), sub.labels, sub.feature_names
    )


def save_csv(d: Dataset, path) -> None:
    """Write a Dataset back out in the challenge format (train schema when
    weights and labels are present, test schema otherwise)."""
    is_train = d.has_weights and d.has_labels
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        cols = ["EventId", *d.feature_names]
        if is_train:
            cols += ["Weight", "Label"]
        fh.write(",".join(cols) + "\n")
        for i in range(len(d)):
            parts = [str(int(d.ids[i]))]
            parts += [f"{v:.17g}" for v in d.features[i]]
            if is_train:
                parts.append(f"{d.weights[i]:.17g}")
                parts.append("s" if d.labels[i] == 1 else "b")
            fh.write(",".join(parts) + "\n")
