"""Greedy label grouping, layer assignment, and the per-stage dataset split.

Labels are clustered frequent-to-rare: each label joins the existing group
whose running-mean representation is most cosine-similar, provided that
similarity clears the threshold; otherwise it seeds a new group. Within a
group, the k-th most frequent member lands on layer min(k, L), so layer 1
holds the head of every group and deeper layers hold progressively rarer,
finer members.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import LabeledDataset, StageData
from .embeddings import EmbeddingTable, cosine_similarity
from .errors import DataFormatError


@dataclass
class PredicateGroup:
    """One semantic group; member order is frequency order."""

    members: list[str]
    representation: np.ndarray | None

    def __post_init__(self):
        if not self.members:
            raise ValueError("group must have at least one member")


@dataclass(frozen=True)
class PredicateTree:
    groups: list[PredicateGroup]
    layer_of: dict[str, int]
    num_layers: int
    threshold: float
    overrides: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self,
            "_group_index",
            {m: gi for gi, g in enumerate(self.groups) for m in g.members},
        )

    def group_index(self, label: str) -> int:
        try:
            return self._group_index[label]
        except KeyError:
            raise KeyError(f"label {label!r} not in tree") from None

    def layer(self, label: str) -> int:
        try:
            return self.layer_of[label]
        except KeyError:
            raise KeyError(f"label {label!r} not in tree") from None

    def labels(self) -> list[str]:
        return [m for g in self.groups for m in g.members]


def cluster_predicates(vocab_by_freq, table: EmbeddingTable, threshold: float):
    """Greedy single-pass grouping of (label, count) pairs.

    ``vocab_by_freq`` must already be sorted by count descending with ties
    broken lexicographically; the first label seeds group 1 and each later
    label joins the most similar group when that similarity reaches
    ``threshold``, updating the group representation to the running mean.
    """
    if not vocab_by_freq:
        raise ValueError("empty vocabulary")
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    for (a, ca), (b, cb) in zip(vocab_by_freq, vocab_by_freq[1:]):
        if ((-ca, a)) > ((-cb, b)):
            raise ValueError(
                f"vocabulary not sorted by count desc / name asc at {a!r} -> {b!r}"
            )

    groups: list[PredicateGroup] = []
    for label, _count in vocab_by_freq:
        emb = table.vector(label)
        if not groups:
            groups.append(PredicateGroup([label], emb.copy()))
            continue
        sims = [cosine_similarity(g.representation, emb) for g in groups]
        best = int(np.argmax(sims))
        if sims[best] >= threshold:
            g = groups[best]
            n = len(g.members)
            g.representation = (n * g.representation + emb) / (n + 1)
            g.members.append(label)
        else:
            groups.append(PredicateGroup([label], emb.copy()))
    return groups


def build_layers(
    groups,
    counts,
    num_layers: int,
    overrides=None,
    rare_singleton_ratio: float = 0.01,
    threshold: float = 0.70,
) -> PredicateTree:
    """Assign each label a layer in 1..num_layers.

    Rank k within a group maps to layer min(k, num_layers). A singleton group
    whose count falls below ``rare_singleton_ratio`` times the median count of
    layer-1 labels is forced to the last layer; explicit overrides win last.
    """
    if num_layers < 1:
        raise ValueError("num_layers must be >= 1")
    overrides = dict(overrides or {})

    layer_of: dict[str, int] = {}
    for g in groups:
        for rank, member in enumerate(g.members, start=1):
            if member in layer_of:
                raise ValueError(f"label {member!r} appears in more than one group")
            layer_of[member] = min(rank, num_layers)

    head_counts = [counts[g.members[0]] for g in groups]
    head_median = float(np.median(head_counts))
    for g in groups:
        if len(g.members) == 1:
            lone = g.members[0]
            if counts[lone] < rare_singleton_ratio * head_median:
                layer_of[lone] = num_layers

    for label, forced in overrides.items():
        if label not in layer_of:
            raise ValueError(f"override for unknown label {label!r}")
        if not 1 <= forced <= num_layers:
            raise ValueError(
                f"override layer {forced} for {label!r} outside 1..{num_layers}"
            )
        layer_of[label] = forced

    return PredicateTree(
        groups=list(groups),
        layer_of=layer_of,
        num_layers=num_layers,
        threshold=threshold,
        overrides=overrides,
    )


def recompute_representations(groups, table: EmbeddingTable) -> None:
    """Rebuild every group representation as the exact mean of member vectors."""
    for g in groups:
        g.representation = np.mean([table.vector(m) for m in g.members], axis=0)


def tree_from_parent_map(parent, counts, num_layers: int, all_classes=None) -> PredicateTree:
    """Build a tree from a known coarse->fine hierarchy.

    Each coarse class heads one group (rank 1 regardless of its observed
    count, since the hierarchy is ground truth); its children follow in
    descending count order. Classes without parents or children form
    singleton groups. Layers follow the usual rank rule.
    """
    children: dict[str, list[str]] = {}
    for fine, coarse in parent.items():
        children.setdefault(coarse, []).append(fine)

    if all_classes is None:
        all_classes = list(children.keys()) + [f for fs in children.values() for f in fs]

    groups = []
    seen = set()
    for name in all_classes:
        if name in seen or name in parent:
            continue
        members = [name]
        kids = sorted(children.get(name, []), key=lambda c: (-counts.get(c, 0), c))
        members.extend(kids)
        seen.update(members)
        groups.append(PredicateGroup(members, None))

    layer_of = {
        m: min(rank, num_layers)
        for g in groups
        for rank, m in enumerate(g.members, start=1)
    }
    return PredicateTree(
        groups=groups, layer_of=layer_of, num_layers=num_layers, threshold=0.0
    )


def stage_split(dataset: LabeledDataset, tree: PredicateTree) -> list[StageData]:
    """Partition a dataset by the tree layer of each observed label.

    Stage k receives exactly the instances whose observed label sits on
    layer k; the stages are disjoint and their union is the dataset.
    """
    layer_of_index = np.empty(dataset.n_classes, dtype=np.int64)
    for i, name in enumerate(dataset.classes):
        if name not in tree.layer_of:
            raise KeyError(f"dataset class {name!r} missing from tree")
        layer_of_index[i] = tree.layer_of[name]

    observed_layers = layer_of_index[dataset.observed_labels]
    split_sets = {name: set(idx.tolist()) for name, idx in dataset.split.items()}

    stages = []
    for k in range(1, tree.num_layers + 1):
        indices = np.flatnonzero(observed_layers == k)
        members = {
            name: np.array([i for i in indices if i in split_sets[name]], dtype=np.int64)
            for name in ("train", "val", "test")
        }
        train_labels = dataset.observed_labels[members["train"]]
        bincounts = np.bincount(train_labels, minlength=dataset.n_classes)
        counts = {i: int(c) for i, c in enumerate(bincounts) if c > 0}
        stage_classes = tuple(np.flatnonzero(layer_of_index == k).tolist())
        prior_classes = tuple(np.flatnonzero(layer_of_index < k).tolist())
        stages.append(
            StageData(
                dataset=dataset,
                layer=k,
                indices=indices,
                train_indices=members["train"],
                val_indices=members["val"],
                test_indices=members["test"],
                counts=counts,
                stage_classes=stage_classes,
                prior_classes=prior_classes,
            )
        )
    return stages


def export_tree(tree: PredicateTree, counts, path) -> None:
    """Write the tab-separated tree listing (group, label, count, layer)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# layers\t{tree.num_layers}\n")
        fh.write(f"# threshold\t{repr(tree.threshold)}\n")
        fh.write("# group\tpredicate\tcount\tlayer\n")
        for gi, g in enumerate(tree.groups):
            for m in g.members:
                fh.write(f"{gi}\t{m}\t{counts.get(m, 0)}\t{tree.layer_of[m]}\n")


def load_tree_export(path) -> tuple[PredicateTree, dict[str, int]]:
    """Reload a tree export; representations are not stored, so groups carry None."""
    num_layers = None
    threshold = 0.0
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].strip().split("\t")
                if parts[0] == "layers":
                    num_layers = int(parts[1])
                elif parts[0] == "threshold":
                    threshold = float(parts[1])
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise DataFormatError(f"{path}:{lineno}: expected 4 tab-separated fields")
            rows.append((int(parts[0]), parts[1], int(parts[2]), int(parts[3])))
    if num_layers is None:
        raise DataFormatError(f"{path}: missing '# layers' header")

    groups_members: dict[int, list[str]] = {}
    layer_of: dict[str, int] = {}
    counts: dict[str, int] = {}
    for gi, label, count, layer in rows:
        groups_members.setdefault(gi, []).append(label)
        layer_of[label] = layer
        counts[label] = count
    groups = [PredicateGroup(groups_members[gi], None) for gi in sorted(groups_members)]
    tree = PredicateTree(
        groups=groups, layer_of=layer_of, num_layers=num_layers, threshold=threshold
    )
    return tree, counts
