"""Ranking quality metrics and profile-driven baseline rankers.

Rankings are scored with truncated average precision against binary
relevance sets, or with the mean of human subjective scores (0 to 15)
over the top K items.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from hubsel.stats import StatProfile


@dataclass
class Ranking:
    """Ordered list of fragment ids produced for one query."""

    query_id: str
    items: list[str]

    def __post_init__(self):
        if len(set(self.items)) != len(self.items):
            seen = set()
            for item in self.items:
                if item in seen:
                    raise ValueError(f"duplicate item '{item}' in ranking '{self.query_id}'")
                seen.add(item)


def average_precision_at_k(ranking: Ranking, relevant, depth: int) -> float:
    """Truncated average precision of one ranking.

    Sums precision at every relevant position within the top ``depth``
    and divides by min(|relevant|, depth). An empty relevant set scores 0.
    """
    if depth < 1:
        raise ValueError(f"depth must be positive, got {depth}")
    rel = set(relevant)
    if not rel:
        return 0.0
    hits = 0
    total = 0.0
    for pos, item in enumerate(ranking.items[:depth], start=1):
        if item in rel:
            hits += 1
            total += hits / pos
    return total / min(len(rel), depth)


def map_at_k(rankings: list[Ranking], ground_truth: dict, depth: int) -> float:
    """Mean of AP@depth over all rankings.

    Raises
    ------
    ValueError
        If a ranking's query has no ground-truth entry.
    """
    if not rankings:
        raise ValueError("map needs at least one ranking")
    total = 0.0
    for r in rankings:
        if r.query_id not in ground_truth:
            raise ValueError(f"missing ground truth for query '{r.query_id}'")
        total += average_precision_at_k(r, ground_truth[r.query_id], depth)
    return total / len(rankings)


def mean_subjective_at_k(ranking: Ranking, scores: dict, depth: int) -> float:
    """Mean subjective score over the top min(depth, len) items.

    Raises
    ------
    ValueError
        If any item in the evaluated prefix has no score.
    """
    if depth < 1:
        raise ValueError(f"depth must be positive, got {depth}")
    top = ranking.items[:depth]
    if not top:
        raise ValueError(f"ranking '{ranking.query_id}' is empty")
    for item in top:
        if item not in scores:
            raise ValueError(f"no subjective score for item '{item}'")
    return sum(scores[item] for item in top) / len(top)


BASELINE_MODES = ("hub", "lid", "random", "oracle")


def baseline_rank(
    profile: StatProfile,
    mode: str,
    seed: int = 0,
    scores: dict | None = None,
    query_id: str = "all",
) -> Ranking:
    """Rank every fragment of a profile with a simple baseline.

    Modes: ``hub`` sorts by descending k-occurrence, ``lid`` by ascending
    LID, ``random`` is a seeded shuffle, ``oracle`` sorts by descending
    subjective score (requires ``scores``). Ties fall back to the smaller
    fragment index.
    """
    ids = profile.ids
    n = len(ids)
    idx = np.arange(n)
    if mode == "hub":
        order = np.lexsort((idx, -profile.hubness.scores))
    elif mode == "lid":
        order = np.lexsort((idx, profile.lid.lids))
    elif mode == "random":
        order = np.random.default_rng(seed).permutation(n)
    elif mode == "oracle":
        if scores is None:
            raise ValueError("oracle mode requires subjective scores")
        vals = []
        for ident in ids:
            if ident not in scores:
                raise ValueError(f"no subjective score for item '{ident}'")
            vals.append(scores[ident])
        order = np.lexsort((idx, -np.asarray(vals, dtype=np.float64)))
    else:
        raise ValueError(f"unknown mode '{mode}', expected one of {BASELINE_MODES}")
    return Ranking(query_id=query_id, items=[ids[i] for i in order])


GT_HEADER = "query_id,fragment_id"
SCORES_HEADER = "fragment_id,score"
RUN_HEADER = "query_id,rank,fragment_id"

SCORE_MIN, SCORE_MAX = 0.0, 15.0


def _rows(path, expected_fields: int, header: str):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line or (lineno == 1 and line == header):
                continue
            parts = line.split(",")
            if len(parts) != expected_fields:
                raise ValueError(
                    f"{path}: row {lineno}: expected {expected_fields} fields, got {len(parts)}"
                )
            yield lineno, parts


def load_ground_truth(path) -> dict[str, set[str]]:
    """Read ``query_id,fragment_id`` rows into a relevance mapping."""
    gt: dict[str, set[str]] = {}
    for _, (qid, fid) in _rows(path, 2, GT_HEADER):
        gt.setdefault(qid, set()).add(fid)
    return gt


def load_scores(path) -> dict[str, float]:
    """Read ``fragment_id,score`` rows; scores must lie in [0, 15]."""
    scores: dict[str, float] = {}
    for lineno, (fid, val) in _rows(path, 2, SCORES_HEADER):
        v = float(val)
        if not (SCORE_MIN <= v <= SCORE_MAX):
            raise ValueError(
                f"{path}: row {lineno}: score {v!r} outside [{SCORE_MIN}, {SCORE_MAX}]"
            )
        scores[fid] = v
    return scores


def save_run(path, rankings) -> None:
    """Write rankings as ``query_id,rank,fragment_id`` rows, rank from 1."""
    if isinstance(rankings, Ranking):
        rankings = [rankings]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(RUN_HEADER + "\n")
        for r in rankings:
            for pos, item in enumerate(r.items, start=1):
                fh.write(f"{r.query_id},{pos},{item}\n")


def load_run(path) -> list[Ranking]:
    """Reload rankings written by :func:`save_run`, ranks must be 1..len."""
    per_query: dict[str, list[tuple[int, str]]] = {}
    order: list[str] = []
    for lineno, (qid, rank_s, fid) in _rows(path, 3, RUN_HEADER):
        if qid not in per_query:
            per_query[qid] = []
            order.append(qid)
        per_query[qid].append((int(rank_s), fid))
    if not per_query:
        raise ValueError(f"{path}: empty run file")
    rankings = []
    for qid in order:
        rows = sorted(per_query[qid])
        if [r for r, _ in rows] != list(range(1, len(rows) + 1)):
            raise ValueError(f"{path}: ranks for query '{qid}' are not contiguous from 1")
        rankings.append(Ranking(query_id=qid, items=[fid for _, fid in rows]))
    return rankings


def save_report(path, report: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
