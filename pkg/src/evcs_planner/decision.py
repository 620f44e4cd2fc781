"""Entropy-weight scoring of a Pareto archive and the SP spacing index."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .core import DataError

SCORE_COLUMNS = ("plan", "negative_revenue", "user_additional_cost", "score")


def _as_matrix(raw) -> np.ndarray:
    X = np.asarray(raw, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected an (n, k) matrix, got shape {X.shape}")
    if X.shape[0] < 2:
        raise ValueError("at least two alternatives are needed to normalize")
    if not np.all(np.isfinite(X)):
        raise ValueError("matrix contains non-finite values")
    return X


def normalize_negative(raw) -> np.ndarray:
    """Min-max normalize cost-type columns so the smallest raw value maps to 1.

    A constant column carries no information and maps to all zeros.
    """
    X = _as_matrix(raw)
    hi, lo = X.max(axis=0), X.min(axis=0)
    span = hi - lo
    Y = np.zeros_like(X)
    ok = span > 0
    Y[:, ok] = (hi[ok] - X[:, ok]) / span[ok]
    return Y


def entropy_weights(Y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Shares, entropies and weights of a normalized decision matrix.

    Returns:
        ``(w, e, W)`` where ``w[i, j]`` is alternative i's share of column j,
        ``e[j]`` the column entropy (``0 ln 0 = 0``) and ``W[j]`` the weight.
        A column summing to zero gets zero shares and entropy 1.

    Raises:
        ValueError: if every column is uninformative.
    """
    Y = _as_matrix(Y)
    n, k = Y.shape
    if np.any(Y < 0):
        raise ValueError("normalized values must be nonnegative")
    col = Y.sum(axis=0)
    w = np.zeros_like(Y)
    ok = col > 0
    w[:, ok] = Y[:, ok] / col[ok]
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(w > 0, w * np.log(w), 0.0)
    e = -plogp.sum(axis=0) / np.log(n)
    e[~ok] = 1.0
    denom = k - e.sum()
    if denom <= 1e-12:
        raise ValueError("no informative index: every column has entropy 1")
    W = (1.0 - e) / denom
    return w, e, W


@dataclass(frozen=True)
class DecisionMatrix:
    raw: np.ndarray
    normalized: np.ndarray
    shares: np.ndarray
    entropies: np.ndarray
    weights: np.ndarray
    scores: np.ndarray

    @classmethod
    def from_raw(cls, raw) -> "DecisionMatrix":
        X = _as_matrix(raw)
        Y = normalize_negative(X)
        w, e, W = entropy_weights(Y)
        return cls(X, Y, w, e, W, Y @ W)

    def best_index(self) -> int:
        """Highest score; ties go to lower f2 (second column), then lower index."""
        S = self.scores
        top = np.flatnonzero(S == S.max())
        if top.size > 1 and self.raw.shape[1] > 1:
            f2 = self.raw[top, 1]
            top = top[f2 == f2.min()]
        return int(top[0])


def _objectives_of(archive) -> np.ndarray:
    if hasattr(archive, "objectives"):
        F = np.asarray(archive.objectives, dtype=float)
    else:
        F = np.asarray(archive, dtype=float)
    if F.size == 0:
        raise ValueError("archive is empty")
    return F.reshape(len(F), -1)


def select_best(archive) -> tuple[Any, DecisionMatrix, np.ndarray]:
    """Pick the best-scoring plan from an archive or an ``(n, 2)`` objective array.

    Returns:
        ``(best, matrix, scores)``. ``best`` is the archive entry when an
        archive was given, otherwise the row index.
    """
    F = _objectives_of(archive)
    dm = DecisionMatrix.from_raw(F)
    i = dm.best_index()
    best = archive[i] if hasattr(archive, "objectives") else i
    return best, dm, dm.scores


def sp_metric(front) -> float:
    """Spacing of a front after per-dimension min-max normalization.

    ``d_i`` is the L1 distance to the nearest other point and the result is
    the sample standard deviation of the ``d_i``.
    """
    F = np.asarray(front, dtype=float)
    if F.ndim != 2 or F.shape[0] < 2:
        raise ValueError("spacing needs at least two points")
    lo, hi = F.min(axis=0), F.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    Z = (F - lo) / span
    L1 = np.abs(Z[:, None, :] - Z[None, :, :]).sum(axis=2)
    np.fill_diagonal(L1, np.inf)
    d = L1.min(axis=1)
    return float(np.sqrt(np.sum((d.mean() - d) ** 2) / (len(d) - 1)))


# ---------------------------------------------------------------------------
# scoring report

def dump_scores_csv(objectives, scores, best: int | None = None) -> str:
    """Scoring table with one row per plan, numbered from 1.

    When ``best`` is given a ``selected`` column marks that row.
    """
    F = np.asarray(objectives, dtype=float)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(SCORE_COLUMNS) + (["selected"] if best is not None else [])
    writer.writerow(header)
    for i, (f, s) in enumerate(zip(F, scores)):
        row = [i + 1, repr(float(f[0])), repr(float(f[1])), repr(float(s))]
        if best is not None:
            row.append(int(i == best))
        writer.writerow(row)
    return buf.getvalue()


def read_front_csv(path: str | Path) -> np.ndarray:
    """Read ``(f1, f2)`` pairs from a CSV with ``f1`` and ``f2`` columns.

    Tables written by this package (``pareto.csv``) and scoring reports
    (``negative_revenue``/``user_additional_cost``) are both accepted.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from exc
    reader = csv.DictReader(io.StringIO(text))
    fields = [f.strip() for f in (reader.fieldnames or [])]
    for a, b in (("f1", "f2"), ("negative_revenue", "user_additional_cost")):
        if a in fields and b in fields:
            break
    else:
        raise DataError(f"{path}:1: need f1,f2 columns")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        try:
            rows.append((float(row[a]), float(row[b])))
        except (TypeError, ValueError):
            raise DataError(f"{path}:{lineno}: non-numeric objective") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows)


def rescore(objectives: Sequence[Sequence[float]]) -> tuple[int, np.ndarray]:
    """Best index and score vector for raw ``(f1, f2)`` rows."""
    dm = DecisionMatrix.from_raw(objectives)
    return dm.best_index(), dm.scores
