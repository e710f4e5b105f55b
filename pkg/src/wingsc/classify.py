"""Per-class reconstruction-residual classification."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Dictionary:
    """Column-normalized training matrix grouped by class.

    Attributes
    ----------
    matrix : ndarray, shape (m, n)
        Unit-norm columns, grouped by ascending class id.
    labels : ndarray of int, shape (n,)
        Class id of every column.
    class_ranges : dict
        Maps class id to its half-open ``(start, stop)`` column span.
    column_norms : ndarray, shape (n,)
        l2 norms of the columns before normalization.
    """

    matrix: np.ndarray
    labels: np.ndarray
    class_ranges: dict
    column_norms: np.ndarray

    @classmethod
    def from_columns(cls, columns, labels, classes=None) -> "Dictionary":
        """Sort columns by class (stable), normalize them and record class spans.

        ``classes`` optionally declares the expected class ids; a declared
        class without any column is an error.
        """
        X = np.asarray(columns, dtype=float)
        labels = np.asarray(labels, dtype=int)
        if X.ndim != 2 or X.shape[1] == 0 or X.shape[0] == 0:
            raise ValueError(f"need a nonempty 2-d column matrix, got shape {X.shape}")
        if labels.shape != (X.shape[1],):
            raise ValueError(f"{labels.size} labels for {X.shape[1]} columns")
        if not np.all(np.isfinite(X)):
            raise ValueError("dictionary entries must be finite")
        if classes is not None:
            missing = sorted(set(int(c) for c in classes) - set(labels.tolist()))
            if missing:
                raise ValueError(f"classes without samples: {missing}")
            extra = sorted(set(labels.tolist()) - set(int(c) for c in classes))
            if extra:
                raise ValueError(f"labels outside the declared classes: {extra}")

        order = np.argsort(labels, kind="stable")
        X, labels = X[:, order], labels[order]
        norms = np.linalg.norm(X, axis=0)
        if np.any(norms == 0):
            raise ValueError("cannot normalize an all-zero column")

        ranges = {}
        ids, starts = np.unique(labels, return_index=True)
        stops = np.append(starts[1:], labels.size)
        for c, a, b in zip(ids.tolist(), starts.tolist(), stops.tolist()):
            ranges[int(c)] = (a, b)
        matrix = X / norms
        matrix.setflags(write=False)
        labels.setflags(write=False)
        norms.setflags(write=False)
        return cls(matrix=matrix, labels=labels, class_ranges=ranges, column_norms=norms)

    @property
    def classes(self) -> list:
        return list(self.class_ranges)

    @property
    def shape(self):
        return self.matrix.shape


@dataclass
class ClassificationResult:
    predicted_class: int
    residuals: np.ndarray
    code: np.ndarray
    classes: list


def class_mask(x, class_id, dictionary: Dictionary) -> np.ndarray:
    """Keep the entries of ``x`` belonging to ``class_id``; zero the rest."""
    try:
        a, b = dictionary.class_ranges[class_id]
    except KeyError:
        raise KeyError(f"unknown class id {class_id!r}") from None
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    out[a:b] = x[a:b]
    return out


def classify(y, x_hat, dictionary: Dictionary) -> ClassificationResult:
    """Assign ``y`` to the class whose coefficients reconstruct it best.

    ``residuals[i]`` is ``||y - A mask_i(x_hat)||_2`` for the i-th entry of
    ``dictionary.classes``; ties go to the smallest class id.
    """
    y = np.asarray(y, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    m, n = dictionary.shape
    if y.shape != (m,) or x_hat.shape != (n,):
        raise ValueError(
            f"dimension mismatch: dictionary {(m, n)}, y {y.shape}, x_hat {x_hat.shape}"
        )
    A = dictionary.matrix
    classes = dictionary.classes
    residuals = np.empty(len(classes))
    for i, c in enumerate(classes):
        a, b = dictionary.class_ranges[c]
        residuals[i] = np.linalg.norm(y - A[:, a:b] @ x_hat[a:b])
    # classes are ascending, so argmin's first-hit rule is the smallest-id tie-break
    best = int(np.argmin(residuals))
    return ClassificationResult(
        predicted_class=classes[best], residuals=residuals, code=x_hat, classes=classes
    )


def recognition_rate(predictions, truth) -> float:
    """Percentage of predictions equal to the true label."""
    predictions = list(predictions)
    truth = list(truth)
    if len(predictions) != len(truth):
        raise ValueError(f"length mismatch: {len(predictions)} vs {len(truth)}")
    if not truth:
        raise ValueError("cannot score an empty prediction list")
    hits = sum(int(p == t) for p, t in zip(predictions, truth))
    return 100.0 * hits / len(truth)
