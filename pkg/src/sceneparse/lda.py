"""Fisher linear discriminant projection of super-pixel descriptors."""
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from sceneparse.errors import InvalidInputError

RIDGE_FACTOR = 1e-4
# used only when the within-class scatter is exactly zero
RIDGE_FLOOR = 1e-4


@dataclass(frozen=True)
class LdaModel:
    """Projection ``W`` of shape ``(n_classes - 1, n_features)``.

    ``classes`` lists the original label ids the model was fitted on, in the
    order their class means were computed.
    """

    W: np.ndarray
    feature_mean: np.ndarray
    classes: np.ndarray
    ridge: float
    eigenvalues: np.ndarray

    @property
    def n_classes(self):
        return int(self.classes.size)

    @property
    def output_dim(self):
        return int(self.W.shape[0])

    def project(self, X):
        return project(self, X)


def scatter_matrices(X, labels, classes=None):
    """Within-class and between-class scatter of the rows of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    if classes is None:
        classes = np.unique(labels)
    mean = X.mean(axis=0)
    n_x = X.shape[1]
    S_w = np.zeros((n_x, n_x))
    S_b = np.zeros((n_x, n_x))
    for c in classes:
        Xc = X[labels == c]
        if Xc.shape[0] == 0:
            raise InvalidInputError(f"class {c} has no samples")
        mc = Xc.mean(axis=0)
        D = Xc - mc
        S_w += D.T @ D
        d = (mc - mean)[:, None]
        S_b += Xc.shape[0] * (d @ d.T)
    return S_w, S_b, mean


def _canonical_sign(V, tol=1e-12):
    """Flip columns so each one's first non-negligible entry is positive."""
    V = V.copy()
    for j in range(V.shape[1]):
        col = V[:, j]
        nz = np.flatnonzero(np.abs(col) > tol * max(np.abs(col).max(), 1e-300))
        if nz.size and col[nz[0]] < 0:
            V[:, j] = -col
    return V


def fit(X, labels, n_classes=None, ridge=None):
    """Fit the Fisher projection.

    Parameters
    ----------
    X : ndarray, shape (N, n_x)
    labels : ndarray, shape (N,)
        Class id per row.
    n_classes : int, optional
        When given, ids must be ``0..n_classes-1`` and every class must have
        at least one sample. Otherwise the classes are the distinct ids.
    ridge : float, optional
        Added to the within-class scatter diagonal. Defaults to
        ``1e-4 * trace(S_w) / n_x``.

    Returns
    -------
    LdaModel
        Rows of ``W`` are unit-length generalized eigenvectors of
        ``(S_b, S_w + ridge I)`` in order of decreasing eigenvalue.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    if X.ndim != 2 or labels.shape != (X.shape[0],):
        raise InvalidInputError("X must be (N, n_x) with one label per row")
    if n_classes is None:
        classes = np.unique(labels)
    else:
        classes = np.arange(n_classes)
        present = np.unique(labels)
        missing = np.setdiff1d(classes, present)
        if missing.size:
            raise InvalidInputError(f"classes without samples: {missing.tolist()}")
        if np.setdiff1d(present, classes).size:
            raise InvalidInputError("label id out of range")
    n_c = classes.size
    if n_c < 2:
        raise InvalidInputError("at least two classes are required")
    if X.shape[0] < n_c:
        raise InvalidInputError("fewer samples than classes")
    n_x = X.shape[1]
    if n_x < n_c - 1:
        raise InvalidInputError(f"{n_x} features cannot span {n_c - 1} discriminant directions")

    S_w, S_b, mean = scatter_matrices(X, labels, classes)
    if ridge is None:
        ridge = RIDGE_FACTOR * np.trace(S_w) / n_x
        if ridge <= 0:
            ridge = RIDGE_FLOOR
    A = S_w + ridge * np.eye(n_x)
    # symmetric reduction: A = L L^T, C = L^-1 S_b L^-T
    L = linalg.cholesky(A, lower=True)
    Y = linalg.solve_triangular(L, S_b, lower=True)
    C = linalg.solve_triangular(L, Y.T, lower=True)
    C = 0.5 * (C + C.T)
    evals, evecs = linalg.eigh(C)
    order = np.argsort(evals)[::-1][: n_c - 1]
    V = linalg.solve_triangular(L.T, evecs[:, order], lower=False)
    V /= np.linalg.norm(V, axis=0, keepdims=True)
    V = _canonical_sign(V)
    return LdaModel(
        W=np.ascontiguousarray(V.T),
        feature_mean=mean,
        classes=np.asarray(classes, dtype=np.int64),
        ridge=float(ridge),
        eigenvalues=np.maximum(evals[order], 0.0),
    )


def project(model, X):
    """``W (x - mean)`` for one vector or each row of a matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != model.feature_mean.size:
        raise InvalidInputError(
            f"expected {model.feature_mean.size} features, got {X.shape[-1]}"
        )
    return (X - model.feature_mean) @ model.W.T


def eigen_residual(model, S_w, S_b):
    """Max relative residual of ``(S_w + ridge I)^-1 S_b v = lambda v``."""
    A = S_w + model.ridge * np.eye(S_w.shape[0])
    worst = 0.0
    for v, lam in zip(model.W, model.eigenvalues):
        lhs = np.linalg.solve(A, S_b @ v)
        scale = max(np.linalg.norm(lhs), abs(lam), 1e-300)
        worst = max(worst, np.linalg.norm(lhs - lam * v) / scale)
    return worst
