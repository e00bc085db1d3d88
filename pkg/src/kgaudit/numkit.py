"""Dense linear-algebra and statistical kernels.

Everything downstream (probes, debiasing, training) is built on the
operations here: SVD pseudo-inverse and minimum-norm least squares,
canonical correlation analysis by whitening + SVD, an L2-regularised
logistic classifier, Pearson correlation, and seeded RNG streams.

All matrices are 64-bit floats.  Every stochastic operation takes an
explicit seed and derives its streams through :func:`rng_for`, so any
sub-computation can be replayed in isolation.
"""

from __future__ import annotations

import hashlib
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .errors import ArgumentError, NumericError

DEFAULT_PINV_TOL = 1e-12


# ---------------------------------------------------------------------------
# Seeded RNG streams
# ---------------------------------------------------------------------------

def _key_words(part) -> list[int]:
    """Map one key part to a stable list of 32-bit words."""
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()[:8]
        return [int.from_bytes(digest[i : i + 4], "little") for i in (0, 4)]
    part = int(part)
    if part < 0:
        part &= (1 << 64) - 1
    return [part & 0xFFFFFFFF, (part >> 32) & 0xFFFFFFFF]


def rng_for(seed: int, *key) -> np.random.Generator:
    """Derive an independent PCG64 stream from a base seed and a key path.

    The stream depends only on ``(seed, key...)``, never on call order, so
    e.g. permutation ``i`` of a significance test or epoch ``e`` of a
    training run can be regenerated directly.  String key parts are hashed
    with SHA-256 (``hash()`` is salted per process and unusable here).
    """
    words = [int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF]
    for part in key:
        words.extend(_key_words(part))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))


# ---------------------------------------------------------------------------
# Matrix helpers and serialization
# ---------------------------------------------------------------------------

def as_matrix(m, name: str = "matrix", allow_vector: bool = False) -> np.ndarray:
    """Validate and convert input to a finite float64 2-D array."""
    out = np.asarray(m, dtype=np.float64)
    if allow_vector and out.ndim == 1:
        out = out.reshape(-1, 1)
    if out.ndim != 2:
        raise ArgumentError(f"{name} must be 2-D, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ArgumentError(f"{name} contains non-finite entries")
    return out


def write_matrix(path, m: np.ndarray) -> None:
    """Write a matrix as dimension-prefixed little-endian binary.

    Layout: two uint64 (rows, cols) followed by rows*cols float64 values in
    row-major order, all little-endian.
    """
    m = np.ascontiguousarray(np.asarray(m, dtype=np.float64))
    if m.ndim != 2:
        raise ArgumentError(f"expected 2-D matrix, got shape {m.shape}")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<QQ", m.shape[0], m.shape[1]))
        fh.write(m.astype("<f8", copy=False).tobytes(order="C"))


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16:
            raise ArgumentError(f"{path}: truncated matrix header")
        rows, cols = struct.unpack("<QQ", header)
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
    if data.size != rows * cols:
        raise ArgumentError(f"{path}: truncated matrix payload")
    return data.reshape(rows, cols).astype(np.float64)


def write_matrix_csv(path, m: np.ndarray) -> None:
    np.savetxt(path, np.asarray(m, dtype=np.float64), delimiter=",", fmt="%.17g")


def read_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)


# ---------------------------------------------------------------------------
# Pseudo-inverse and least squares
# ---------------------------------------------------------------------------

def pinv(m, tol: float = DEFAULT_PINV_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via singular value decomposition.

    Singular values below ``tol * sigma_max`` are treated as exactly zero,
    which makes the inverse stable on the collinear one-hot blocks this
    package feeds it.
    """
    m = as_matrix(m, "m")
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge: {exc}") from exc
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((m.shape[1], m.shape[0]))
    keep = s > tol * s[0]
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (vt.T * inv) @ u.T


def solve_least_squares(a, u) -> tuple[np.ndarray, float]:
    """Minimum-norm least-squares solution of ``a @ x = u``.

    Returns ``(x, residual)`` where ``x = pinv(a) @ u`` and ``residual`` is
    the Frobenius norm of ``a @ x - u``.
    """
    a = as_matrix(a, "a")
    u = as_matrix(u, "u", allow_vector=True)
    if a.shape[0] != u.shape[0]:
        raise ArgumentError(
            f"row mismatch: a has {a.shape[0]} rows, u has {u.shape[0]}"
        )
    x = pinv(a) @ u
    residual = float(np.linalg.norm(a @ x - u, ord="fro"))
    return x, residual


# ---------------------------------------------------------------------------
# Pearson correlation
# ---------------------------------------------------------------------------

def pearson(x, y) -> float:
    """Sample Pearson correlation coefficient of two equal-length vectors."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ArgumentError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ArgumentError("need at least 2 points")
    xc = x - x.mean()
    yc = y - y.mean()
    vx = float(xc @ xc)
    vy = float(yc @ yc)
    if vx == 0.0 or vy == 0.0:
        raise NumericError("zero variance input")
    r = float(xc @ yc) / np.sqrt(vx * vy)
    return float(np.clip(r, -1.0, 1.0))


# ---------------------------------------------------------------------------
# Canonical correlation analysis
# ---------------------------------------------------------------------------

@dataclass
class CcaResult:
    """Top-k canonical weight pairs and their correlations (descending)."""

    w_a: np.ndarray          # (cols(A), k)
    w_u: np.ndarray          # (cols(U), k)
    correlations: np.ndarray  # (k,) each in [0, 1]

    @property
    def k(self) -> int:
        return int(self.correlations.size)


def _inv_sqrt_psd(c: np.ndarray) -> np.ndarray:
    """Inverse square root of a symmetric PSD matrix, eigenvalue-clipped."""
    evals, evecs = np.linalg.eigh(c)
    top = float(evals[-1]) if evals.size else 0.0
    if top <= 0.0:
        return np.zeros_like(c)
    cut = top * 1e-14
    inv = np.where(evals > cut, 1.0 / np.sqrt(np.maximum(evals, cut)), 0.0)
    return (evecs * inv) @ evecs.T


def cca(a, u, k: int | None = None, ridge: float = 1e-8) -> CcaResult:
    """Canonical correlation analysis by whitening + SVD.

    Columns of both views are centered; within-set covariances receive a
    ``ridge * mean-eigenvalue`` identity term before whitening (one-hot
    attribute blocks are rank-deficient without it); the whitened
    cross-covariance is then decomposed by SVD.  Correlations come back in
    descending order, clipped to [0, 1].
    """
    a = as_matrix(a, "a")
    u = as_matrix(u, "u")
    if a.shape[0] != u.shape[0]:
        raise ArgumentError(f"row mismatch: {a.shape[0]} vs {u.shape[0]}")
    n = a.shape[0]
    if n < 2:
        raise ArgumentError("need at least 2 rows")
    kmax = min(a.shape[1], u.shape[1])
    if k is None:
        k = kmax
    if not 1 <= k <= kmax:
        raise ArgumentError(f"k={k} outside [1, {kmax}]")

    ac = a - a.mean(axis=0)
    uc = u - u.mean(axis=0)
    caa = (ac.T @ ac) / (n - 1)
    cuu = (uc.T @ uc) / (n - 1)
    cau = (ac.T @ uc) / (n - 1)
    if ridge > 0.0:
        caa = caa + ridge * (np.trace(caa) / caa.shape[0]) * np.eye(caa.shape[0])
        cuu = cuu + ridge * (np.trace(cuu) / cuu.shape[0]) * np.eye(cuu.shape[0])

    isa = _inv_sqrt_psd(caa)
    isu = _inv_sqrt_psd(cuu)
    try:
        left, sing, right_t = np.linalg.svd(isa @ cau @ isu, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge: {exc}") from exc

    w_a = isa @ left[:, :k]
    w_u = isu @ right_t[:k].T
    correlations = np.clip(sing[:k], 0.0, 1.0)
    return CcaResult(w_a=w_a, w_u=w_u, correlations=correlations)


# ---------------------------------------------------------------------------
# Logistic classifier
# ---------------------------------------------------------------------------

@dataclass
class LogisticConfig:
    """Fit settings; the defaults mirror common classifier-toolkit defaults."""

    l2_inverse_strength: float = 1.0   # larger = weaker penalty
    tol: float = 1e-4                  # gradient-norm convergence target
    max_iter: int = 1000
    seed: int = 0


@dataclass
class LinearClassifier:
    """Linear decision rule fit by L2-regularised logistic loss.

    Binary: ``weights`` is (d,), decision is sign(w.x + b) mapped onto
    ``classes[0]`` / ``classes[1]``.  Multiclass: one-vs-rest rows in
    ``weights`` (k, d) with per-class bias, argmax decision.
    """

    weights: np.ndarray
    bias: np.ndarray        # () for binary, (k,) for multiclass
    classes: list
    converged: bool = True
    loss_trace: np.ndarray = field(default_factory=lambda: np.empty(0))

    def decision_values(self, x) -> np.ndarray:
        x = as_matrix(x, "x")
        if self.weights.ndim == 1:
            return x @ self.weights + float(self.bias)
        return x @ self.weights.T + self.bias

    def predict(self, x) -> np.ndarray:
        scores = self.decision_values(x)
        cls = np.asarray(self.classes, dtype=object)
        if scores.ndim == 1:
            return cls[(scores > 0.0).astype(np.intp)]
        return cls[np.argmax(scores, axis=1)]

    def accuracy(self, x, y) -> float:
        y = np.asarray(y, dtype=object).ravel()
        return float(np.mean(self.predict(x) == y))


def _binary_logistic(x: np.ndarray, target: np.ndarray, cfg: LogisticConfig):
    """Fit w, b minimising sum log(1+exp(-y z)) + ||w||^2 / (2 C)."""
    n, d = x.shape
    y_signed = np.where(target, 1.0, -1.0)
    inv_c = 1.0 / cfg.l2_inverse_strength
    trace: list[float] = []

    def loss_grad(theta):
        w, b = theta[:d], theta[d]
        z = y_signed * (x @ w + b)
        loss = float(np.logaddexp(0.0, -z).sum() + 0.5 * inv_c * (w @ w))
        # d/dz log(1+exp(-z)) = -sigmoid(-z)
        coef = -y_signed * expit(-z)
        grad = np.empty(d + 1)
        grad[:d] = x.T @ coef + inv_c * w
        grad[d] = coef.sum()
        return loss, grad

    def record(theta):
        trace.append(loss_grad(theta)[0])

    theta0 = np.zeros(d + 1)
    record(theta0)
    res = minimize(
        loss_grad,
        theta0,
        jac=True,
        method="L-BFGS-B",
        callback=record,
        options={"maxiter": cfg.max_iter, "gtol": cfg.tol, "ftol": 0.0},
    )
    grad_norm = float(np.max(np.abs(loss_grad(res.x)[1])))
    converged = grad_norm <= max(cfg.tol, 1e-12) or res.success
    return res.x[:d], float(res.x[d]), converged, np.asarray(trace)


def fit_logistic(x, y, config: LogisticConfig | None = None) -> LinearClassifier:
    """Train a logistic classifier; multiclass is handled one-vs-rest.

    Optimisation is deterministic (zero init, L-BFGS), so the seed in the
    config only matters if callers fold it into data preparation.  If the
    optimizer stops before reaching the gradient tolerance, the best
    iterate is returned with ``converged=False`` and a warning.
    """
    cfg = config or LogisticConfig()
    x = as_matrix(x, "x")
    y = np.asarray(y, dtype=object).ravel()
    if y.size != x.shape[0]:
        raise ArgumentError(f"row mismatch: x has {x.shape[0]}, y has {y.size}")
    classes = sorted(set(y.tolist()), key=lambda v: (str(type(v)), v))
    if len(classes) < 2:
        raise ArgumentError("need at least 2 classes")

    if len(classes) == 2:
        w, b, ok, trace = _binary_logistic(x, y == classes[1], cfg)
        if not ok:
            warnings.warn("logistic fit did not reach gradient tolerance")
        return LinearClassifier(
            weights=w, bias=np.float64(b), classes=classes,
            converged=ok, loss_trace=trace,
        )

    rows, biases, all_ok = [], [], True
    for cls in classes:
        w, b, ok, _ = _binary_logistic(x, y == cls, cfg)
        rows.append(w)
        biases.append(b)
        all_ok = all_ok and ok
    if not all_ok:
        warnings.warn("logistic fit did not reach gradient tolerance")
    return LinearClassifier(
        weights=np.vstack(rows), bias=np.asarray(biases), classes=classes,
        converged=all_ok,
    )
