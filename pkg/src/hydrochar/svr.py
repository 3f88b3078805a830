"""Epsilon-insensitive support vector regression trained by SMO.

The dual problem is solved over the 2n box variables (alpha, alpha*) with
the single equality constraint sum(alpha - alpha*) = 0. Each step takes the
maximal KKT violator as the first working variable, picks its partner by
the largest guaranteed objective decrease (second-order rule), and then
minimizes the dual exactly along the feasible segment. Selection scans all
samples every step; an epoch is n steps and ``max_passes`` counts epochs.
"""

from __future__ import annotations

import warnings
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceWarning, DimensionMismatch, EmptyInput

FULL_GRAM_LIMIT = 2048


@dataclass(frozen=True)
class Kernel:
    kind: str  # "linear" | "polynomial" | "rbf"
    degree: int = 3
    coef0: float = 0.0
    gamma: float = 0.1

    def __post_init__(self):
        if self.kind not in ("linear", "polynomial", "rbf"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "polynomial" and self.degree < 1:
            raise ValueError("polynomial degree must be >= 1")
        if self.kind == "rbf" and not self.gamma > 0.0:
            raise ValueError("rbf gamma must be > 0")

    @classmethod
    def linear(cls) -> "Kernel":
        return cls(kind="linear")

    @classmethod
    def polynomial(cls, degree: int, coef0: float = 0.0) -> "Kernel":
        return cls(kind="polynomial", degree=degree, coef0=coef0)

    @classmethod
    def rbf(cls, gamma: float) -> "Kernel":
        return cls(kind="rbf", gamma=gamma)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "polynomial":
            d["degree"] = self.degree
            d["coef0"] = self.coef0
        elif self.kind == "rbf":
            d["gamma"] = self.gamma
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Kernel":
        return cls(
            kind=d["kind"],
            degree=int(d.get("degree", 3)),
            coef0=float(d.get("coef0", 0.0)),
            gamma=float(d.get("gamma", 0.1)),
        )


@dataclass(frozen=True)
class SvrParams:
    c: float = 1.0
    epsilon: float = 0.1
    kernel: Kernel = field(default_factory=Kernel.linear)
    tolerance: float = 1e-3
    max_passes: int = 200

    def __post_init__(self):
        if not self.c > 0.0:
            raise ValueError("c must be > 0")
        if self.epsilon < 0.0:
            raise ValueError("epsilon must be >= 0")
        if not self.tolerance > 0.0:
            raise ValueError("tolerance must be > 0")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "epsilon": self.epsilon,
            "kernel": self.kernel.to_dict(),
            "tolerance": self.tolerance,
            "max_passes": self.max_passes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvrParams":
        return cls(
            c=float(d["c"]),
            epsilon=float(d["epsilon"]),
            kernel=Kernel.from_dict(d["kernel"]),
            tolerance=float(d.get("tolerance", 1e-3)),
            max_passes=int(d.get("max_passes", 200)),
        )


def kernel_matrix(kernel: Kernel, a, b) -> np.ndarray:
    """Gram block K[i, j] = k(a_i, b_j) for row matrices a and b."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"feature counts differ: {a.shape[1]} vs {b.shape[1]}")
    if kernel.kind == "linear":
        return a @ b.T
    if kernel.kind == "polynomial":
        return (a @ b.T + kernel.coef0) ** kernel.degree
    sq = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * (a @ b.T)
    np.clip(sq, 0.0, None, out=sq)
    return np.exp(-kernel.gamma * sq)


def kernel_eval(kernel: Kernel, a, b) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    return float(kernel_matrix(kernel, a[None, :], b[None, :])[0, 0])


class _GramCache:
    """Kernel rows for the training set: dense when small, row LRU beyond."""

    def __init__(self, kernel: Kernel, x: np.ndarray, full_limit: int = FULL_GRAM_LIMIT, lru_rows: int = 512):
        self.kernel = kernel
        self.x = x
        self.full = kernel_matrix(kernel, x, x) if len(x) <= full_limit else None
        self._lru: OrderedDict[int, np.ndarray] = OrderedDict()
        self._lru_rows = lru_rows

    def row(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[i]
        got = self._lru.get(i)
        if got is not None:
            self._lru.move_to_end(i)
            return got
        r = kernel_matrix(self.kernel, self.x[i : i + 1], self.x)[0]
        self._lru[i] = r
        if len(self._lru) > self._lru_rows:
            self._lru.popitem(last=False)
        return r

    def entry(self, i: int, j: int) -> float:
        return float(self.row(i)[j])


class SvrModel:
    """Fitted epsilon-SVR: decision function sum(beta_i k(sv_i, x)) + bias."""

    def __init__(self, support_vectors, dual_coeffs, bias, params: SvrParams, n_features: int,
                 sv_indices=None, converged: bool = True):
        self.support_vectors = np.atleast_2d(np.asarray(support_vectors, dtype=float)).reshape(-1, n_features)
        self.dual_coeffs = np.asarray(dual_coeffs, dtype=float).ravel()
        self.bias = float(bias)
        self.params = params
        self.n_features = int(n_features)
        self.sv_indices = np.asarray(sv_indices if sv_indices is not None else [], dtype=int)
        self.converged = bool(converged)
        for arr in (self.support_vectors, self.dual_coeffs, self.sv_indices):
            arr.setflags(write=False)

    def predict(self, x) -> float:
        return float(self.predict_batch(np.asarray(x, dtype=float).reshape(1, -1))[0])

    def predict_batch(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {x.shape[1]}")
        if len(self.dual_coeffs) == 0:
            return np.full(x.shape[0], self.bias)
        k = kernel_matrix(self.params.kernel, x, self.support_vectors)
        return k @ self.dual_coeffs + self.bias

    def to_json_obj(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "n_features": self.n_features,
            "support_vectors": [[float(v) for v in row] for row in self.support_vectors],
            "dual_coeffs": [float(v) for v in self.dual_coeffs],
            "sv_indices": [int(v) for v in self.sv_indices],
            "bias": self.bias,
            "converged": self.converged,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "SvrModel":
        return cls(
            support_vectors=np.array(obj["support_vectors"], dtype=float).reshape(-1, int(obj["n_features"])),
            dual_coeffs=obj["dual_coeffs"],
            bias=obj["bias"],
            params=SvrParams.from_dict(obj["params"]),
            n_features=int(obj["n_features"]),
            sv_indices=obj.get("sv_indices"),
            converged=bool(obj.get("converged", True)),
        )


def _bias_interval(u: np.ndarray, f: np.ndarray, y: np.ndarray, c: float, eps: float):
    """Per-variable feasible-bias candidates implied by the current duals.

    A variable that can still grow puts a lower bound on the bias, one that
    can still shrink puts an upper bound: value y_i - f_i - eps on the alpha
    side, y_i - f_i + eps on the alpha* side. Returns (vals_a, vals_s,
    lower_ok_a, lower_ok_s, upper_ok_a, upper_ok_s).
    """
    n = len(y)
    slack = 1e-10 * c
    base = y - f
    vals_a = base - eps
    vals_s = base + eps
    u_a = u[:n]
    u_s = u[n:]
    return vals_a, vals_s, u_a < c - slack, u_s > slack, u_a > slack, u_s < c - slack


def fit_svr(x, y, params: SvrParams, seed: int = 0) -> SvrModel:
    """Solve the epsilon-SVR dual by sequential minimal optimization.

    On return every KKT condition holds within ``params.tolerance`` unless
    the update budget (``max_passes`` epochs of n steps each) ran out, in
    which case the best-effort model is returned with ``converged=False``
    and a ConvergenceWarning is emitted. ``seed`` is accepted for interface
    stability; the solver is deterministic and consumes no randomness.
    """
    del seed
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n = len(y)
    if n == 0:
        raise EmptyInput("no training rows")
    if x.shape[0] != n:
        raise DimensionMismatch(f"x has {x.shape[0]} rows but y has {n} values")
    c, eps, tol = params.c, params.epsilon, params.tolerance
    gram = _GramCache(params.kernel, x)
    u = np.zeros(2 * n)
    f = np.zeros(n)
    if gram.full is not None:
        diag = gram.full.diagonal().copy()
    else:
        diag = np.array([gram.entry(i, i) for i in range(n)])
    converged = False
    budget = params.max_passes * max(n, 1)
    for step in range(budget):
        if step and gram.full is not None and step % (8 * n) == 0:
            f = gram.full @ (u[:n] - u[n:])  # periodic refresh against drift
        vals_a, vals_s, low_a, low_s, up_a, up_s = _bias_interval(u, f, y, c, eps)
        lv_a = np.where(low_a, vals_a, -np.inf)
        lv_s = np.where(low_s, vals_s, -np.inf)
        pa = int(np.argmax(lv_a))
        ps = int(np.argmax(lv_s))
        if lv_a[pa] >= lv_s[ps]:
            p, b_low, s_p = pa, float(lv_a[pa]), 1.0
        else:
            p, b_low, s_p = n + ps, float(lv_s[ps]), -1.0
        uv_a = np.where(up_a, vals_a, np.inf)
        uv_s = np.where(up_s, vals_s, np.inf)
        b_up = float(min(uv_a.min(), uv_s.min()))
        if b_low - b_up <= tol or not np.isfinite(b_low) or not np.isfinite(b_up):
            converged = True
            break
        i = p % n
        k_i = gram.row(i)
        # partner choice: largest guaranteed decrease viol^2 / eta
        eta_all = np.maximum(diag[i] + diag - 2.0 * k_i, 1e-12)
        eta_all[i] = 1e-12
        gain_a = np.where(uv_a < b_low, (b_low - uv_a) ** 2 / eta_all, -np.inf)
        gain_s = np.where(uv_s < b_low, (b_low - uv_s) ** 2 / eta_all, -np.inf)
        qa = int(np.argmax(gain_a))
        qs = int(np.argmax(gain_s))
        if gain_a[qa] >= gain_s[qs]:
            q, s_q = qa, 1.0
        else:
            q, s_q = n + qs, -1.0
        j = q % n
        k_j = gram.row(j) if j != i else k_i
        g = (f[i] - y[i] + s_p * eps) - (f[j] - y[j] + s_q * eps)
        eta = k_i[i] + k_j[j] - 2.0 * k_i[j] if i != j else 0.0
        t_lo_p, t_hi_p = (-u[p], c - u[p]) if s_p > 0 else (u[p] - c, u[p])
        t_lo_q, t_hi_q = (u[q] - c, u[q]) if s_q > 0 else (-u[q], c - u[q])
        t_lo = max(t_lo_p, t_lo_q)
        t_hi = min(t_hi_p, t_hi_q)
        if eta > 1e-12:
            t = min(max(-g / eta, t_lo), t_hi)
        else:
            t = t_hi if g < 0.0 else t_lo
        if t == 0.0:
            converged = True  # violating pair has no headroom at float resolution
            break
        beta_i_old = u[i] - u[n + i]
        beta_j_old = u[j] - u[n + j]
        u[p] = min(max(u[p] + s_p * t, 0.0), c)
        u[q] = min(max(u[q] - s_q * t, 0.0), c)
        d_i = (u[i] - u[n + i]) - beta_i_old
        d_j = 0.0 if i == j else (u[j] - u[n + j]) - beta_j_old
        if d_i != 0.0:
            f = f + d_i * k_i
        if d_j != 0.0:
            f = f + d_j * k_j
    if not converged:
        warnings.warn("SVR solver hit max_passes before satisfying KKT conditions", ConvergenceWarning)
    beta = u[:n] - u[n:]
    np.clip(beta, -c, c, out=beta)
    # dual feasibility is maintained exactly by the paired updates
    assert abs(float(beta.sum())) <= max(tol, 1e-9 * c * n), "dual equality constraint drifted"
    free = (np.abs(beta) > 1e-8 * c) & (np.abs(beta) < c * (1.0 - 1e-8))
    if free.any():
        idx = np.flatnonzero(free)
        bias = float(np.mean([y[i] - f[i] - np.sign(beta[i]) * eps for i in idx]))
    else:
        vals_a, vals_s, low_a, low_s, up_a, up_s = _bias_interval(u, f, y, c, eps)
        b_low = float(max(np.where(low_a, vals_a, -np.inf).max(), np.where(low_s, vals_s, -np.inf).max()))
        b_up = float(min(np.where(up_a, vals_a, np.inf).min(), np.where(up_s, vals_s, np.inf).min()))
        if not np.isfinite(b_low):
            bias = b_up if np.isfinite(b_up) else 0.0
        elif not np.isfinite(b_up):
            bias = b_low
        else:
            bias = 0.5 * (b_low + b_up)
    keep = np.flatnonzero(np.abs(beta) > 1e-12)
    return SvrModel(
        support_vectors=x[keep],
        dual_coeffs=beta[keep],
        bias=bias,
        params=params,
        n_features=x.shape[1],
        sv_indices=keep,
        converged=converged,
    )


@dataclass(frozen=True)
class KktAudit:
    ok: bool
    n_checked: int
    violations: tuple[str, ...]
    max_dual_sum: float


def check_kkt(model: SvrModel, x, y, tolerance: float | None = None) -> KktAudit:
    """Independent KKT audit of a fitted model against its training set.

    Re-derives per-sample dual coefficients from ``sv_indices`` and verifies:
    zero-coefficient samples sit inside the tube (within tolerance), free
    samples sit on the tube edge, and at-bound samples sit on or outside it
    on the side their coefficient pulls. Also checks box and equality
    feasibility of the duals.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    tol = model.params.tolerance if tolerance is None else tolerance
    c, eps = model.params.c, model.params.epsilon
    beta = np.zeros(len(y))
    beta[model.sv_indices] = model.dual_coeffs
    resid = model.predict_batch(x) - y
    margin = 1e-8 * c
    violations = []
    if np.any(np.abs(beta) > c + margin):
        violations.append("a dual coefficient exceeds the box bound")
    dual_sum = float(abs(beta.sum()))
    if dual_sum > tol:
        violations.append(f"dual coefficients sum to {dual_sum:.3g} > tolerance")
    for i in range(len(y)):
        b, r = beta[i], resid[i]
        if abs(b) <= margin:
            if abs(r) > eps + tol:
                violations.append(f"sample {i}: zero coefficient but |residual| {abs(r):.4g} > eps + tol")
        elif abs(b) >= c - margin:
            if -np.sign(b) * r < eps - tol:
                violations.append(f"sample {i}: bound coefficient but residual {r:.4g} inside the tube")
        else:
            if not (eps - tol <= abs(r) <= eps + tol):
                violations.append(f"sample {i}: free coefficient but |residual| {abs(r):.4g} off the tube edge")
            elif eps > 2.0 * tol and np.sign(r) == np.sign(b):
                violations.append(f"sample {i}: free coefficient with residual on the wrong side")
    return KktAudit(ok=not violations, n_checked=len(y), violations=tuple(violations), max_dual_sum=dual_sum)


def predict_svr(model: SvrModel, x) -> float:
    """Decision-function value at one feature vector."""
    return model.predict(x)
