"""Explicit rotation alignment of tensor sets.

Minimizes ``sqrt(sum_r w_r ||p^r - rotate(q^r, O)||_F^2)`` over ``O`` in
SO(d).  This resembles orthogonal Procrustes, but every slot of every tensor
turns with the same ``O``, so there is no closed form; we run multi-start
gradient descent on the skew-symmetric generator of ``O``.  Intended as a
verification step after an invariant-based match, not a fast path.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.linalg import expm


def n_params(d: int) -> int:
    return d * (d - 1) // 2


def generator(params, d: int) -> np.ndarray:
    """Skew matrix with ``A[j, i] = theta``, ``A[i, j] = -theta`` for each pair ``i < j``."""
    params = np.asarray(params, dtype=float).reshape(-1)
    if params.size != n_params(d):
        raise ValueError(f"SO({d}) needs {n_params(d)} parameters, got {params.size}")
    A = np.zeros((d, d))
    iu = np.triu_indices(d, 1)
    A[iu] = -params
    A[(iu[1], iu[0])] = params
    return A


def _rodrigues(K, theta: float) -> np.ndarray:
    # exp(K) for 3x3 skew K whose rotation angle is theta
    if theta < 1e-8:
        return np.eye(3) + K + 0.5 * K @ K
    return np.eye(3) + np.sin(theta) / theta * K + (1.0 - np.cos(theta)) / theta**2 * (K @ K)


class Rotation:
    """Element of SO(d) as ``expm(generator(params))``.

    In 2-D the single parameter is the counterclockwise angle.
    """

    __slots__ = ("dim", "params", "matrix")

    def __init__(self, dim: int, params=None):
        self.dim = int(dim)
        p = np.zeros(n_params(dim)) if params is None else np.array(params, dtype=float).reshape(-1)
        if p.size != n_params(dim):
            raise ValueError(f"SO({dim}) needs {n_params(dim)} parameters, got {p.size}")
        p.setflags(write=False)
        self.params = p
        if not np.any(p):
            m = np.eye(dim)
        elif dim == 2:
            c, s = np.cos(p[0]), np.sin(p[0])
            m = np.array([[c, -s], [s, c]])
        elif dim == 3:
            a, b, c = p
            K = np.array([[0.0, -a, -b], [a, 0.0, -c], [b, c, 0.0]])
            m = _rodrigues(K, float(np.sqrt(a * a + b * b + c * c)))
        else:
            m = expm(generator(p, dim))
        m.setflags(write=False)
        self.matrix = m

    @classmethod
    def identity(cls, dim: int) -> "Rotation":
        return cls(dim)

    @classmethod
    def from_angle(cls, theta: float) -> "Rotation":
        return cls(2, [theta])

    @classmethod
    def random(cls, dim: int, rng) -> "Rotation":
        """Haar-uniform rotation (the parameters are then not stored)."""
        from scipy.stats import special_ortho_group

        if dim == 1:
            return cls(1)
        m = special_ortho_group.rvs(dim, random_state=rng)
        rot = cls(dim)
        m.setflags(write=False)
        rot.matrix = m
        rot.params = None
        return rot

    @property
    def angle(self) -> float:
        if self.dim != 2:
            raise ValueError("angle is only defined in 2-D")
        return float(np.arctan2(self.matrix[1, 0], self.matrix[0, 0]))

    def __repr__(self):
        return f"Rotation(dim={self.dim}, matrix={self.matrix.tolist()!r})"


def _tensors(source) -> dict:
    tensors = getattr(source, "tensors", source)
    if not isinstance(tensors, Mapping):
        raise TypeError(f"cannot read tensors from {type(source).__name__}")
    return {int(str(k).lstrip("p")): t for k, t in tensors.items()}


def _matrix(O) -> np.ndarray:
    return np.asarray(getattr(O, "matrix", O), dtype=float)


class _Problem:
    """Dense copies of both tensor sets so the objective avoids repacking."""

    def __init__(self, p, q, weights):
        tp, tq = _tensors(p), _tensors(q)
        if sorted(tp) != sorted(tq):
            raise ValueError(f"order mismatch: {sorted(tp)} vs {sorted(tq)}")
        for r in tp:
            if (tp[r].dim, tp[r].order) != (tq[r].dim, tq[r].order):
                raise ValueError(f"order-{r} tensors differ in shape")
        if weights is None:
            w = {r: 1.0 for r in tp}
        elif isinstance(weights, Mapping):
            w = {r: float(weights.get(r, 1.0)) for r in tp}
        else:
            w = {r: float(weights) for r in tp}
        self.dim = next(iter(tp.values())).dim
        # order 0 does not rotate
        self.const = sum(w[r] * float(tp[r].entries[0] - tq[r].entries[0]) ** 2 for r in tp if r == 0)
        self.terms = [(w[r], tp[r].to_dense(), tq[r].to_dense()) for r in sorted(tp) if r > 0 and w[r] != 0.0]

    def squared(self, O) -> float:
        total = self.const
        d = self.dim
        for w, P, Q in self.terms:
            # rotate the leading slot, then cycle it to the back; after
            # ndim steps every slot is rotated and the order is restored
            a = Q.reshape(d, -1)
            for _ in range(Q.ndim):
                a = (O @ a).T.reshape(d, -1)
            diff = P.reshape(-1) - a.reshape(-1)
            total += w * float(diff @ diff)
        return total


def objective(p, q, O, weights=None) -> float:
    """``sqrt(sum_r w_r ||p^r - rotate(q^r, O)||_F^2)``; weights default to 1."""
    from .symtensor import check_orthogonal

    prob = _Problem(p, q, weights)
    return float(np.sqrt(prob.squared(check_orthogonal(_matrix(O), prob.dim))))


@dataclass
class AlignConfig:
    restarts: int | None = None  # None -> 8 in 2-D, 32 otherwise
    max_iter: int = 500
    step_rule: str = "adaptive"  # Barzilai-Borwein trial steps; "backtracking" always tries 1.0 first
    tol: float = 1e-9
    grad_tol: float = 1e-9
    stall_tol: float = 1e-9  # stop when one step lowers the squared objective by less than this fraction
    max_step: float = 0.25  # radians of generator change per iteration
    fd_step: float = 1e-6
    seed: int = 0
    reflect: bool = False
    stop_early: bool = True

    def n_restarts(self, d: int) -> int:
        if self.restarts is not None:
            return self.restarts
        return 8 if d == 2 else 32


@dataclass
class AlignmentResult:
    rotation: Rotation
    residual: float
    trace: list = field(default_factory=list)
    restarts_used: int = 0
    converged: bool = False
    reflected: bool = False

    def to_json(self) -> dict:
        out = {
            "matrix": self.rotation.matrix.reshape(-1).tolist(),
            "dim": self.rotation.dim,
            "params": None if self.rotation.params is None else self.rotation.params.tolist(),
            "residual": self.residual,
            "restarts_used": self.restarts_used,
            "converged": self.converged,
            "reflected": self.reflected,
            "trace": [[int(i), float(v)] for i, v in self.trace],
        }
        if self.rotation.dim == 2:
            out["angle"] = self.rotation.angle
        return out


def _descend(f, x0, cfg: AlignConfig):
    """Gradient descent with central-difference gradients and Armijo backtracking.

    The ``adaptive`` rule starts each backtracking search from a
    Barzilai-Borwein step; ``backtracking`` always starts from 1.0.
    """
    x = np.array(x0, dtype=float)
    fx = f(x)
    trace = [(0, fx)]
    h = cfg.fd_step
    n = x.size
    step0 = 1.0
    converged = False
    x_prev = g_prev = None
    for it in range(1, cfg.max_iter + 1):
        if np.sqrt(fx) < cfg.tol:
            converged = True
            break
        g = np.empty(n)
        for k in range(n):
            e = np.zeros(n)
            e[k] = h
            g[k] = (f(x + e) - f(x - e)) / (2 * h)
        gg = float(g @ g)
        if np.sqrt(gg) < cfg.grad_tol:
            converged = True
            break
        if cfg.step_rule == "adaptive" and x_prev is not None:
            # Barzilai-Borwein trial step from the last secant pair; it tracks
            # the local curvature, so flat or ill-conditioned valleys are not
            # crawled at a fixed step
            s_, y_ = x - x_prev, g - g_prev
            sy = float(s_ @ y_)
            step0 = float(s_ @ s_) / sy if sy > 0 else 4.0 * step0
        # keep every trial inside the start's basin: Armijo alone happily
        # accepts long jumps into a neighbouring minimum
        t = min(step0, cfg.max_step / np.sqrt(gg))
        while True:
            xn = x - t * g
            fn = f(xn)
            if fn <= fx - 1e-4 * t * gg:
                break
            t *= 0.5
            if t < 1e-20:
                break
        if t < 1e-20:
            # no descent possible at finite-difference resolution
            converged = np.sqrt(gg) < 1e3 * cfg.grad_tol
            break
        stalled = fx - fn <= cfg.stall_tol * fx
        x_prev, g_prev = x, g
        x, fx = xn, fn
        trace.append((it, fx))
        if stalled:
            converged = np.sqrt(fx) < cfg.tol
            break
    else:
        converged = np.sqrt(fx) < cfg.tol
    return x, fx, trace, converged


def _start_points(d: int, cfg: AlignConfig, rng) -> list:
    starts = [np.zeros(n_params(d))]
    n = cfg.n_restarts(d) - 1
    if d == 2:
        # stratified: one uniform draw per equal arc, so no arc is left unsampled
        u = rng.uniform(size=n)
        return starts + [np.array([-np.pi + 2 * np.pi * (k + u[k]) / n]) for k in range(n)]
    for _ in range(n):
        v = rng.normal(size=n_params(d))
        nv = np.linalg.norm(v)
        v = v / nv * np.pi * rng.uniform() ** (1.0 / max(1, n_params(d))) if nv > 0 else v
        starts.append(v)
    return starts


def optimize(p, q, config: AlignConfig | None = None, weights=None) -> AlignmentResult:
    """Multi-start descent for ``min_O objective(p, q, O)``.

    The first start is always the identity.  Generators for the other starts
    are drawn uniformly from the ball of radius pi (in 2-D one
    draw per equal arc of the circle).  The squared objective is
    descended (it is smooth at the optimum, the root is not); the reported
    residual is the objective itself.  With ``stop_early`` the search ends as
    soon as a start reaches ``residual < tol``, which is then a global minimum
    to within ``tol``.
    """
    cfg = config or AlignConfig()
    prob = _Problem(p, q, weights)
    d = prob.dim
    rng = np.random.default_rng(cfg.seed)
    if d == 1:
        res = float(np.sqrt(prob.squared(np.eye(1))))
        return AlignmentResult(Rotation(1), res, [(0, res)], 1, True)

    flips = [np.eye(d)]
    if cfg.reflect:
        F = np.eye(d)
        F[-1, -1] = -1.0
        flips.append(F)

    best = None
    used = 0
    for flip_k, F in enumerate(flips):
        def f(x, F=F):
            return prob.squared(Rotation(d, x).matrix @ F)

        for x0 in _start_points(d, cfg, rng):
            used += 1
            x, fx, trace, conv = _descend(f, x0, cfg)
            res = float(np.sqrt(fx))
            if best is None or res < best[0]:
                best = (res, x, trace, conv, flip_k)
            if cfg.stop_early and res < cfg.tol:
                break
        if cfg.stop_early and best[0] < cfg.tol:
            break

    res, x, trace, conv, flip_k = best
    rot = Rotation(d, x)
    reflected = flip_k == 1
    if reflected:
        m = rot.matrix @ flips[1]
        rot = Rotation(d, x)
        m.setflags(write=False)
        rot.matrix = m
    residual = float(np.sqrt(prob.squared(rot.matrix)))
    trace = [(i, float(np.sqrt(v))) for i, v in trace]
    return AlignmentResult(rot, residual, trace, used, bool(conv or residual < cfg.tol), reflected)


def grid_oracle_2d(p, q, n_angles: int = 3600, weights=None) -> tuple[float, float]:
    """Brute-force 2-D search: objective at ``n_angles`` equally spaced angles.

    Returns ``(best_angle, residual)`` with the angle in ``[0, 2 pi)``.
    Ties go to the smallest angle.
    """
    prob = _Problem(p, q, weights)
    if prob.dim != 2:
        raise ValueError("grid_oracle_2d needs d = 2")
    angles = 2 * np.pi * np.arange(n_angles) / n_angles
    vals = np.array([prob.squared(Rotation.from_angle(a).matrix) for a in angles])
    k = int(np.argmin(vals))
    return float(angles[k]), float(np.sqrt(vals[k]))


def angles_objective_2d(p, q, angles, weights=None) -> np.ndarray:
    prob = _Problem(p, q, weights)
    return np.sqrt([prob.squared(Rotation.from_angle(a).matrix) for a in angles])
