"""Multivariate Gaussian mixture timing models over the 3-D timing space.

EM is implemented directly (k-means++ seeding, covariance floor, BIC model
selection) so that fitting is bit-reproducible from a seed and exposes the
per-iteration log-likelihood sequence. Conditioning a model to an Allen
relation maximizes its density over the relation's region in timing space.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .allen import region_contains, region_project_batch, _region_system
from .model import Action, AllenRelation
from .timing import Timing3

EM_MAX_ITER = 200
EM_TOL = 1e-8
COV_FLOOR_FACTOR = 1e-6
MIN_POINTS_PER_COMPONENT = 4

# Internal seed for the deterministic candidate draws used when maximizing
# a conditioned density; not related to the fitting seed.
_ARGMAX_DRAW_SEED = 0x7E3A


@dataclass(frozen=True)
class GaussianComponent:
    weight: float
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "covariance", np.asarray(self.covariance, dtype=float))


@dataclass(frozen=True)
class TimingModel:
    """GMM over the observed timings of one action pair."""

    components: Tuple[GaussianComponent, ...]
    n_points: int
    fit_meta: dict = field(default_factory=dict)
    pair: Optional[Tuple[Action, Action]] = None

    @property
    def k(self) -> int:
        return len(self.components)

    def with_pair(self, pair: Tuple[Action, Action]) -> "TimingModel":
        return replace(self, pair=pair)

    def mean(self) -> np.ndarray:
        return sum(c.weight * c.mean for c in self.components)


def _data_scale(x: np.ndarray) -> float:
    extent = float(np.max(x.max(axis=0) - x.min(axis=0))) if len(x) else 0.0
    return extent if extent > 0 else 1.0


def _cov_floor(x: np.ndarray) -> float:
    return COV_FLOOR_FACTOR * _data_scale(x) ** 2


def _log_gauss_chol(x: np.ndarray, mean: np.ndarray, chol: np.ndarray) -> np.ndarray:
    d = x - mean
    sol = np.linalg.solve(chol, d.T)
    maha = np.sum(sol ** 2, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    dim = x.shape[1]
    return -0.5 * (maha + logdet + dim * math.log(2.0 * math.pi))


def _component_logpdfs(model: TimingModel, pts: np.ndarray) -> np.ndarray:
    cols = []
    for c in model.components:
        chol = np.linalg.cholesky(c.covariance)
        cols.append(math.log(c.weight) + _log_gauss_chol(pts, c.mean, chol))
    return np.stack(cols, axis=1)


def logpdf(model: TimingModel, t) -> float:
    pts = _as_points(t)
    lp = _component_logpdfs(model, pts)
    m = lp.max(axis=1, keepdims=True)
    out = m[:, 0] + np.log(np.sum(np.exp(lp - m), axis=1))
    return float(out[0]) if out.shape == (1,) else out


def pdf(model: TimingModel, t: Timing3) -> float:
    """Mixture density at a timing-space point."""
    return math.exp(logpdf(model, t))


def _as_points(t) -> np.ndarray:
    if isinstance(t, Timing3):
        return t.as_array()[None, :]
    arr = np.asarray(t, dtype=float)
    return arr[None, :] if arr.ndim == 1 else arr


def _grad_logpdf(model: TimingModel, pts: np.ndarray) -> np.ndarray:
    lp = _component_logpdfs(model, pts)
    m = lp.max(axis=1, keepdims=True)
    w = np.exp(lp - m)
    w /= w.sum(axis=1, keepdims=True)
    grad = np.zeros_like(pts)
    for k, c in enumerate(model.components):
        grad += w[:, k:k + 1] * np.linalg.solve(c.covariance, (c.mean - pts).T).T
    return grad


def sample(model: TimingModel, n: int, rng: np.random.Generator) -> np.ndarray:
    counts = rng.multinomial(n, [c.weight for c in model.components])
    parts = []
    for c, m in zip(model.components, counts):
        if m:
            parts.append(rng.multivariate_normal(c.mean, c.covariance, size=m,
                                                 method="cholesky"))
    out = np.concatenate(parts) if parts else np.zeros((0, 3))
    return out


def _kmeanspp_centers(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [x[rng.integers(len(x))]]
    while len(centers) < k:
        d2 = np.min(np.sum((x[:, None, :] - np.array(centers)[None, :, :]) ** 2, axis=2), axis=1)
        total = d2.sum()
        if total <= 0:
            centers.append(x[rng.integers(len(x))])
        else:
            centers.append(x[rng.choice(len(x), p=d2 / total)])
    return np.array(centers)


def _em_fit(x: np.ndarray, k: int, rng: np.random.Generator, floor: float,
            max_iter: int, tol: float):
    n, dim = x.shape
    centers = _kmeanspp_centers(x, k, rng)
    assign = np.argmin(np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2), axis=1)
    resp = np.zeros((n, k))
    resp[np.arange(n), assign] = 1.0

    def m_step(resp):
        nk = resp.sum(axis=0) + 1e-300
        weights = nk / n
        means = (resp.T @ x) / nk[:, None]
        covs = np.empty((k, dim, dim))
        for j in range(k):
            d = x - means[j]
            covs[j] = (resp[:, j:j + 1] * d).T @ d / nk[j] + floor * np.eye(dim)
        return weights, means, covs

    weights, means, covs = m_step(resp)
    prev = (weights, means, covs)
    history: List[float] = []
    for it in range(max_iter + 1):
        lp = np.stack([
            np.log(max(weights[j], 1e-300)) + _log_gauss_chol(x, means[j], np.linalg.cholesky(covs[j]))
            for j in range(k)
        ], axis=1)
        m = lp.max(axis=1, keepdims=True)
        ll = float(np.sum(m[:, 0] + np.log(np.sum(np.exp(lp - m), axis=1))))
        if history and ll < history[-1]:
            weights, means, covs = prev  # covariance floor broke monotonicity; keep better iterate
            break
        converged = bool(history) and ll - history[-1] < tol
        history.append(ll)
        if converged or it == max_iter:
            break
        prev = (weights, means, covs)
        resp = np.exp(lp - m)
        resp /= resp.sum(axis=1, keepdims=True)
        weights, means, covs = m_step(resp)
    return weights, means, covs, history


def fit_gmm(points: Sequence[Timing3], k_max: int = 5, seed: int = 0,
            max_iter: int = EM_MAX_ITER, tol: float = EM_TOL) -> TimingModel:
    """Fit a timing model by EM, selecting the component count by BIC.

    Deterministic given the seed. K is capped so every component can hold
    at least four points; a degenerate all-identical point set collapses to
    one floor-covariance component.
    """
    if not len(points):
        raise ValueError("need at least one timing point")
    x = np.array([p.as_array() if isinstance(p, Timing3) else np.asarray(p, float)
                  for p in points])
    n = len(x)
    floor = _cov_floor(x)
    n_distinct = len(np.unique(x, axis=0))
    k_cap = max(1, min(k_max, n // MIN_POINTS_PER_COMPONENT, n_distinct))

    best = None
    for k in range(1, k_cap + 1):
        rng = np.random.default_rng([seed, k])
        weights, means, covs, history = _em_fit(x, k, rng, floor, max_iter, tol)
        n_params = (k - 1) + 3 * k + 6 * k
        bic = -2.0 * history[-1] + n_params * math.log(n)
        if best is None or bic < best[0] - 1e-12:
            best = (bic, k, weights, means, covs, history)
    _, k, weights, means, covs, history = best
    comps = tuple(
        GaussianComponent(float(weights[j]), means[j], covs[j]) for j in range(k)
    )
    meta = {"k": k, "seed": seed, "final_loglik": history[-1],
            "loglik_history": list(history), "cov_floor": floor}
    return TimingModel(components=comps, n_points=n, fit_meta=meta)


# Serialization: floats via repr round-trip exactly.

def model_to_dict(model: TimingModel) -> dict:
    d = {
        "weights": [c.weight for c in model.components],
        "means": [list(map(float, c.mean)) for c in model.components],
        "covariances": [list(map(float, c.covariance.reshape(-1))) for c in model.components],
        "n_points": model.n_points,
        "fit_meta": model.fit_meta,
    }
    if model.pair is not None:
        a, b = model.pair
        d["pair"] = [{"verb": a.verb, "object": a.object},
                     {"verb": b.verb, "object": b.object}]
    return d


def model_from_dict(d: dict) -> TimingModel:
    comps = tuple(
        GaussianComponent(w, np.array(m), np.array(c).reshape(3, 3))
        for w, m, c in zip(d["weights"], d["means"], d["covariances"])
    )
    pair = None
    if "pair" in d:
        pair = (Action(d["pair"][0]["verb"], d["pair"][0]["object"]),
                Action(d["pair"][1]["verb"], d["pair"][1]["object"]))
    return TimingModel(components=comps, n_points=d["n_points"],
                       fit_meta=d.get("fit_meta", {}), pair=pair)


def model_to_json(model: TimingModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True)


def model_from_json(text: str) -> TimingModel:
    return model_from_dict(json.loads(text))


def _constrained_gaussian_max(mean: np.ndarray, cov: np.ndarray,
                              r: AllenRelation, margin: float) -> Optional[np.ndarray]:
    """Exact maximizer of one Gaussian over the (margin-tightened) region.

    Minimizes the Mahalanobis distance to the mean over the polyhedron by
    enumerating active sets; exact because the region has at most five
    facets in three dimensions.
    """
    a_eq, a_in, b_in = _region_system(r, margin)
    n_in = len(a_in)
    best, best_val = None, np.inf
    for subset in range(1 << n_in):
        rows = [a_eq[i] for i in range(len(a_eq))]
        rhs = [0.0] * len(a_eq)
        for i in range(n_in):
            if subset >> i & 1:
                rows.append(a_in[i])
                rhs.append(b_in[i])
        if not rows:
            cand = mean
        else:
            a = np.array(rows)
            b = np.array(rhs)
            gram = a @ cov @ a.T
            if np.linalg.matrix_rank(gram) < len(rows):
                continue
            cand = mean - cov @ a.T @ np.linalg.solve(gram, a @ mean - b)
        if np.any(cand @ a_in.T < b_in - 1e-9):
            continue
        if len(a_eq) and np.any(np.abs(cand @ a_eq.T) > 1e-7):
            continue
        val = float((cand - mean) @ np.linalg.solve(cov, cand - mean))
        if val < best_val - 1e-15:
            best, best_val = cand, val
    return best


def conditioned_argmax(model: TimingModel, r: AllenRelation,
                       margin: float = 0.05) -> Timing3:
    """Maximize the model density over the Allen region of ``r``.

    Candidates are the exact per-component constrained maxima, the
    projected component/global means, and a deterministic batch of model
    draws projected into the region; the best few are refined by projected
    gradient ascent on the log-density. The result always satisfies
    ``region_contains`` at eps = 0 when margin > 0.
    """
    seeds = [model.mean()] + [c.mean for c in model.components]
    for c in model.components:
        evals, evecs = np.linalg.eigh(c.covariance)
        for i in range(3):
            step = math.sqrt(max(evals[i], 0.0)) * evecs[:, i]
            seeds.append(c.mean + step)
            seeds.append(c.mean - step)
    rng = np.random.default_rng(_ARGMAX_DRAW_SEED)
    draws = sample(model, 128, rng)
    pts = np.array(seeds + list(draws))
    cands = [p.as_array() for p in region_project_batch(pts, r, margin)]
    for c in model.components:
        exact = _constrained_gaussian_max(c.mean, c.covariance, r, margin)
        if exact is not None:
            cands.append(region_project_batch(exact[None, :], r, margin)[0].as_array())
    cand_arr = np.array(cands)
    scores = logpdf(model, cand_arr)
    order = np.argsort(-scores, kind="stable")[:8]
    starts = cand_arr[order]

    x = starts.copy()
    fx = logpdf(model, x)
    eta = np.full(len(x), 1.0)
    for _ in range(200):
        g = _grad_logpdf(model, x)
        gnorm = np.linalg.norm(g, axis=1)
        if np.all(gnorm < 1e-10) or np.all(eta < 1e-14):
            break
        stepped = x + eta[:, None] * g
        proj = np.array([p.as_array() for p in region_project_batch(stepped, r, margin)])
        fp = logpdf(model, proj)
        improved = fp > fx + 1e-15
        x[improved] = proj[improved]
        fx[improved] = fp[improved]
        eta[improved] *= 1.5
        eta[~improved] *= 0.5
    best_idx = int(np.argmax(fx))
    # final snap through the projection keeps equality rows exactly zero
    result = region_project_batch(x[best_idx][None, :], r, margin)[0]
    return result
