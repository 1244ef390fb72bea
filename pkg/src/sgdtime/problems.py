"""Benchmark objectives with deterministic stochastic-gradient oracles.

Every problem bundles the objective, its exact gradient, and a stochastic
oracle driven by counter-based RNG streams.  Each (worker, round) pair owns
one stream, so any scheduling order (synchronous rounds, asynchronous
completions) draws identical noise for the same logical gradient.  That
property is what makes the method-equivalence tests bitwise.

Example
-------
>>> spec = make_quadratic(dimension=4, L=1.0, sigma2=1.0,
...                       x0=[2.0, 0.0, 0.0, 0.0], n=2)
>>> g = sample_gradient(spec, worker=0, point=spec.start_point,
...                     stream_cursor=stream_cursor(0, 0))
>>> g.gradient.shape
(4,)
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

__all__ = [
    "GradSample",
    "ProblemSpec",
    "make_toy_adversarial",
    "make_quadratic",
    "make_synthetic_logreg",
    "logreg_from_data",
    "sample_gradient",
    "stream_cursor",
    "split_cursor",
    "STEP_CAP",
]

# A stream cursor packs (round, step) into one integer position.  Steps per
# (worker, round) stream are capped so the packing is unambiguous.
STEP_CAP = 1 << 20

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    # splitmix64 finalizer; full 64-bit avalanche
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _stream_key(seed: int, worker: int, round_index: int) -> np.ndarray:
    """128-bit Philox key for the (seed, worker, round) stream."""
    a = _mix64((seed & _MASK64) ^ _mix64(worker + _GOLDEN))
    b = _mix64((round_index + _GOLDEN) ^ _mix64(a + _GOLDEN))
    return np.array([a, b], dtype=np.uint64)


def _fresh_generator(seed: int, worker: int, round_index: int) -> np.random.Generator:
    """Reference construction of a (worker, round) stream."""
    return np.random.Generator(np.random.Philox(key=_stream_key(seed, worker, round_index)))


class StreamPool:
    """Reusable Philox generator for hot loops.

    ``generator(seed, worker, round)`` rewinds one pooled bit generator to
    the exact state a fresh ``_fresh_generator`` call would produce, without
    paying object construction per stream.  Bit-for-bit equality with the
    fresh path is pinned by tests.
    """

    def __init__(self) -> None:
        self._philox = np.random.Philox(key=0)
        self._template = self._philox.state
        self._generator = np.random.Generator(self._philox)

    def generator(self, seed: int, worker: int, round_index: int) -> np.random.Generator:
        st = self._template
        st["state"]["key"][:] = _stream_key(seed, worker, round_index)
        st["state"]["counter"][:] = 0
        st["buffer_pos"] = 64  # force a refill on first use
        st["buffer"][:] = 0
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self._philox.state = st
        return self._generator


def stream_cursor(round_index: int, step_index: int) -> int:
    """Pack (round, step) into a stream position."""
    if not 0 <= step_index < STEP_CAP:
        raise ValueError(f"step_index must lie in [0, {STEP_CAP})")
    if round_index < 0:
        raise ValueError("round_index must be nonnegative")
    return round_index * STEP_CAP + step_index


def split_cursor(cursor: int) -> tuple[int, int]:
    """Inverse of :func:`stream_cursor`."""
    if cursor < 0:
        raise ValueError("cursor must be nonnegative")
    return divmod(cursor, STEP_CAP)


@dataclass(frozen=True)
class GradSample:
    """One stochastic-gradient draw.

    Attributes:
        gradient: the sampled gradient vector.
        worker: index of the worker whose stream produced the draw.
        noise_draw_id: position in that worker's RNG stream.
    """

    gradient: np.ndarray
    worker: int
    noise_draw_id: int


class _Model:
    """Internal gradient/noise machinery shared by the built-in problems.

    ``draws`` are whatever the oracle consumes per step: Gaussian noise rows
    for the additive-noise problems, data indices for logistic regression.
    """

    def f(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad_rows(self, Z: np.ndarray, workers: np.ndarray) -> np.ndarray:
        """Row i is the exact gradient of worker ``workers[i]`` at ``Z[i]``."""
        raise NotImplementedError

    def draw_block(self, gen: np.random.Generator, count: int) -> np.ndarray:
        raise NotImplementedError

    def stoch_rows(self, Z: np.ndarray, draws: np.ndarray, workers: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class _ToyModel(_Model):
    """f(x) = x^2/2 for x >= 0, x^2/4 otherwise; additive N(0, sigma^2) noise."""

    def __init__(self, sigma: float) -> None:
        self.sigma = sigma

    def f(self, x: np.ndarray) -> float:
        v = float(x[0])
        return v * v / 2.0 if v >= 0.0 else v * v / 4.0

    def grad(self, x: np.ndarray) -> np.ndarray:
        v = float(x[0])
        return np.array([v if v >= 0.0 else v / 2.0])

    def grad_rows(self, Z: np.ndarray, workers: np.ndarray) -> np.ndarray:
        return np.where(Z >= 0.0, Z, Z / 2.0)

    def draw_block(self, gen: np.random.Generator, count: int) -> np.ndarray:
        return gen.standard_normal((count, 1)) * self.sigma

    def stoch_rows(self, Z: np.ndarray, draws: np.ndarray, workers: np.ndarray) -> np.ndarray:
        return self.grad_rows(Z, workers) + draws


class _QuadraticModel(_Model):
    """f_i(x) = (L/2) ||x - c_i||^2 with per-coordinate Gaussian noise.

    Homogeneous: every c_i is the origin.  Heterogeneous: centers alternate
    +shift / -shift, so the mean center (and global minimizer) stays at the
    origin and the global gradient is L * x either way.
    """

    def __init__(self, L: float, dimension: int, sigma2: float,
                 centers: Optional[np.ndarray]) -> None:
        self.L = L
        self.dimension = dimension
        self.centers = centers  # (n, d) or None
        self.coord_sigma = float(np.sqrt(sigma2 / dimension))

    def f(self, x: np.ndarray) -> float:
        if self.centers is None:
            return 0.5 * self.L * float(x @ x)
        diffs = x[None, :] - self.centers
        return 0.5 * self.L * float(np.mean(np.sum(diffs * diffs, axis=1)))

    def grad(self, x: np.ndarray) -> np.ndarray:
        # mean center is the origin by construction in both regimes
        return self.L * x

    def grad_rows(self, Z: np.ndarray, workers: np.ndarray) -> np.ndarray:
        if self.centers is None:
            return self.L * Z
        return self.L * (Z - self.centers[workers])

    def draw_block(self, gen: np.random.Generator, count: int) -> np.ndarray:
        return gen.standard_normal((count, self.dimension)) * self.coord_sigma

    def stoch_rows(self, Z: np.ndarray, draws: np.ndarray, workers: np.ndarray) -> np.ndarray:
        return self.grad_rows(Z, workers) + draws


def _sigmoid(a: np.ndarray) -> np.ndarray:
    # numerically stable logistic function
    out = np.empty_like(a, dtype=float)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


class _LogregModel(_Model):
    """Binary logistic loss over a fixed design matrix.

    The oracle samples one data point uniformly per gradient call; every
    worker sees the full dataset.
    """

    def __init__(self, X: np.ndarray, y: np.ndarray) -> None:
        self.X = X
        self.y = y
        self.m = X.shape[0]

    def f(self, x: np.ndarray) -> float:
        margins = self.y * (self.X @ x)
        # log(1 + exp(-t)) computed stably
        return float(np.mean(np.logaddexp(0.0, -margins)))

    def grad(self, x: np.ndarray) -> np.ndarray:
        margins = self.y * (self.X @ x)
        w = -self.y * _sigmoid(-margins)
        return (self.X.T @ w) / self.m

    def per_sample_grads(self, x: np.ndarray) -> np.ndarray:
        margins = self.y * (self.X @ x)
        w = -self.y * _sigmoid(-margins)
        return w[:, None] * self.X

    def grad_rows(self, Z: np.ndarray, workers: np.ndarray) -> np.ndarray:
        S = _sigmoid(-(Z @ self.X.T) * self.y[None, :])  # (rows, m)
        W = -(self.y[None, :] * S) / self.m
        return W @ self.X

    def draw_block(self, gen: np.random.Generator, count: int) -> np.ndarray:
        return gen.integers(0, self.m, size=count)

    def stoch_rows(self, Z: np.ndarray, draws: np.ndarray, workers: np.ndarray) -> np.ndarray:
        idx = draws.astype(np.intp)
        Xs = self.X[idx]
        a = np.einsum("rd,rd->r", Xs, Z)
        ys = self.y[idx]
        s = _sigmoid(-ys * a)
        return (-(ys * s))[:, None] * Xs


@dataclass(frozen=True)
class ProblemSpec:
    """Immutable description of an optimization problem instance.

    Attributes:
        dimension: ambient dimension d.
        smoothness_L: gradient Lipschitz constant of the global objective.
        noise_sigma2: bound on E||grad sample - exact grad||^2.
        start_point: initial iterate x0.
        delta_gap: f(x0) - inf f.
        dist_B: ||x0 - x*|| when the problem is convex with known minimizer.
        workers_n: number of workers holding oracles.
        heterogeneous: whether worker objectives differ.
    """

    dimension: int
    smoothness_L: float
    noise_sigma2: float
    start_point: np.ndarray
    delta_gap: float
    dist_B: Optional[float]
    workers_n: int
    heterogeneous: bool
    f_inf: float = field(repr=False)
    model: _Model = field(repr=False)
    kind: str = field(repr=False, default="custom")
    init_params: dict = field(repr=False, default_factory=dict)

    def f(self, x: np.ndarray) -> float:
        """Global objective value."""
        return self.model.f(np.asarray(x, dtype=float))

    def grad(self, x: np.ndarray) -> np.ndarray:
        """Exact gradient of the global objective."""
        return self.model.grad(np.asarray(x, dtype=float))

    def f_gap(self, x: np.ndarray) -> float:
        """f(x) minus the known/computed infimum."""
        return self.f(x) - self.f_inf

    def worker_grad(self, worker: int, x: np.ndarray) -> np.ndarray:
        """Exact gradient of worker ``worker``'s local objective."""
        self._check_worker(worker)
        Z = np.asarray(x, dtype=float)[None, :]
        return self.model.grad_rows(Z, np.array([worker]))[0]

    def _check_worker(self, worker: int) -> None:
        if not 0 <= worker < self.workers_n:
            raise ValueError(
                f"worker {worker} out of range for {self.workers_n} workers")


def _as_start(x0: Union[float, Sequence[float], np.ndarray], dimension: int) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    if x.shape != (dimension,):
        raise ValueError(f"x0 must have shape ({dimension},), got {x.shape}")
    return x


def make_toy_adversarial(sigma: float = 10.0, x0: float = -30.0, n: int = 100) -> ProblemSpec:
    """Piecewise quadratic on the line with asymmetric curvature.

    f(x) = x^2/2 on x >= 0 and x^2/4 on x < 0; the oracle adds N(0, sigma^2)
    noise (sigma is a standard deviation).  The curvature mismatch at the
    origin is what biases naive local methods, which makes this the stress
    test for step-size rules.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if n < 1:
        raise ValueError("n must be a positive integer")
    start = np.array([float(x0)])
    model = _ToyModel(float(sigma))
    return ProblemSpec(
        dimension=1,
        smoothness_L=1.0,
        noise_sigma2=float(sigma) ** 2,
        start_point=start,
        delta_gap=model.f(start),
        dist_B=abs(float(x0)),
        workers_n=n,
        heterogeneous=False,
        f_inf=0.0,
        model=model,
        kind="toy_adversarial",
        init_params={"sigma": float(sigma), "x0": float(x0), "n": n},
    )


def make_quadratic(dimension: int, L: float, sigma2: float,
                   x0: Union[Sequence[float], np.ndarray], n: int,
                   heterogeneous_shift: Optional[Sequence[float]] = None) -> ProblemSpec:
    """Quadratic bowl centered at the origin, optionally split across workers.

    With ``heterogeneous_shift`` = s, workers alternate centers +s and -s
    (n must be even), which leaves the global objective's minimizer and
    gradient identical to the homogeneous case.
    """
    if dimension < 1:
        raise ValueError("dimension must be a positive integer")
    if L <= 0:
        raise ValueError("L must be positive")
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    if n < 1:
        raise ValueError("n must be a positive integer")
    start = _as_start(x0, dimension)
    centers = None
    f_inf = 0.0
    if heterogeneous_shift is not None:
        shift = np.asarray(heterogeneous_shift, dtype=float)
        if shift.shape != (dimension,):
            raise ValueError("heterogeneous_shift must match the dimension")
        if n % 2 != 0:
            raise ValueError("heterogeneous centers need an even worker count")
        signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
        centers = signs[:, None] * shift[None, :]
        f_inf = 0.5 * L * float(shift @ shift)
    B = float(np.linalg.norm(start))
    model = _QuadraticModel(float(L), dimension, float(sigma2), centers)
    return ProblemSpec(
        dimension=dimension,
        smoothness_L=float(L),
        noise_sigma2=float(sigma2),
        start_point=start,
        delta_gap=0.5 * float(L) * B * B,
        dist_B=B,
        workers_n=n,
        heterogeneous=centers is not None,
        f_inf=f_inf,
        model=model,
        kind="quadratic",
        init_params={
            "dimension": dimension, "L": float(L), "sigma2": float(sigma2),
            "x0": [float(v) for v in start], "n": n,
            "heterogeneous_shift": (None if heterogeneous_shift is None
                                    else [float(v) for v in shift]),
        },
    )


def _logreg_minimize(model: _LogregModel, L: float, dimension: int) -> np.ndarray:
    """Deterministic accelerated full-gradient descent to 1e-10 gradient norm.

    Separable data pushes the minimizer to infinity along a flat valley;
    the iteration cap keeps that case finite and is loud about it.
    """
    w = np.zeros(dimension)
    v = w.copy()
    step = 1.0 / L
    tol_sq = 1e-20
    for k in range(500_000):
        g = model.grad(v)
        w_next = v - step * g
        v = w_next + (k / (k + 3.0)) * (w_next - w)
        w = w_next
        # the momentum point trails the iterate, so its gradient is a
        # cheap trigger for the authoritative check at w itself
        if g @ g <= tol_sq:
            gw = model.grad(w)
            if gw @ gw <= tol_sq:
                return w
    warnings.warn("logreg minimizer hit its iteration cap before reaching "
                  "1e-10 gradient norm (data may be linearly separable); "
                  "delta_gap and dist_B are correspondingly approximate",
                  RuntimeWarning, stacklevel=2)
    return w


def _logreg_noise_bound(model: _LogregModel, seed: int, dimension: int) -> float:
    """Deterministic estimate of a global variance bound for the oracle.

    Exact single-sample variance is evaluated at x0 = 0, at a seeded probe
    set across several scales, and at the large-||w|| limit, then maximized.
    The stored value has to bound the variance everywhere (the schedules
    treat it as the assumption-level sigma^2), so the x0 value alone would
    be too optimistic.
    """
    if model.m == 1:
        return 0.0

    def variance_at(w: np.ndarray) -> float:
        G = model.per_sample_grads(w)
        mean = G.mean(axis=0)
        diffs = G - mean
        return float(np.mean(np.sum(diffs * diffs, axis=1)))

    best = variance_at(np.zeros(dimension))
    probe_rng = np.random.default_rng([seed & _MASK64, 0x5EED])
    for scale in (0.5, 1.0, 2.0, 4.0):
        for _ in range(16):
            best = max(best, variance_at(scale * probe_rng.standard_normal(dimension)))
    # limit of the variance as every margin is misclassified
    limit = (float(np.mean(np.sum(model.X * model.X, axis=1)))
             - float(np.sum(np.mean(model.y[:, None] * model.X, axis=0) ** 2)))
    return max(best, limit)


def logreg_from_data(X: np.ndarray, y: np.ndarray, n: int,
                     noise_seed: int = 0) -> ProblemSpec:
    """Build the logistic-regression problem from an explicit dataset.

    ``X`` is (samples, dimension), ``y`` entries must be +1 or -1.  Used by
    :func:`make_synthetic_logreg` and handy for tests that need full control
    of the data.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("X must be (samples, dim) with matching label vector")
    if X.shape[0] < 1:
        raise ValueError("need at least one sample")
    if not np.all(np.abs(y) == 1.0):
        raise ValueError("labels must be +1 or -1")
    if n < 1:
        raise ValueError("n must be a positive integer")
    m, dimension = X.shape
    model = _LogregModel(X, y)
    L = float(np.linalg.eigvalsh(X.T @ X)[-1]) / (4.0 * m)
    start = np.zeros(dimension)
    x_star = _logreg_minimize(model, L, dimension)
    f_inf = model.f(x_star)
    return ProblemSpec(
        dimension=dimension,
        smoothness_L=L,
        noise_sigma2=_logreg_noise_bound(model, noise_seed, dimension),
        start_point=start,
        delta_gap=model.f(start) - f_inf,
        dist_B=float(np.linalg.norm(start - x_star)),
        workers_n=n,
        heterogeneous=False,
        f_inf=f_inf,
        model=model,
        kind="logreg_synth",
        init_params={"n": n},
    )


_SYNTH_CACHE: dict = {}


def make_synthetic_logreg(dimension: int, samples: int, n: int, seed: int) -> ProblemSpec:
    """Synthetic binary logistic regression with a bias column.

    Column 0 of the design matrix is the all-ones bias; remaining columns
    are standard normal.  Labels follow a ground-truth logistic model so the
    dataset is usually noisy rather than separable (small samples can still
    separate by chance, which makes the minimizer run long).  Specs are
    immutable in use, so repeat calls return the cached instance rather
    than re-running the minimizer.
    """
    key = (dimension, samples, n, seed)
    cached = _SYNTH_CACHE.get(key)
    if cached is not None:
        return cached
    if dimension < 1:
        raise ValueError("dimension must be a positive integer")
    if samples < 1:
        raise ValueError("samples must be a positive integer")
    rng = np.random.default_rng(seed)
    X = np.ones((samples, dimension))
    if dimension > 1:
        X[:, 1:] = rng.standard_normal((samples, dimension - 1))
    w_true = rng.standard_normal(dimension)
    probs = _sigmoid(X @ w_true)
    y = np.where(rng.random(samples) < probs, 1.0, -1.0)
    spec = logreg_from_data(X, y, n, noise_seed=seed)
    spec.init_params.update({"dimension": dimension, "samples": samples,
                             "n": n, "seed": seed})
    _SYNTH_CACHE[key] = spec
    return spec


def sample_gradient(spec: ProblemSpec, worker: int, point: np.ndarray,
                    stream_cursor: int, seed: int = 0) -> GradSample:
    """Draw the stochastic gradient at ``point`` for one stream position.

    The cursor addresses position (round, step) in the worker's stream via
    :func:`stream_cursor`; identical (spec, worker, point, cursor, seed)
    inputs always return identical output.  ``seed`` selects the stream
    family a run was keyed with, so a draw here reproduces the engine's
    draw for the same logical gradient.
    """
    spec._check_worker(worker)
    round_index, step = split_cursor(stream_cursor)
    x = np.asarray(point, dtype=float)
    if x.shape != (spec.dimension,):
        raise ValueError(f"point must have shape ({spec.dimension},)")
    # draws are taken in stream order; position `step` is the (step+1)-th
    gen = _fresh_generator(seed, worker, round_index)
    block = spec.model.draw_block(gen, step + 1)
    Z = x[None, :]
    g = spec.model.stoch_rows(Z, block[step:step + 1], np.array([worker]))[0]
    return GradSample(gradient=g, worker=worker, noise_draw_id=stream_cursor)
