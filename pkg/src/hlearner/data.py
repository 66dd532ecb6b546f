"""Synthetic data-generating process for composite treatments and outcomes.

A `Dgp` holds every coefficient of the generative mechanism, so it doubles
as an exact counterfactual oracle: `mean_outcome` returns the noiseless
potential outcome for any (covariates, treatment, outcome index), whether or
not that treatment was observed.

Generative model, with p covariates, K treatment components, M outcomes:

    x ~ N(0, I_p)
    s_k = (w_k . x) / sqrt(p)                      assignment score
    binary k:      t_k ~ Bernoulli(clip(sigmoid(gamma * s_k)))
    continuous k:  t_k = sigmoid(gamma * s_k + 0.5 * eps),  eps ~ N(0,1)
    mu_m(x, t) = (alpha_m . x)/sqrt(p)
                 + sum_k c_mk * (1 + (v_mk . x)/sqrt(p)) * t_k
                 + sum_{k<k'} d_mkk' * t_k * t_k'
    y_m = mu_m(x, t) + N(0, sigma_y^2)

Binary propensities are clipped to [1e-6, 1 - 1e-6] so positivity holds in
floating point even for extreme scores. Coefficients are drawn from streams
keyed by (seed, role, indices), so enlarging K or M never changes values
already drawn; dataset generation likewise uses separate streams for
covariates, treatments, and noise, so treatments can be regenerated exactly
from (x, seed) alone.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BINARY",
    "CONTINUOUS",
    "TreatmentSpec",
    "TreatmentVector",
    "Dgp",
    "Dataset",
    "sample_dgp",
    "mean_outcome",
    "mean_outcome_batch",
    "propensities",
    "assign_treatments",
    "generate_dataset",
    "enumerate_eval_treatments",
    "dgp_fingerprint",
    "save_dgp",
    "load_dgp",
    "save_dataset",
    "load_dataset",
]

BINARY = "binary"
CONTINUOUS = "continuous"

# A treatment vector is a plain float64 array of length K; binary components
# take values in {0, 1}, continuous components in [0, 1].
TreatmentVector = np.ndarray

_PROPENSITY_FLOOR = 1e-6

# Stream roles. Dataset streams (0-2) and coefficient streams (10-14) are
# disjoint so a shared seed value can never alias across uses.
_ROLE_X = 0
_ROLE_T = 1
_ROLE_NOISE = 2
_ROLE_W = 10
_ROLE_ALPHA = 11
_ROLE_C = 12
_ROLE_V = 13
_ROLE_D = 14


def _stream(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


@dataclass(frozen=True)
class TreatmentSpec:
    """Ordered kinds of the K treatment components."""

    kinds: tuple[str, ...]

    def __post_init__(self) -> None:
        kinds = tuple(self.kinds)
        object.__setattr__(self, "kinds", kinds)
        if len(kinds) < 1:
            raise ValueError("a treatment spec needs at least one component")
        for kind in kinds:
            if kind not in (BINARY, CONTINUOUS):
                raise ValueError(f"unknown treatment kind: {kind!r}")

    @classmethod
    def from_counts(cls, n_binary: int, n_continuous: int = 0) -> "TreatmentSpec":
        """Binary components first, then continuous ones."""
        return cls((BINARY,) * n_binary + (CONTINUOUS,) * n_continuous)

    @property
    def k(self) -> int:
        return len(self.kinds)

    @property
    def n_binary(self) -> int:
        return sum(1 for kind in self.kinds if kind == BINARY)

    @property
    def n_continuous(self) -> int:
        return self.k - self.n_binary

    @property
    def binary_mask(self) -> np.ndarray:
        return np.array([kind == BINARY for kind in self.kinds])


@dataclass(frozen=True, eq=False)
class Dgp:
    """All coefficients of the generative process; the evaluation oracle.

    Shapes: w (K, p) assignment weights, alpha (M, p) baselines, c (M, K)
    main effects, v (M, K, p) effect modifiers, d (M, K, K) pairwise
    interactions (strictly upper triangular, zero elsewhere).
    """

    p: int
    spec: TreatmentSpec
    m: int
    gamma: float
    sigma_y: float
    seed: int
    w: np.ndarray
    alpha: np.ndarray
    c: np.ndarray
    v: np.ndarray
    d: np.ndarray

    def __post_init__(self) -> None:
        k = self.spec.k
        expected = {
            "w": (k, self.p),
            "alpha": (self.m, self.p),
            "c": (self.m, k),
            "v": (self.m, k, self.p),
            "d": (self.m, k, k),
        }
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")


def sample_dgp(
    p: int,
    spec: TreatmentSpec,
    m: int,
    gamma: float = 1.0,
    sigma_y: float = 0.1,
    seed: int = 0,
) -> Dgp:
    """Draw all coefficients deterministically from `seed`.

    w, alpha, c, v entries are standard normal; interaction terms d_mkk' are
    N(0, 0.25) for k < k' and exactly zero elsewhere. Every coefficient
    container has its own (seed, role, index...) stream, so growing K or M
    leaves previously drawn values untouched.
    """
    if p < 1 or m < 1:
        raise ValueError("p and m must be >= 1")
    if gamma < 0 or sigma_y < 0:
        raise ValueError("gamma and sigma_y must be >= 0")
    if seed < 0:
        raise ValueError("seed must be >= 0")
    k = spec.k
    w = np.stack([_stream(seed, _ROLE_W, i).standard_normal(p) for i in range(k)])
    alpha = np.stack(
        [_stream(seed, _ROLE_ALPHA, i).standard_normal(p) for i in range(m)]
    )
    c = np.array(
        [
            [_stream(seed, _ROLE_C, i, j).standard_normal() for j in range(k)]
            for i in range(m)
        ]
    )
    v = np.array(
        [
            [_stream(seed, _ROLE_V, i, j).standard_normal(p) for j in range(k)]
            for i in range(m)
        ]
    )
    d = np.zeros((m, k, k))
    for i in range(m):
        for j in range(k):
            for j2 in range(j + 1, k):
                d[i, j, j2] = 0.5 * _stream(seed, _ROLE_D, i, j, j2).standard_normal()
    return Dgp(
        p=p, spec=spec, m=m, gamma=float(gamma), sigma_y=float(sigma_y),
        seed=int(seed), w=w, alpha=alpha, c=c, v=v, d=d,
    )


def mean_outcome(dgp: Dgp, x: np.ndarray, t: TreatmentVector, m: int) -> float:
    """Noiseless potential outcome mu_m(x, t); defines ground-truth effects."""
    if not 0 <= m < dgp.m:
        raise ValueError(f"outcome index {m} out of range [0, {dgp.m})")
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if x.shape != (dgp.p,) or t.shape != (dgp.spec.k,):
        raise ValueError(f"bad input shapes x{x.shape}, t{t.shape}")
    root_p = np.sqrt(dgp.p)
    value = float(dgp.alpha[m] @ x) / root_p
    for j in range(dgp.spec.k):
        value += dgp.c[m, j] * (1.0 + float(dgp.v[m, j] @ x) / root_p) * t[j]
    for j in range(dgp.spec.k):
        for j2 in range(j + 1, dgp.spec.k):
            value += dgp.d[m, j, j2] * t[j] * t[j2]
    return float(value)


def mean_outcome_batch(dgp: Dgp, x: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Vectorized mean outcomes for rows of (x, t); returns shape (n, M)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    t = np.atleast_2d(np.asarray(t, dtype=np.float64))
    if x.shape[1] != dgp.p or t.shape[1] != dgp.spec.k or x.shape[0] != t.shape[0]:
        raise ValueError(f"bad input shapes x{x.shape}, t{t.shape}")
    root_p = np.sqrt(dgp.p)
    mu = (x @ dgp.alpha.T) / root_p
    # modifier term: c_mk * (1 + (v_mk . x)/sqrt(p)) * t_k, summed over k
    vdotx = np.einsum("np,mkp->nmk", x, dgp.v) / root_p
    mu = mu + np.einsum("nmk,mk,nk->nm", 1.0 + vdotx, dgp.c, t)
    # pairwise interactions; d is strictly upper triangular
    pair = t[:, :, None] * t[:, None, :]
    mu = mu + np.einsum("nkl,mkl->nm", pair, dgp.d)
    return mu


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def propensities(dgp: Dgp, x: np.ndarray) -> np.ndarray:
    """Per-component assignment probabilities sigmoid(gamma * s_k), clipped
    to [1e-6, 1 - 1e-6]; shape (n, K). For continuous components this is the
    noise-free location of the assignment map, returned for diagnostics."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    scores = (x @ dgp.w.T) / np.sqrt(dgp.p)
    return np.clip(_sigmoid(dgp.gamma * scores), _PROPENSITY_FLOOR, 1.0 - _PROPENSITY_FLOOR)


def assign_treatments(dgp: Dgp, x: np.ndarray, seed: int) -> np.ndarray:
    """Confounded treatment assignment for covariate rows `x`.

    Depends only on (x, seed), never on outcomes, so rerunning it reproduces
    a dataset's treatments exactly. Components are drawn in index order from
    the (seed, 1) stream.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n = x.shape[0]
    scores = (x @ dgp.w.T) / np.sqrt(dgp.p)
    probs = propensities(dgp, x)
    rng = _stream(seed, _ROLE_T)
    t = np.empty((n, dgp.spec.k))
    for j, kind in enumerate(dgp.spec.kinds):
        if kind == BINARY:
            t[:, j] = (rng.random(n) < probs[:, j]).astype(np.float64)
        else:
            eps = rng.standard_normal(n)
            t[:, j] = _sigmoid(dgp.gamma * scores[:, j] + 0.5 * eps)
    return t


@dataclass(eq=False)
class Dataset:
    """N factual records (x_i, t_i, y_i) tied to the Dgp that produced them."""

    x: np.ndarray
    t: np.ndarray
    y: np.ndarray
    dgp_fingerprint: str = ""

    def __post_init__(self) -> None:
        if self.x.ndim != 2 or self.t.ndim != 2 or self.y.ndim != 2:
            raise ValueError("x, t, y must be 2-D arrays")
        if not (self.x.shape[0] == self.t.shape[0] == self.y.shape[0]):
            raise ValueError("x, t, y must have the same number of rows")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def k(self) -> int:
        return self.t.shape[1]

    @property
    def m(self) -> int:
        return self.y.shape[1]


def generate_dataset(dgp: Dgp, n: int, seed: int) -> Dataset:
    """Draw n records from the process. Covariates, treatment randomness, and
    outcome noise come from the disjoint streams (seed, 0), (seed, 1), and
    (seed, 2) respectively."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if seed < 0:
        raise ValueError("seed must be >= 0")
    x = _stream(seed, _ROLE_X).standard_normal((n, dgp.p))
    t = assign_treatments(dgp, x, seed)
    noise = dgp.sigma_y * _stream(seed, _ROLE_NOISE).standard_normal((n, dgp.m))
    y = mean_outcome_batch(dgp, x, t) + noise
    return Dataset(x=x, t=t, y=y, dgp_fingerprint=dgp_fingerprint(dgp))


def enumerate_eval_treatments(spec: TreatmentSpec, grid_size: int = 5) -> list[np.ndarray]:
    """All treatment combinations to evaluate effects over.

    Binary components contribute {0, 1}; continuous components contribute a
    uniform grid of `grid_size` points on [0, 1]. Ordering is lexicographic
    in component index (component 0 most significant), so the all-zeros
    reference vector always comes first.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    levels = []
    for kind in spec.kinds:
        if kind == BINARY:
            levels.append(np.array([0.0, 1.0]))
        else:
            levels.append(np.linspace(0.0, 1.0, grid_size))
    return [np.array(combo, dtype=np.float64) for combo in itertools.product(*levels)]


def _dgp_to_dict(dgp: Dgp) -> dict:
    return {
        "p": dgp.p,
        "kinds": list(dgp.spec.kinds),
        "m": dgp.m,
        "gamma": dgp.gamma,
        "sigma_y": dgp.sigma_y,
        "seed": dgp.seed,
        "w": dgp.w.tolist(),
        "alpha": dgp.alpha.tolist(),
        "c": dgp.c.tolist(),
        "v": dgp.v.tolist(),
        "d": dgp.d.tolist(),
    }


def _dgp_from_dict(doc: dict) -> Dgp:
    return Dgp(
        p=int(doc["p"]),
        spec=TreatmentSpec(tuple(doc["kinds"])),
        m=int(doc["m"]),
        gamma=float(doc["gamma"]),
        sigma_y=float(doc["sigma_y"]),
        seed=int(doc["seed"]),
        w=np.array(doc["w"], dtype=np.float64),
        alpha=np.array(doc["alpha"], dtype=np.float64),
        c=np.array(doc["c"], dtype=np.float64),
        v=np.array(doc["v"], dtype=np.float64).reshape(int(doc["m"]), len(doc["kinds"]), int(doc["p"])),
        d=np.array(doc["d"], dtype=np.float64),
    )


def dgp_fingerprint(dgp: Dgp) -> str:
    """Short content hash identifying a Dgp across files and runs."""
    blob = json.dumps(_dgp_to_dict(dgp), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def save_dgp(dgp: Dgp, path) -> None:
    """JSON document with every field; floats round-trip bit-exactly."""
    doc = _dgp_to_dict(dgp)
    doc["fingerprint"] = dgp_fingerprint(dgp)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_dgp(path) -> Dgp:
    with open(path) as fh:
        doc = json.load(fh)
    dgp = _dgp_from_dict(doc)
    stored = doc.get("fingerprint")
    if stored is not None and stored != dgp_fingerprint(dgp):
        raise ValueError(f"fingerprint mismatch in {path}")
    return dgp


def _dataset_header(p: int, k: int, m: int) -> str:
    cols = (
        [f"x{i}" for i in range(p)]
        + [f"t{i}" for i in range(k)]
        + [f"y{i}" for i in range(m)]
    )
    return ",".join(cols)


def save_dataset(dataset: Dataset, path) -> None:
    """Delimited text table, one record per line, 17 significant digits."""
    table = np.hstack([dataset.x, dataset.t, dataset.y])
    np.savetxt(
        path,
        table,
        fmt="%.17g",
        delimiter=",",
        header=_dataset_header(dataset.p, dataset.k, dataset.m),
        comments="",
    )


def load_dataset(path, dgp: Dgp | None = None) -> Dataset:
    """Read a dataset table; column counts come from the header. When `dgp`
    is given, dimensions are validated and the fingerprint restored."""
    with open(path) as fh:
        header = fh.readline().strip()
        names = header.split(",")
        p = sum(1 for c in names if c.startswith("x"))
        k = sum(1 for c in names if c.startswith("t"))
        m = sum(1 for c in names if c.startswith("y"))
        if p + k + m != len(names) or min(p, k, m) < 1:
            raise ValueError(f"unrecognized dataset header: {header!r}")
        table = np.loadtxt(fh, delimiter=",", ndmin=2)
    if table.shape[1] != p + k + m:
        raise ValueError("row width does not match header")
    fingerprint = ""
    if dgp is not None:
        if (p, k, m) != (dgp.p, dgp.spec.k, dgp.m):
            raise ValueError(
                f"dataset dimensions (p={p}, K={k}, M={m}) do not match the Dgp"
            )
        fingerprint = dgp_fingerprint(dgp)
    return Dataset(
        x=table[:, :p], t=table[:, p : p + k], y=table[:, p + k :],
        dgp_fingerprint=fingerprint,
    )
