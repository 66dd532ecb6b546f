"""Learners for individualised potential-outcome prediction.

Three learners share one training and prediction contract:

* H-Learner: an embedding layer maps a treatment vector and a one-hot
  outcome index through two affine maps into a joint embedding (treatment
  half first); a hypernetwork maps that embedding to the full flat parameter
  vector of a small target network, which then predicts the potential
  outcome from the covariates. Only the embedding parameters (psi) and the
  hypernetwork parameters (phi) are trainable; target-network weights exist
  solely as hypernetwork outputs and are never stored as trained state.
* S-Learner: one multitask network on concat(x, t) emitting all M outcomes.
* xS-Learner: M independent single-output networks on concat(x, t), one per
  outcome, each trained separately.

All train on plain factual squared error, averaged over records and
outcomes, with minibatch Adam, a seeded train/validation split, and
keep-best-validation early stopping. Training is bitwise deterministic
given (dataset, config).

The psi parameter vector uses the same canonical layout as network
parameters: treatment map weights (K, d_t) row-major, treatment bias, then
outcome map weights (M, d_y) row-major, outcome bias.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .nn import (
    Activation,
    AdamState,
    NetShape,
    _elu,
    _elu_prime,
    adam_step,
    backward,
    forward,
    init_params,
    layer_slices,
    param_count,
)

__all__ = [
    "HLEARNER",
    "SLEARNER",
    "XSLEARNER",
    "ALL_LEARNERS",
    "TrainingDiverged",
    "TrainConfig",
    "EmbedderParams",
    "HLearnerModel",
    "BaselineModel",
    "embed",
    "generate_target_params",
    "predict",
    "predict_all",
    "predict_batch",
    "predict_factual",
    "hlearner_loss_and_grads",
    "init_hlearner",
    "init_baseline",
    "trainable_vector",
    "with_trainable",
    "train",
    "save_model",
    "load_model",
]

HLEARNER = "hlearner"
SLEARNER = "slearner"
XSLEARNER = "xslearner"
ALL_LEARNERS = (HLEARNER, SLEARNER, XSLEARNER)


class TrainingDiverged(RuntimeError):
    """Raised when training hits a non-finite loss or gradient."""


@dataclass(frozen=True)
class TrainConfig:
    """Shared training hyperparameters.

    The embedding and hypernetwork sizes apply to the H-Learner; baselines
    reuse the hypernetwork hidden widths for their own hidden layers so all
    learners get the same depth and width budget.
    """

    learning_rate: float = 0.005
    embedding_size: int = 32
    hypernet_hidden: tuple[int, ...] = (100, 100)
    target_hidden: tuple[int, ...] = (32,)
    batch_size: int = 128
    max_epochs: int = 300
    validation_fraction: float = 0.3
    patience: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "hypernet_hidden", tuple(int(w) for w in self.hypernet_hidden))
        object.__setattr__(self, "target_hidden", tuple(int(w) for w in self.target_hidden))
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.embedding_size < 2:
            raise ValueError("embedding_size must be >= 2")
        if min(self.hypernet_hidden, default=1) < 1 or min(self.target_hidden, default=1) < 1:
            raise ValueError("hidden widths must be >= 1")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs, patience must be >= 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in (0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "embedding_size": self.embedding_size,
            "hypernet_hidden": list(self.hypernet_hidden),
            "target_hidden": list(self.target_hidden),
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "validation_fraction": self.validation_fraction,
            "patience": self.patience,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        known = set(cls().to_dict())
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**doc)


@dataclass(eq=False)
class EmbedderParams:
    """The two affine maps (psi) producing the treatment-outcome embedding."""

    w_t: np.ndarray
    b_t: np.ndarray
    w_y: np.ndarray
    b_y: np.ndarray

    def __post_init__(self) -> None:
        if (
            self.w_t.ndim != 2
            or self.w_y.ndim != 2
            or self.b_t.shape != (self.w_t.shape[1],)
            or self.b_y.shape != (self.w_y.shape[1],)
        ):
            raise ValueError("inconsistent embedder parameter shapes")

    @property
    def k(self) -> int:
        return self.w_t.shape[0]

    @property
    def m(self) -> int:
        return self.w_y.shape[0]

    @property
    def d_t(self) -> int:
        return self.w_t.shape[1]

    @property
    def d_y(self) -> int:
        return self.w_y.shape[1]

    @property
    def n_params(self) -> int:
        return self.w_t.size + self.b_t.size + self.w_y.size + self.b_y.size

    def to_flat(self) -> np.ndarray:
        return np.concatenate(
            [self.w_t.ravel(), self.b_t, self.w_y.ravel(), self.b_y]
        )

    @classmethod
    def from_flat(cls, vec: np.ndarray, k: int, m: int, d_t: int, d_y: int) -> "EmbedderParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != k * d_t + d_t + m * d_y + d_y:
            raise ValueError("flat psi vector has the wrong length")
        pos = 0
        w_t = vec[pos : pos + k * d_t].reshape(k, d_t)
        pos += k * d_t
        b_t = vec[pos : pos + d_t]
        pos += d_t
        w_y = vec[pos : pos + m * d_y].reshape(m, d_y)
        pos += m * d_y
        b_y = vec[pos:]
        return cls(w_t=w_t, b_t=b_t, w_y=w_y, b_y=b_y)


@dataclass(eq=False)
class HLearnerModel:
    """Embedder (psi) + hypernetwork (phi) + target network shape.

    Target parameters are generated per treatment-outcome embedding and are
    never part of the model state.
    """

    embedder: EmbedderParams
    hypernet_shape: NetShape
    hypernet_params: np.ndarray
    target_shape: NetShape

    def __post_init__(self) -> None:
        d = self.embedder.d_t + self.embedder.d_y
        if self.hypernet_shape.n_in != d:
            raise ValueError(
                f"hypernet input width {self.hypernet_shape.n_in} != embedding size {d}"
            )
        if self.hypernet_shape.n_out != param_count(self.target_shape):
            raise ValueError(
                f"hypernet output width {self.hypernet_shape.n_out} != "
                f"target parameter count {param_count(self.target_shape)}"
            )
        if self.target_shape.n_out != 1:
            raise ValueError("target network must have a single scalar output")
        if self.hypernet_params.shape != (param_count(self.hypernet_shape),):
            raise ValueError("hypernet parameter vector length mismatch")

    @property
    def p(self) -> int:
        return self.target_shape.n_in

    @property
    def k(self) -> int:
        return self.embedder.k

    @property
    def m(self) -> int:
        return self.embedder.m


@dataclass(eq=False)
class BaselineModel:
    """S-Learner (one multitask net) or xS-Learner (one net per outcome)."""

    kind: str
    shape: NetShape
    nets: list[np.ndarray]
    m: int

    def __post_init__(self) -> None:
        if self.kind not in (SLEARNER, XSLEARNER):
            raise ValueError(f"unknown baseline kind: {self.kind!r}")
        if self.kind == SLEARNER:
            if len(self.nets) != 1 or self.shape.n_out != self.m:
                raise ValueError("S-Learner needs one net with M outputs")
        else:
            if len(self.nets) != self.m or self.shape.n_out != 1:
                raise ValueError("xS-Learner needs M single-output nets")
        for net in self.nets:
            if net.shape != (param_count(self.shape),):
                raise ValueError("baseline parameter vector length mismatch")


def _onehot(m: int, size: int) -> np.ndarray:
    if not 0 <= m < size:
        raise ValueError(f"outcome index {m} out of range [0, {size})")
    e = np.zeros(size)
    e[m] = 1.0
    return e


def embed(embedder: EmbedderParams, t: np.ndarray, m: int, n_outcomes: int) -> np.ndarray:
    """e(t, m) = concat(affine_t(t), affine_y(onehot(m))), treatment half first."""
    t = np.asarray(t, dtype=np.float64)
    if t.shape != (embedder.k,):
        raise ValueError(f"treatment vector of shape {t.shape}, expected ({embedder.k},)")
    if n_outcomes != embedder.m:
        raise ValueError(f"embedder was built for {embedder.m} outcomes, not {n_outcomes}")
    one = _onehot(m, n_outcomes)
    return np.concatenate([t @ embedder.w_t + embedder.b_t, one @ embedder.w_y + embedder.b_y])


def generate_target_params(model: HLearnerModel, e_ty: np.ndarray) -> np.ndarray:
    """Run the hypernetwork: embedding in, flat target parameters out."""
    theta, _ = forward(model.hypernet_shape, model.hypernet_params, e_ty)
    return theta


def predict(model: HLearnerModel, x: np.ndarray, t: np.ndarray, m: int) -> float:
    """Potential-outcome prediction f(x; theta(t, m))."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.p,):
        raise ValueError(f"covariate vector of shape {x.shape}, expected ({model.p},)")
    e_ty = embed(model.embedder, t, m, model.m)
    theta = generate_target_params(model, e_ty)
    out, _ = forward(model.target_shape, theta, x)
    return float(out[0])


def _embed_rows(embedder: EmbedderParams, t_batch: np.ndarray) -> np.ndarray:
    """Embeddings for every (record, outcome) pair, record-major, outcome-minor."""
    et = t_batch @ embedder.w_t + embedder.b_t
    ey = embedder.w_y + embedder.b_y
    return np.hstack([np.repeat(et, embedder.m, axis=0), np.tile(ey, (len(t_batch), 1))])


def _target_rows_forward(shape: NetShape, thetas: np.ndarray, x_rows: np.ndarray):
    """Forward through the target net with a separate parameter vector per row."""
    slices = layer_slices(shape)
    zs, acts = [], [x_rows]
    a = x_rows
    for i, (ws, bs, (n_in, n_out)) in enumerate(slices):
        w = thetas[:, ws].reshape(-1, n_in, n_out)
        z = np.einsum("ri,rio->ro", a, w) + thetas[:, bs]
        zs.append(z)
        a = _elu(z) if i < len(slices) - 1 else z
        acts.append(a)
    return a, (zs, acts)


def _target_rows_backward(shape: NetShape, thetas: np.ndarray, cache, upstream: np.ndarray) -> np.ndarray:
    """Per-row gradients of sum(upstream * output) with respect to each row's theta."""
    zs, acts = cache
    slices = layer_slices(shape)
    dtheta = np.zeros_like(thetas)
    delta = upstream
    for i in range(len(slices) - 1, -1, -1):
        ws, bs, (n_in, n_out) = slices[i]
        w = thetas[:, ws].reshape(-1, n_in, n_out)
        dtheta[:, ws] = np.einsum("ri,ro->rio", acts[i], delta).reshape(len(thetas), -1)
        dtheta[:, bs] = delta
        delta = np.einsum("ro,rio->ri", delta, w)
        if i > 0:
            delta = delta * _elu_prime(zs[i - 1])
    return dtheta


def _as_batch_arrays(batch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if (
        isinstance(batch, tuple)
        and len(batch) == 3
        and isinstance(batch[0], np.ndarray)
        and batch[0].ndim == 2
    ):
        x, t, y = batch
    else:
        x = np.stack([np.asarray(rec[0], dtype=np.float64) for rec in batch])
        t = np.stack([np.asarray(rec[1], dtype=np.float64) for rec in batch])
        y = np.stack([np.asarray(rec[2], dtype=np.float64) for rec in batch])
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("empty batch")
    return x, t, y


def _hlearner_forward_rows(model: HLearnerModel, x: np.ndarray, t: np.ndarray):
    e_rows = _embed_rows(model.embedder, t)
    thetas, hcache = forward(model.hypernet_shape, model.hypernet_params, e_rows)
    x_rows = np.repeat(x, model.m, axis=0)
    preds, tcache = _target_rows_forward(model.target_shape, thetas, x_rows)
    return preds[:, 0], thetas, hcache, tcache


def hlearner_loss_and_grads(model: HLearnerModel, batch):
    """Factual mean squared error over (record, outcome) pairs and its
    gradients with respect to psi and phi.

    The backward path runs upstream through each generated target network to
    get per-row dL/dtheta, feeds those as upstream into the hypernetwork to
    accumulate grad_phi and dL/d(embedding), then splits the embedding
    gradient into its treatment and outcome halves to accumulate grad_psi.
    """
    x, t, y = _as_batch_arrays(batch)
    if x.shape[1] != model.p or t.shape[1] != model.k or y.shape[1] != model.m:
        raise ValueError("batch dimensions do not match the model")
    n_rows = len(x) * model.m
    with np.errstate(over="ignore", invalid="ignore"):
        preds, thetas, hcache, tcache = _hlearner_forward_rows(model, x, t)
        diff = preds - y.reshape(-1)
        loss = float(np.mean(diff * diff))
        if not np.isfinite(loss):
            raise ValueError(f"non-finite loss over a batch of {len(x)} records")
        dpred = (2.0 / n_rows) * diff
        dtheta = _target_rows_backward(model.target_shape, thetas, tcache, dpred[:, None])
        grad_phi, d_embed = backward(
            model.hypernet_shape, model.hypernet_params, hcache, dtheta
        )
    d_t = model.embedder.d_t
    d_et, d_ey = d_embed[:, :d_t], d_embed[:, d_t:]
    t_rows = np.repeat(t, model.m, axis=0)
    grad_psi = np.concatenate(
        [
            (t_rows.T @ d_et).ravel(),
            d_et.sum(axis=0),
            d_ey.reshape(len(x), model.m, -1).sum(axis=0).ravel(),
            d_ey.sum(axis=0),
        ]
    )
    return loss, grad_psi, grad_phi


def _hlearner_loss(model: HLearnerModel, x, t, y) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        preds, *_ = _hlearner_forward_rows(model, x, t)
        diff = preds - y.reshape(-1)
        return float(np.mean(diff * diff))


def _mse_loss_and_grads(shape: NetShape, params: np.ndarray, inputs: np.ndarray, targets: np.ndarray):
    with np.errstate(over="ignore", invalid="ignore"):
        preds, cache = forward(shape, params, inputs)
        diff = preds - targets
        loss = float(np.mean(diff * diff))
        if not np.isfinite(loss):
            raise ValueError(f"non-finite loss over a batch of {len(inputs)} records")
        grad, _ = backward(shape, params, cache, (2.0 / diff.size) * diff)
    return loss, grad


def _mse_loss(shape: NetShape, params: np.ndarray, inputs: np.ndarray, targets: np.ndarray) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        preds, _ = forward(shape, params, inputs)
        diff = preds - targets
        return float(np.mean(diff * diff))


def _init_seed(*words: int) -> int:
    return int(np.random.SeedSequence([int(w) for w in words]).generate_state(1)[0])


def _split_affine(flat: np.ndarray, n_in: int, n_out: int):
    return flat[: n_in * n_out].reshape(n_in, n_out), flat[n_in * n_out :]


def init_hlearner(p: int, k: int, m: int, cfg: TrainConfig) -> HLearnerModel:
    """Fresh H-Learner with Glorot-initialised psi and phi. The hypernet
    output layer weights are scaled by 0.1 so generated target parameters
    start near zero, which keeps early training stable."""
    d_t = cfg.embedding_size // 2
    d_y = cfg.embedding_size - d_t
    target_shape = NetShape((p, *cfg.target_hidden, 1))
    hypernet_shape = NetShape((d_t + d_y, *cfg.hypernet_hidden, param_count(target_shape)))
    w_t, b_t = _split_affine(
        init_params(NetShape((k, d_t)), _init_seed(cfg.seed, 2, 0, 0)), k, d_t
    )
    w_y, b_y = _split_affine(
        init_params(NetShape((m, d_y)), _init_seed(cfg.seed, 2, 0, 1)), m, d_y
    )
    phi = init_params(hypernet_shape, _init_seed(cfg.seed, 2, 0, 2))
    out_ws = layer_slices(hypernet_shape)[-1][0]
    phi[out_ws] *= 0.1
    return HLearnerModel(
        embedder=EmbedderParams(w_t=w_t, b_t=b_t, w_y=w_y, b_y=b_y),
        hypernet_shape=hypernet_shape,
        hypernet_params=phi,
        target_shape=target_shape,
    )


def init_baseline(kind: str, p: int, k: int, m: int, cfg: TrainConfig) -> BaselineModel:
    if kind == SLEARNER:
        shape = NetShape((p + k, *cfg.hypernet_hidden, m))
        nets = [init_params(shape, _init_seed(cfg.seed, 2, 0, 0))]
    elif kind == XSLEARNER:
        shape = NetShape((p + k, *cfg.hypernet_hidden, 1))
        nets = [init_params(shape, _init_seed(cfg.seed, 2, j, 0)) for j in range(m)]
    else:
        raise ValueError(f"unknown baseline kind: {kind!r}")
    return BaselineModel(kind=kind, shape=shape, nets=nets, m=m)


def trainable_vector(model: HLearnerModel) -> np.ndarray:
    return np.concatenate([model.embedder.to_flat(), model.hypernet_params])


def with_trainable(model: HLearnerModel, vec: np.ndarray) -> HLearnerModel:
    """Rebuild the model from a flat (psi, phi) vector; shapes unchanged."""
    e = model.embedder
    n_psi = e.n_params
    if vec.size != n_psi + model.hypernet_params.size:
        raise ValueError("trainable vector has the wrong length")
    return replace(
        model,
        embedder=EmbedderParams.from_flat(vec[:n_psi], e.k, e.m, e.d_t, e.d_y),
        hypernet_params=vec[n_psi:],
    )


def _split_indices(n: int, cfg: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    if n < 2:
        raise ValueError("need at least 2 records for a train/validation split")
    perm = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0])).permutation(n)
    n_val = min(max(int(round(cfg.validation_fraction * n)), 1), n - 1)
    return perm[n_val:], perm[:n_val]


def _fit(vec0, batch_loss_grad, full_loss, train_idx, val_idx, cfg: TrainConfig, net_idx: int):
    """Minibatch Adam with keep-best-validation early stopping.

    Epoch 0 in the log is the initial state before any update. Training
    stops after `patience` consecutive epochs without a validation
    improvement, or at max_epochs. Returns the best-validation parameters
    and the per-epoch log.
    """
    vec = np.array(vec0, dtype=np.float64)
    adam = AdamState.init(vec.size)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1, net_idx]))
    epochs = [
        {
            "epoch": 0,
            "train_loss": full_loss(vec, train_idx),
            "val_loss": full_loss(vec, val_idx),
        }
    ]
    best_vec, best_val, best_epoch = vec.copy(), epochs[0]["val_loss"], 0
    bad, stopped = 0, 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = train_idx[shuffle_rng.permutation(len(train_idx))]
        for b, start in enumerate(range(0, len(order), cfg.batch_size)):
            rows = order[start : start + cfg.batch_size]
            try:
                loss, grad = batch_loss_grad(vec, rows)
                adam, vec = adam_step(adam, vec, grad, cfg.learning_rate)
            except ValueError as err:
                raise TrainingDiverged(
                    f"training diverged at epoch {epoch}, batch {b}: {err}"
                ) from err
        train_loss = full_loss(vec, train_idx)
        val_loss = full_loss(vec, val_idx)
        epochs.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        stopped = epoch
        if val_loss < best_val:
            best_vec, best_val, best_epoch = vec.copy(), val_loss, epoch
            bad = 0
        else:
            bad += 1
            if bad >= cfg.patience:
                break
    log = {
        "net": net_idx,
        "epochs": epochs,
        "best_epoch": best_epoch,
        "stopped_epoch": stopped,
    }
    return best_vec, log


def train(kind: str, dataset, cfg: TrainConfig):
    """Train a learner of `kind` on the dataset; returns (model, log).

    Deterministic given (dataset, cfg): the split, shuffles, and parameter
    initialisation all derive from cfg.seed, so two identical calls produce
    bitwise-identical models and logs.
    """
    kind = kind.lower()
    x, t, y = dataset.x, dataset.t, dataset.y
    train_idx, val_idx = _split_indices(len(x), cfg)
    log = {
        "kind": kind,
        "n_train": int(len(train_idx)),
        "n_val": int(len(val_idx)),
        "notes": [],
        "nets": [],
    }

    if kind == HLEARNER:
        model0 = init_hlearner(dataset.p, dataset.k, dataset.m, cfg)
        log["notes"].append("hypernet output layer weights scaled by 0.1 after init")

        def batch_loss_grad(vec, rows):
            m = with_trainable(model0, vec)
            loss, g_psi, g_phi = hlearner_loss_and_grads(m, (x[rows], t[rows], y[rows]))
            return loss, np.concatenate([g_psi, g_phi])

        def full_loss(vec, rows):
            return _hlearner_loss(with_trainable(model0, vec), x[rows], t[rows], y[rows])

        best, netlog = _fit(
            trainable_vector(model0), batch_loss_grad, full_loss, train_idx, val_idx, cfg, 0
        )
        log["nets"].append(netlog)
        return with_trainable(model0, best), log

    if kind == SLEARNER:
        model0 = init_baseline(SLEARNER, dataset.p, dataset.k, dataset.m, cfg)
        xt = np.hstack([x, t])

        def batch_loss_grad(vec, rows):
            return _mse_loss_and_grads(model0.shape, vec, xt[rows], y[rows])

        def full_loss(vec, rows):
            return _mse_loss(model0.shape, vec, xt[rows], y[rows])

        best, netlog = _fit(
            model0.nets[0], batch_loss_grad, full_loss, train_idx, val_idx, cfg, 0
        )
        log["nets"].append(netlog)
        return BaselineModel(SLEARNER, model0.shape, [best], dataset.m), log

    if kind == XSLEARNER:
        model0 = init_baseline(XSLEARNER, dataset.p, dataset.k, dataset.m, cfg)
        xt = np.hstack([x, t])
        nets = []
        for j in range(dataset.m):
            yj = y[:, j : j + 1]

            def batch_loss_grad(vec, rows, yj=yj):
                return _mse_loss_and_grads(model0.shape, vec, xt[rows], yj[rows])

            def full_loss(vec, rows, yj=yj):
                return _mse_loss(model0.shape, vec, xt[rows], yj[rows])

            best, netlog = _fit(
                model0.nets[j], batch_loss_grad, full_loss, train_idx, val_idx, cfg, j
            )
            nets.append(best)
            log["nets"].append(netlog)
        return BaselineModel(XSLEARNER, model0.shape, nets, dataset.m), log

    raise ValueError(f"unknown learner kind: {kind!r}")


def predict_all(model, x: np.ndarray, t: np.ndarray) -> np.ndarray:
    """All M potential-outcome predictions for one (x, t)."""
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if isinstance(model, HLearnerModel):
        return np.array([predict(model, x, t, m) for m in range(model.m)])
    if model.kind == SLEARNER:
        out, _ = forward(model.shape, model.nets[0], np.concatenate([x, t]))
        return out
    xt = np.concatenate([x, t])
    return np.array([forward(model.shape, net, xt)[0][0] for net in model.nets])


def predict_batch(model, x: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Predictions for many covariate rows under one shared treatment
    vector; returns shape (n, M). Equal to stacking predict_all over rows up
    to floating-point reassociation."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    t = np.asarray(t, dtype=np.float64)
    if isinstance(model, HLearnerModel):
        cols = []
        for m in range(model.m):
            theta = generate_target_params(model, embed(model.embedder, t, m, model.m))
            out, _ = forward(model.target_shape, theta, x)
            cols.append(out[:, 0])
        return np.column_stack(cols)
    xt = np.hstack([x, np.broadcast_to(t, (len(x), len(t)))])
    if model.kind == SLEARNER:
        out, _ = forward(model.shape, model.nets[0], xt)
        return out
    return np.column_stack([forward(model.shape, net, xt)[0][:, 0] for net in model.nets])


def predict_factual(model, x: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Predictions for rows of (x, t) pairs (each record under its own
    treatment); returns shape (n, M)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    t = np.atleast_2d(np.asarray(t, dtype=np.float64))
    if isinstance(model, HLearnerModel):
        preds, *_ = _hlearner_forward_rows(model, x, t)
        return preds.reshape(len(x), model.m)
    xt = np.hstack([x, t])
    if model.kind == SLEARNER:
        out, _ = forward(model.shape, model.nets[0], xt)
        return out
    return np.column_stack([forward(model.shape, net, xt)[0][:, 0] for net in model.nets])


def _shape_to_dict(shape: NetShape) -> dict:
    return {"layer_sizes": list(shape.layer_sizes), "activation": shape.activation.value}


def _shape_from_dict(doc: dict) -> NetShape:
    return NetShape(tuple(doc["layer_sizes"]), Activation(doc["activation"]))


def save_model(model, path, cfg: TrainConfig | None = None) -> None:
    """JSON document with kind, shapes, and all parameter vectors in the
    canonical layout; reloading reproduces predictions bit-exactly."""
    if isinstance(model, HLearnerModel):
        doc = {
            "kind": HLEARNER,
            "embedder": {
                "w_t": model.embedder.w_t.tolist(),
                "b_t": model.embedder.b_t.tolist(),
                "w_y": model.embedder.w_y.tolist(),
                "b_y": model.embedder.b_y.tolist(),
            },
            "hypernet_shape": _shape_to_dict(model.hypernet_shape),
            "hypernet_params": model.hypernet_params.tolist(),
            "target_shape": _shape_to_dict(model.target_shape),
        }
    else:
        doc = {
            "kind": model.kind,
            "shape": _shape_to_dict(model.shape),
            "nets": [net.tolist() for net in model.nets],
            "m": model.m,
        }
    doc["train_config"] = cfg.to_dict() if cfg is not None else None
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path):
    """Inverse of save_model; returns (model, train_config_or_None)."""
    with open(path) as fh:
        doc = json.load(fh)
    cfg_doc = doc.get("train_config")
    cfg = TrainConfig.from_dict(cfg_doc) if cfg_doc else None
    if doc["kind"] == HLEARNER:
        emb = doc["embedder"]
        model = HLearnerModel(
            embedder=EmbedderParams(
                w_t=np.array(emb["w_t"], dtype=np.float64),
                b_t=np.array(emb["b_t"], dtype=np.float64),
                w_y=np.array(emb["w_y"], dtype=np.float64),
                b_y=np.array(emb["b_y"], dtype=np.float64),
            ),
            hypernet_shape=_shape_from_dict(doc["hypernet_shape"]),
            hypernet_params=np.array(doc["hypernet_params"], dtype=np.float64),
            target_shape=_shape_from_dict(doc["target_shape"]),
        )
        return model, cfg
    model = BaselineModel(
        kind=doc["kind"],
        shape=_shape_from_dict(doc["shape"]),
        nets=[np.array(net, dtype=np.float64) for net in doc["nets"]],
        m=int(doc["m"]),
    )
    return model, cfg
