"""Graph convolutional classifier in plain numpy, with hand-written backprop.

Per graph:
    E_0 = X (standardized)
    E_l = relu(Â E_{l-1} W_l + b_l),        Â = D^-1/2 (A_w + I) D^-1/2
    Z   = relu([E_L, X] W_f + b_f)          node embeddings combined with raw features
    g   = mean over nodes of Z
    h   = relu(g W_d + b_d)
    out = log_softmax(h W_y + b_y)
Graphs are padded to a common node count and processed as one batch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .encoder import CircuitGraph, Dataset


class GcnError(ValueError):
    pass


class Divergence(GcnError):
    def __init__(self, iteration: int, loss: float):
        super().__init__(f"non-finite loss {loss} at iteration {iteration}")
        self.iteration = iteration


# ---------------------------------------------------------------------------
# batching


@dataclass(frozen=True)
class Batch:
    x: np.ndarray      # (G, N, F) raw features
    a_hat: np.ndarray  # (G, N, N)
    mask: np.ndarray   # (G, N) 1 for real nodes
    y: np.ndarray      # (G,)


def normalized_adjacency(a: np.ndarray, n_real: int | None = None) -> np.ndarray:
    n = a.shape[0]
    n_real = n if n_real is None else n_real
    at = a.copy()
    at[np.arange(n_real), np.arange(n_real)] += 1.0
    deg = at.sum(axis=1)
    inv = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    return inv[:, None] * at * inv[None, :]


def make_batch(graphs: Sequence[CircuitGraph], labels: Sequence[int] | None = None) -> Batch:
    if not graphs:
        raise GcnError("empty batch")
    n = max(g.n_nodes for g in graphs)
    f = graphs[0].n_features
    if any(g.n_features != f for g in graphs):
        raise GcnError("graphs disagree on feature width")
    x = np.zeros((len(graphs), n, f))
    a = np.zeros((len(graphs), n, n))
    mask = np.zeros((len(graphs), n))
    for i, g in enumerate(graphs):
        k = g.n_nodes
        x[i, :k] = g.node_features
        adj = np.zeros((n, n))
        adj[:k, :k] = g.adjacency()
        a[i] = normalized_adjacency(adj, k)
        mask[i, :k] = 1.0
    y = np.array(labels if labels is not None else [g.label for g in graphs], dtype=int)
    return Batch(x, a, mask, y)


# ---------------------------------------------------------------------------
# model


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, b: Batch) -> "Standardizer":
        rows = b.x[b.mask > 0]
        mean = rows.mean(axis=0)
        std = rows.std(axis=0)
        return cls(mean, np.where(std > 1e-12, std, 1.0))

    @classmethod
    def identity(cls, f: int) -> "Standardizer":
        return cls(np.zeros(f), np.ones(f))

    def __call__(self, b: Batch) -> np.ndarray:
        return (b.x - self.mean) / self.std * b.mask[..., None]


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


@dataclass
class GcnModel:
    params: dict[str, np.ndarray]
    n_features: int
    hidden: int
    n_classes: int
    n_layers: int
    scaler: Standardizer
    meta: dict = field(default_factory=dict)

    def n_params(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def copy(self) -> "GcnModel":
        return GcnModel({k: v.copy() for k, v in self.params.items()}, self.n_features, self.hidden,
                        self.n_classes, self.n_layers, Standardizer(self.scaler.mean.copy(), self.scaler.std.copy()),
                        dict(self.meta))

    def param_bytes(self) -> bytes:
        return b"".join(self.params[k].tobytes() for k in sorted(self.params))

    def save(self, path):
        arrays = {f"p_{k}": v for k, v in self.params.items()}
        np.savez(path, **arrays, scaler_mean=self.scaler.mean, scaler_std=self.scaler.std,
                 dims=np.array([self.n_features, self.hidden, self.n_classes, self.n_layers]))

    @classmethod
    def load(cls, path) -> "GcnModel":
        z = np.load(path)
        f, h, c, l = (int(v) for v in z["dims"])
        params = {k[2:]: z[k] for k in z.files if k.startswith("p_")}
        return cls(params, f, h, c, l, Standardizer(z["scaler_mean"], z["scaler_std"]))


def init_model(n_features: int, hidden: int, n_classes: int, n_layers: int = 3, seed: int = 0) -> GcnModel:
    if min(n_features, hidden, n_classes, n_layers) < 1:
        raise GcnError("model dimensions must be positive")
    rng = np.random.default_rng([seed, 0x6C])
    p: dict[str, np.ndarray] = {}
    fan_in = n_features
    for l in range(1, n_layers + 1):
        p[f"W{l}"] = _xavier(rng, fan_in, hidden)
        p[f"b{l}"] = np.zeros(hidden)
        fan_in = hidden
    p["Wf"] = _xavier(rng, hidden + n_features, hidden)
    p["bf"] = np.zeros(hidden)
    p["Wd"] = _xavier(rng, hidden, hidden)
    p["bd"] = np.zeros(hidden)
    p["Wy"] = _xavier(rng, hidden, n_classes)
    p["by"] = np.zeros(n_classes)
    return GcnModel(p, n_features, hidden, n_classes, n_layers, Standardizer.identity(n_features))


def log_softmax(o: np.ndarray) -> np.ndarray:
    m = o.max(axis=-1, keepdims=True)
    z = o - m
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _prepare(m: GcnModel, b: Batch) -> tuple[np.ndarray, np.ndarray]:
    """Standardized features and their first propagation; both fixed during training."""
    xs = m.scaler(b)
    return xs, b.a_hat @ xs


def _forward(m: GcnModel, b: Batch, pre: tuple[np.ndarray, np.ndarray] | None = None):
    p = m.params
    xs, ax = _prepare(m, b) if pre is None else pre
    cache = {"xs": xs, "E": [xs], "Z": [], "M": []}
    e = xs
    for l in range(1, m.n_layers + 1):
        mm = ax if l == 1 else b.a_hat @ e
        z = mm @ p[f"W{l}"] + p[f"b{l}"]
        e = np.maximum(z, 0.0)
        cache["M"].append(mm)
        cache["Z"].append(z)
        cache["E"].append(e)
    # [E_L, X] @ Wf without materializing the concatenation
    zf = e @ p["Wf"][: m.hidden] + xs @ p["Wf"][m.hidden:] + p["bf"]
    ef = np.maximum(zf, 0.0)
    cnt = b.mask.sum(axis=1, keepdims=True)
    g = (ef * b.mask[..., None]).sum(axis=1) / cnt
    hd = g @ p["Wd"] + p["bd"]
    h = np.maximum(hd, 0.0)
    o = h @ p["Wy"] + p["by"]
    cache.update(zf=zf, cnt=cnt, g=g, hd=hd, h=h)
    return log_softmax(o), cache


def forward(m: GcnModel, g: CircuitGraph | Batch) -> np.ndarray:
    """Log-probabilities; a single graph gives a vector, a batch gives (G, classes)."""
    b = g if isinstance(g, Batch) else make_batch([g], [0])
    if b.x.shape[2] != m.n_features:
        raise GcnError(f"feature width {b.x.shape[2]} does not match model ({m.n_features})")
    logp, _ = _forward(m, b)
    return logp if isinstance(g, Batch) else logp[0]


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Sum over graphs and nodes of a^T b."""
    return a.reshape(-1, a.shape[-1]).T @ b.reshape(-1, b.shape[-1])


def _nll(logp: np.ndarray, y: np.ndarray) -> float:
    return float(-logp[np.arange(len(y)), y].mean())


def _l2(params: dict[str, np.ndarray], wd: float) -> float:
    return 0.5 * wd * sum(float((v * v).sum()) for k, v in params.items() if k.startswith("W")) if wd else 0.0


def loss_and_grads(m: GcnModel, b: Batch, pre=None, weight_decay: float = 0.0) -> tuple[float, dict[str, np.ndarray]]:
    p = m.params
    logp, c = _forward(m, b, pre)
    n = len(b.y)
    loss = _nll(logp, b.y) + _l2(p, weight_decay)
    do = np.exp(logp)
    do[np.arange(n), b.y] -= 1.0
    do /= n
    gr: dict[str, np.ndarray] = {}
    gr["Wy"] = c["h"].T @ do
    gr["by"] = do.sum(axis=0)
    dhd = (do @ p["Wy"].T) * (c["hd"] > 0)
    gr["Wd"] = c["g"].T @ dhd
    gr["bd"] = dhd.sum(axis=0)
    dg = dhd @ p["Wd"].T
    dzf = (dg[:, None, :] * (b.mask / c["cnt"])[..., None]) * (c["zf"] > 0)
    gr["Wf"] = np.vstack([_outer(c["E"][-1], dzf), _outer(c["xs"], dzf)])
    gr["bf"] = dzf.sum(axis=(0, 1))
    de = dzf @ p["Wf"][: m.hidden].T
    for l in range(m.n_layers, 0, -1):
        dz = de * (c["Z"][l - 1] > 0)
        gr[f"W{l}"] = _outer(c["M"][l - 1], dz)
        gr[f"b{l}"] = dz.sum(axis=(0, 1))
        if l > 1:
            de = np.swapaxes(b.a_hat, 1, 2) @ (dz @ p[f"W{l}"].T)
    if weight_decay:
        for k in gr:
            if k.startswith("W"):
                gr[k] = gr[k] + weight_decay * p[k]
    return loss, gr


# ---------------------------------------------------------------------------
# optimizer, metrics, training


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 1000
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0  # L2 penalty on weight matrices (not biases), part of the loss
    hidden: int = 64
    n_layers: int = 3
    eval_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1 or self.hidden < 1 or self.eval_every < 1:
            raise GcnError("iterations, hidden and eval_every must be positive")


class Adam:
    def __init__(self, params: dict[str, np.ndarray], cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        c = self.cfg
        self.t += 1
        for k in sorted(params):
            g = grads[k]
            self.m[k] = c.beta1 * self.m[k] + (1 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1 - c.beta2) * g * g
            mh = self.m[k] / (1 - c.beta1 ** self.t)
            vh = self.v[k] / (1 - c.beta2 ** self.t)
            params[k] -= c.lr * mh / (np.sqrt(vh) + c.eps)


@dataclass
class Metrics:
    accuracy: float
    precision: float
    recall: float
    confusion: np.ndarray
    iterations: list[int] = field(default_factory=list)
    loss_curve: list[float] = field(default_factory=list)
    train_acc_curve: list[float] = field(default_factory=list)
    test_acc_curve: list[float] = field(default_factory=list)

    def curve_table(self) -> str:
        lines = ["iteration,loss,train_acc,test_acc"]
        for it, lo, tr, te in zip(self.iterations, self.loss_curve, self.train_acc_curve, self.test_acc_curve):
            lines.append(f"{it},{lo:.6f},{tr:.4f},{te:.4f}")
        return "\n".join(lines) + "\n"


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=int)
    for t, p in zip(y_true, y_pred):
        cm[t, p] += 1
    return cm


def metrics_from_confusion(cm: np.ndarray) -> tuple[float, float, float]:
    """Accuracy plus macro precision/recall over classes seen in truth or prediction."""
    total = cm.sum()
    acc = float(np.trace(cm) / total) if total else 0.0
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    seen = (support > 0) | (predicted > 0)
    diag = np.diag(cm).astype(float)
    prec = np.divide(diag, predicted, out=np.zeros_like(diag), where=predicted > 0)
    rec = np.divide(diag, support, out=np.zeros_like(diag), where=support > 0)
    return acc, float(prec[seen].mean()), float(rec[seen].mean())


def predict(m: GcnModel, b: Batch, pre=None) -> np.ndarray:
    return _forward(m, b, pre)[0].argmax(axis=1)


def metrics_for(y, pred, n_classes) -> Metrics:
    cm = confusion_matrix(y, pred, n_classes)
    return Metrics(*metrics_from_confusion(cm), cm)


def evaluate(m: GcnModel, d: Dataset, idx: Sequence[int] | None = None) -> Metrics:
    idx = d.test_idx if idx is None else idx
    b = make_batch(d.subset(idx), d.labels[idx])
    return metrics_for(b.y, predict(m, b), d.n_classes)


def train(m: GcnModel, d: Dataset, cfg: TrainConfig) -> tuple[GcnModel, Metrics]:
    """Full-batch Adam on the train split; test accuracy tracked every `eval_every` steps."""
    if m.n_features != d.n_features or m.n_classes != d.n_classes:
        raise GcnError("model shape does not match dataset")
    m = m.copy()
    tr = make_batch(d.subset(d.train_idx), d.labels[d.train_idx])
    te = make_batch(d.subset(d.test_idx), d.labels[d.test_idx])
    m.scaler = Standardizer.fit(tr)
    pre_tr, pre_te = _prepare(m, tr), _prepare(m, te)
    opt = Adam(m.params, cfg)
    its, losses, tr_acc, te_acc = [], [], [], []
    for it in range(cfg.iterations + 1):
        loss, grads = loss_and_grads(m, tr, pre_tr, cfg.weight_decay)
        if not math.isfinite(loss):
            raise Divergence(it, loss)
        if it % cfg.eval_every == 0 or it == cfg.iterations:
            its.append(it)
            losses.append(loss)
            tr_acc.append(float((predict(m, tr, pre_tr) == tr.y).mean()))
            te_acc.append(float((predict(m, te, pre_te) == te.y).mean()))
        if it < cfg.iterations:
            opt.step(m.params, grads)
    met = metrics_for(te.y, predict(m, te, pre_te), d.n_classes)
    met.iterations, met.loss_curve, met.train_acc_curve, met.test_acc_curve = its, losses, tr_acc, te_acc
    return m, met


def fit(d: Dataset, cfg: TrainConfig) -> tuple[GcnModel, Metrics]:
    m = init_model(d.n_features, cfg.hidden, d.n_classes, cfg.n_layers, cfg.seed)
    return train(m, d, cfg)


def iterations_to_fraction(its: Sequence[int], curve: Sequence[float], frac: float = 0.9,
                           target: float | None = None) -> int:
    """First logged iteration whose value reaches frac * target (target defaults to the final value)."""
    target = curve[-1] if target is None else target
    for it, v in zip(its, curve):
        if v >= frac * target - 1e-12:
            return int(it)
    return int(its[-1])


def iterations_to_plateau(its: Sequence[int], curve: Sequence[float], tol: float = 1e-12) -> int:
    """First logged iteration after which the curve stays at its final value."""
    k = len(curve) - 1
    while k > 0 and abs(curve[k - 1] - curve[-1]) <= tol:
        k -= 1
    return int(its[k])


# ---------------------------------------------------------------------------
# gradient check


def grad_check(m: GcnModel, b: Batch | CircuitGraph, epsilon: float = 1e-5, n_coords: int = 200,
               seed: int = 0, weight_decay: float = 0.0) -> float:
    """Max relative error between backprop and central differences over sampled coordinates."""
    if not 1e-7 <= epsilon <= 1e-3:
        raise GcnError("epsilon must lie in [1e-7, 1e-3]")
    if isinstance(b, CircuitGraph):
        b = make_batch([b], [max(b.label, 0)])
    _, grads = loss_and_grads(m, b, weight_decay=weight_decay)
    loss = lambda: _nll(_forward(m, b)[0], b.y) + _l2(m.params, weight_decay)
    coords = [(k, i) for k in sorted(m.params) for i in range(m.params[k].size)]
    rng = np.random.default_rng([seed, 0x6C4])
    pick = coords if len(coords) <= n_coords else [coords[i] for i in rng.choice(len(coords), n_coords, replace=False)]
    worst = 0.0
    for k, i in pick:
        flat = m.params[k].reshape(-1)
        old = flat[i]
        flat[i] = old + epsilon
        fp = loss()
        flat[i] = old - epsilon
        fm = loss()
        flat[i] = old
        num = (fp - fm) / (2 * epsilon)
        ana = grads[k].reshape(-1)[i]
        worst = max(worst, abs(ana - num) / max(abs(ana), abs(num), 1e-7))
    return float(worst)


# ---------------------------------------------------------------------------
# flat baselines: the node-feature matrix flattened, graph structure discarded


@dataclass
class FlatModel:
    params: dict[str, np.ndarray]
    kind: str
    mean: np.ndarray
    std: np.ndarray


def _flatten(b: Batch) -> np.ndarray:
    return b.x.reshape(len(b.x), -1)


def _flat_forward(fm: FlatModel, x: np.ndarray):
    xs = (x - fm.mean) / fm.std
    p = fm.params
    if fm.kind == "logreg":
        return log_softmax(xs @ p["W"] + p["b"]), (xs, None, None)
    hd = xs @ p["W1"] + p["b1"]
    h = np.maximum(hd, 0.0)
    return log_softmax(h @ p["W2"] + p["b2"]), (xs, hd, h)


def _flat_grads(fm: FlatModel, x: np.ndarray, y: np.ndarray):
    logp, (xs, hd, h) = _flat_forward(fm, x)
    n = len(y)
    loss = float(-logp[np.arange(n), y].mean())
    do = np.exp(logp)
    do[np.arange(n), y] -= 1.0
    do /= n
    p = fm.params
    if fm.kind == "logreg":
        return loss, {"W": xs.T @ do, "b": do.sum(axis=0)}
    dhd = (do @ p["W2"].T) * (hd > 0)
    return loss, {"W2": h.T @ do, "b2": do.sum(axis=0), "W1": xs.T @ dhd, "b1": dhd.sum(axis=0)}


def flat_baseline(d: Dataset, kind: str = "logreg", cfg: TrainConfig = TrainConfig(),
                  on: str = "test") -> tuple[FlatModel, Metrics]:
    """Train a flat classifier; metrics are reported on `on` ("test" or "train")."""
    if kind not in ("logreg", "mlp"):
        raise GcnError(f"unknown baseline {kind!r}")
    tr = make_batch(d.subset(d.train_idx), d.labels[d.train_idx])
    te = make_batch(d.subset(d.test_idx), d.labels[d.test_idx])
    xtr, xte = _flatten(tr), _flatten(te)
    mean = xtr.mean(axis=0)
    std = xtr.std(axis=0)
    std = np.where(std > 1e-12, std, 1.0)
    rng = np.random.default_rng([cfg.seed, 0xF1A7])
    f = xtr.shape[1]
    if kind == "logreg":
        params = {"W": _xavier(rng, f, d.n_classes), "b": np.zeros(d.n_classes)}
    else:
        params = {"W1": _xavier(rng, f, cfg.hidden), "b1": np.zeros(cfg.hidden),
                  "W2": _xavier(rng, cfg.hidden, d.n_classes), "b2": np.zeros(d.n_classes)}
    fm = FlatModel(params, kind, mean, std)
    opt = Adam(fm.params, cfg)
    its, losses, tr_acc, te_acc = [], [], [], []
    for it in range(cfg.iterations + 1):
        loss, grads = _flat_grads(fm, xtr, tr.y)
        if not math.isfinite(loss):
            raise Divergence(it, loss)
        if it % cfg.eval_every == 0 or it == cfg.iterations:
            its.append(it)
            losses.append(loss)
            tr_acc.append(float((_flat_forward(fm, xtr)[0].argmax(1) == tr.y).mean()))
            te_acc.append(float((_flat_forward(fm, xte)[0].argmax(1) == te.y).mean()))
        if it < cfg.iterations:
            opt.step(fm.params, grads)
    x, y = (xte, te.y) if on == "test" else (xtr, tr.y)
    met = metrics_for(y, _flat_forward(fm, x)[0].argmax(1), d.n_classes)
    met.iterations, met.loss_curve, met.train_acc_curve, met.test_acc_curve = its, losses, tr_acc, te_acc
    return fm, met
