"""Negative sampling, Adam with per-epoch decay, and the training loop."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .corpus import IntervalGraphs, build_item_item
from .evaluator import DEFAULT_TOPN, MetricsReport, build_ranking_task, evaluate_scores
from .fusion import LossConfig
from .model import ModelConfig, ModelInputs, Recommender
from .tensor import Tensor

log = logging.getLogger(__name__)

BATCH_SIZES = (128, 256, 512)


class DivergenceError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 128
    lr: float = 1e-3
    lr_decay: float = 0.96
    seed: int = 0
    eval_every: int = 0  # 0 disables validation / early stopping
    patience: int = 10
    topn: tuple = DEFAULT_TOPN

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size not in BATCH_SIZES:
            raise ValueError(f"batch_size must be one of {BATCH_SIZES}, got {self.batch_size}")
        if self.lr < 0 or not 0 < self.lr_decay <= 1:
            raise ValueError("lr must be >= 0 and lr_decay in (0, 1]")

    def lr_at(self, epoch: int) -> float:
        return self.lr * self.lr_decay ** epoch


class Adam:
    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.steps: dict[str, int] = {}

    def step(self, params: dict[str, Tensor], lr: float) -> None:
        """Update every parameter that received a non-zero gradient; others are untouched."""
        for name, p in params.items():
            g = p.grad
            if g is None or not np.any(g):
                continue
            m = self.m.get(name, np.zeros_like(p.data))
            v = self.v.get(name, np.zeros_like(p.data))
            k = self.steps.get(name, 0) + 1
            m = self.beta1 * m + (1 - self.beta1) * g
            v = self.beta2 * v + (1 - self.beta2) * g * g
            m_hat = m / (1 - self.beta1 ** k)
            v_hat = v / (1 - self.beta2 ** k)
            p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + self.eps)
            self.m[name], self.v[name], self.steps[name] = m, v, k


@dataclass
class TrainingData:
    inputs: IntervalGraphs
    target: dict[int, list[tuple[int, int]]]  # user -> time-ordered (item, ts) in the held-out interval

    @property
    def train_items(self) -> dict[int, set[int]]:
        out: dict[int, set[int]] = {}
        for seqs in self.inputs.sequences:
            for u, seq in seqs.items():
                out.setdefault(u, set()).update(i for i, _ in seq)
        return out


def split_target(graphs: IntervalGraphs) -> TrainingData:
    """Hold out the last interval as the prediction target; the rest are inputs."""
    if graphs.T < 2:
        raise ValueError("need at least two intervals: one input and the held-out target")
    return TrainingData(graphs.head(graphs.T - 1),
                        {u: list(seq) for u, seq in graphs.sequences[-1].items()})


def leakage_violations(data: TrainingData, model_inputs: ModelInputs | None = None) -> list[str]:
    """Every way a target-interval interaction could have reached the model inputs.

    Sequences are checked by hash-set disjointness of ``(user, item, timestamp)``
    events. Co-occurrence graphs must equal the ones rebuilt from the input
    sequences alone, and each user-item entry must be either backed by an input
    event or reachable within two co-occurrence hops of the user's own input
    items (the only way refinement creates entries).
    """
    target_events = {(u, i, ts) for u, seq in data.target.items() for i, ts in seq}
    problems = []
    for t, seqs in enumerate(data.inputs.sequences):
        events = {(u, i, ts) for u, seq in seqs.items() for i, ts in seq}
        for ev in sorted(events & target_events):
            problems.append(f"target event {ev} in input sequence of interval {t}")
    rebuilt = build_item_item(IntervalGraphs(data.inputs.T, data.inputs.num_users, data.inputs.num_items,
                                             data.inputs.t_a, data.inputs.t_b, data.inputs.sequences))
    for t in range(data.inputs.T):
        if set(data.inputs.item_item[t].entries()) != set(rebuilt.item_item[t].entries()):
            problems.append(f"co-occurrence graph {t} differs from the one built from input events")
        nbrs: dict[int, set[int]] = {}
        for a, b, _ in rebuilt.item_item[t].entries():
            nbrs.setdefault(a, set()).add(b)
            nbrs.setdefault(b, set()).add(a)
        own = {u: {i for i, _ in seq} for u, seq in data.inputs.sequences[t].items()}
        prev = {u: {i for i, _ in seq} for u, seq in data.inputs.sequences[t - 1].items()} if t else {}
        for u, i, _ in data.inputs.user_item[t].entries():
            if i in own.get(u, ()):
                continue
            sources = own.get(u) or prev.get(u, set())
            reach = set(sources)
            for s in sources:
                for x in nbrs.get(s, ()):
                    reach.add(x)
                    reach |= nbrs.get(x, set())
            if i not in reach:
                problems.append(f"A_{t}[{u},{i}] is not derivable from input interactions")
    if model_inputs is not None:
        allowed: dict[int, set[int]] = {}
        for seqs in data.inputs.sequences:
            for u, seq in seqs.items():
                allowed.setdefault(u, set()).update(i for i, _ in seq)
        for u, row in enumerate(model_inputs.instant_seq):
            for i in row[row >= 0]:
                if int(i) not in allowed.get(u, ()):
                    problems.append(f"instant sequence of user {u} holds item {int(i)} not in its inputs")
    return problems


def sample_batch(users, target: dict[int, list[tuple[int, int]]], num_items: int, n_pr: int,
                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``n_pr`` (user, positive, negative) triples per user, negatives rejection-sampled."""
    us, ps, ns = [], [], []
    for u in users:
        positives = sorted({i for i, _ in target[u]})
        if len(positives) >= num_items:
            raise ValueError(f"user {u} interacted with every item; no negative to sample")
        pos_set = set(positives)
        for _ in range(n_pr):
            p = positives[int(rng.integers(len(positives)))]
            n = int(rng.integers(num_items))
            while n in pos_set:
                n = int(rng.integers(num_items))
            us.append(u)
            ps.append(p)
            ns.append(n)
    return np.array(us, dtype=np.int64), np.array(ps, dtype=np.int64), np.array(ns, dtype=np.int64)


@dataclass
class TrainState:
    model: Recommender
    optimizer: Adam
    epoch: int = 0
    rng: np.random.Generator | None = None
    best_metric: float = -math.inf
    best_epoch: int = -1
    best_params: dict[str, np.ndarray] | None = None
    history: list[dict] = field(default_factory=list)


def evaluate_model(model: Recommender, inputs: ModelInputs, data: TrainingData, topn=DEFAULT_TOPN,
                   sampled_negatives: int | None = None, seed: int = 0) -> MetricsReport:
    scores = model.scores(model.forward(inputs, training=False))["final"]
    task = build_ranking_task(data.train_items, data.target, model.num_items, sampled_negatives, seed)
    return evaluate_scores(scores, task, topn)


def train(data: TrainingData, model_cfg: ModelConfig, loss_cfg: LossConfig, cfg: TrainConfig,
          on_epoch=None) -> TrainState:
    """Fit a fresh model on ``data``; returns the state with a per-epoch log in ``history``."""
    inputs = ModelInputs.from_graphs(data.inputs, model_cfg.temporal.max_seq)
    model = Recommender(data.inputs.num_users, data.inputs.num_items, data.inputs.T, model_cfg, cfg.seed)
    state = TrainState(model, Adam(), rng=np.random.default_rng(cfg.seed))
    users = np.array(sorted(u for u, seq in data.target.items() if seq), dtype=np.int64)
    if users.size == 0:
        raise ValueError("no user has an interaction in the target interval")
    stale = 0
    for epoch in range(cfg.epochs):
        start = time.perf_counter()
        lr = cfg.lr_at(epoch)
        order = state.rng.permutation(users)
        totals = {"loss": 0.0, "l_gru": 0.0, "l_mean": 0.0}
        w_sum, w_n = 0.0, 0
        for lo in range(0, len(order), cfg.batch_size):
            batch = order[lo:lo + cfg.batch_size]
            u, p, n = sample_batch(batch, data.target, model.num_items, loss_cfg.n_pr, state.rng)
            model.zero_grad()
            fwd = model.forward(inputs, training=True, rng=state.rng)
            loss, l_gru, l_mean, w_b = model.loss(fwd, u, p, n, loss_cfg)
            value = loss.item()
            if not math.isfinite(value):
                raise DivergenceError(f"loss became {value} at epoch {epoch}")
            loss.backward()
            state.optimizer.step(model.params, lr)
            totals["loss"] += value
            totals["l_gru"] += l_gru.item()
            totals["l_mean"] += l_mean.item()
            w_sum += float(w_b.data.sum())
            w_n += w_b.data.size
        state.epoch = epoch + 1
        entry = {"epoch": epoch, "lr": lr, **totals, "mean_w": w_sum / max(w_n, 1),
                 "wall_time": time.perf_counter() - start}
        if cfg.eval_every and (epoch + 1) % cfg.eval_every == 0:
            report = evaluate_model(model, inputs, data, cfg.topn)
            metric = report.hr.get(10, next(iter(report.hr.values())))
            entry["metrics"] = report.to_dict()
            if metric > state.best_metric:
                state.best_metric, state.best_epoch, stale = metric, epoch, 0
                state.best_params = {k: v.data.copy() for k, v in model.params.items()}
            else:
                stale += 1
        state.history.append(entry)
        log.info("epoch %d loss %.6f lr %.3g", epoch, totals["loss"], lr)
        if on_epoch is not None:
            on_epoch(entry)
        if cfg.eval_every and stale >= cfg.patience:
            log.info("early stop at epoch %d (best %d)", epoch, state.best_epoch)
            break
    if state.best_params is not None:
        for k, v in state.best_params.items():
            model.params[k].data = v.copy()
    return state
