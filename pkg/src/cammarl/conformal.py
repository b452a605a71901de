"""Regularized adaptive prediction sets over another agent's actions.

A classifier maps the other agent's observation to action probabilities.
Split calibration turns those probabilities into prediction sets with
marginal coverage 1 - alpha: the generalized score of an action is the
probability mass ranked ahead of it, plus a randomized share of its own
mass, plus a rank penalty lambda * (rank - k_reg)^+.  Actions whose score
stays at or below the calibrated threshold tau enter the set.

Ranking is by descending probability with ties broken by ascending action
id, so scores, ranks, and set ordering all agree deterministically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from cammarl import nn

DEFAULT_LAMBDA_GRID = (0.001, 0.01, 0.1, 0.2, 0.5)
DEFAULT_BUFFER_CAPACITY = 50_000
DEFAULT_TRAIN_FRACTION = 0.8


@dataclass
class ConformalSet:
    """Ranked action ids plus the parameters that produced them."""

    actions: list[int]  # descending classifier probability
    tau: float
    lam: float
    k_reg: int
    u: float

    def __contains__(self, action: int) -> bool:
        return action in self.actions

    def __len__(self) -> int:
        return len(self.actions)


@dataclass
class ClassifierStats:
    accuracy: float
    mean_loss: float


@dataclass
class RegularizationChoice:
    lam: float
    k_reg: int
    tau: float
    mean_set_size_by_lambda: dict[float, float]


@dataclass
class ConformalUpdateStats:
    """One metrics row per conformal update."""

    update_count: int
    mean_set_size: float
    empirical_coverage: float
    classifier_accuracy: float
    classifier_loss: float
    lam: float
    k_reg: int
    tau: float


class LabeledObsBuffer:
    """Sliding window of (observation, true action) pairs with a train/cal split.

    Calibration indices are never used for classifier fitting; the split is
    redrawn with fresh randomness at every conformal update.
    """

    def __init__(self, obs_dim: int, capacity: int = DEFAULT_BUFFER_CAPACITY,
                 train_fraction: float = DEFAULT_TRAIN_FRACTION):
        if not 0.0 < train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0,1), got {train_fraction}")
        self.obs_dim = obs_dim
        self.capacity = capacity
        self.train_fraction = train_fraction
        self._obs: list[np.ndarray] = []
        self._labels: list[int] = []
        self._train_idx: np.ndarray | None = None
        self._cal_idx: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self._labels)

    def append(self, obs: np.ndarray, action: int) -> None:
        self._obs.append(np.asarray(obs, dtype=np.float64))
        self._labels.append(int(action))
        if len(self._labels) > self.capacity:
            del self._obs[0]
            del self._labels[0]
        self._train_idx = None
        self._cal_idx = None

    def resplit(self, rng: np.random.Generator) -> None:
        n = len(self)
        if n == 0:
            raise ValueError("cannot split an empty buffer")
        perm = rng.permutation(n)
        n_train = max(1, int(round(n * self.train_fraction)))
        n_train = min(n_train, n - 1) if n > 1 else 1
        self._train_idx = np.sort(perm[:n_train])
        self._cal_idx = np.sort(perm[n_train:])

    def _require_split(self) -> None:
        if self._train_idx is None:
            raise ValueError("buffer has no active split; call resplit() first")

    def train_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        self._require_split()
        obs = np.stack([self._obs[i] for i in self._train_idx])
        labels = np.asarray([self._labels[i] for i in self._train_idx], dtype=np.intp)
        return obs, labels

    def cal_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        self._require_split()
        if len(self._cal_idx) == 0:
            return np.empty((0, self.obs_dim)), np.empty(0, dtype=np.intp)
        obs = np.stack([self._obs[i] for i in self._cal_idx])
        labels = np.asarray([self._labels[i] for i in self._cal_idx], dtype=np.intp)
        return obs, labels


class ConformalModel:
    """Classifier plus calibrated RAPS parameters for one modeled agent."""

    def __init__(self, obs_dim: int, action_count: int, alpha: float, seed,
                 hidden: int = nn.HIDDEN_SIZE):
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must be in (0,1), got {alpha}")
        self.obs_dim = obs_dim
        self.action_count = action_count
        self.alpha = alpha
        self.classifier = nn.mlp_init((obs_dim, hidden, hidden, action_count), "relu", seed)
        self.tau: float | None = None
        self.lam: float = 0.0
        self.k_reg: int = 1
        self.update_count: int = 0

    @property
    def calibrated(self) -> bool:
        return self.tau is not None

    def probabilities(self, obs: np.ndarray) -> np.ndarray:
        logits, _ = nn.forward(self.classifier, obs)
        return nn.softmax(logits)


def _validate_probs(probs: np.ndarray) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("probs must be a 1-D probability vector")
    if (p < 0.0).any() or abs(p.sum() - 1.0) > 1e-6:
        raise ValueError(f"invalid probability vector (sum {p.sum()!r})")
    return p


def _rank_order(probs: np.ndarray) -> np.ndarray:
    """Action ids by descending probability, ties broken by ascending id."""
    ids = np.arange(probs.shape[-1])
    return np.lexsort((ids, -probs))


def _all_scores(probs: np.ndarray, u: float, lam: float, k_reg: int) -> np.ndarray:
    """Generalized score of every action for one probability vector."""
    order = _rank_order(probs)
    sorted_p = probs[order]
    ahead = np.concatenate(([0.0], np.cumsum(sorted_p)[:-1]))
    ranks = np.arange(1, probs.size + 1)
    penalties = lam * np.maximum(ranks - k_reg, 0)
    scores = np.empty_like(probs)
    scores[order] = ahead + sorted_p * u + penalties
    return scores


def generalized_score(probs, label: int, u: float, lam: float, k_reg: int) -> float:
    """Score of the true label: ranked-ahead mass + u-share + rank penalty."""
    p = _validate_probs(probs)
    label = int(label)
    if not 0 <= label < p.size:
        raise ValueError(f"label {label} out of range for {p.size} actions")
    return float(_all_scores(p, u, lam, k_reg)[label])


def batch_label_scores(probs: np.ndarray, labels: np.ndarray, u: np.ndarray,
                       lam: float, k_reg: int) -> np.ndarray:
    """generalized_score for every row of an (n, k) probability matrix."""
    p = np.asarray(probs, dtype=np.float64)
    n, k = p.shape
    ids = np.broadcast_to(np.arange(k), (n, k))
    order = np.lexsort((ids, -p), axis=1)
    sorted_p = np.take_along_axis(p, order, axis=1)
    ahead = np.concatenate((np.zeros((n, 1)), np.cumsum(sorted_p, axis=1)[:, :-1]), axis=1)
    ranks = np.arange(1, k + 1)
    penalties = lam * np.maximum(ranks - k_reg, 0)
    scores_sorted = ahead + sorted_p * np.asarray(u)[:, None] + penalties
    scores = np.empty_like(scores_sorted)
    np.put_along_axis(scores, order, scores_sorted, axis=1)
    return scores[np.arange(n), np.asarray(labels, dtype=np.intp)]


def label_ranks(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """1-based rank of each row's label under the deterministic ordering."""
    p = np.asarray(probs, dtype=np.float64)
    n, k = p.shape
    order = np.lexsort((np.broadcast_to(np.arange(k), (n, k)), -p), axis=1)
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.broadcast_to(np.arange(1, k + 1), (n, k)), axis=1)
    return ranks[np.arange(n), np.asarray(labels, dtype=np.intp)]


def calibration_scores(probs: np.ndarray, labels: np.ndarray, u: np.ndarray,
                       lam: float, k_reg: int) -> np.ndarray:
    """Scores used to calibrate tau: the exact inverse-quantile convention.

    Because the most probable action is force-included in every predicted
    set, a rank-1 true label belongs to the set at any threshold; its
    calibration score is therefore -inf rather than the randomized formula
    value.  This keeps the randomized coverage exact at 1 - alpha instead
    of inflating it by the forced-inclusion mass.
    """
    scores = batch_label_scores(probs, labels, u, lam, k_reg)
    return np.where(label_ranks(probs, labels) == 1, -math.inf, scores)


def calibrate_tau(cal_scores, alpha: float) -> float:
    """Conformal quantile: the ceil((n+1)(1-alpha))-th smallest score.

    The index is computed in exact rational arithmetic so decimal alphas
    land on the intended order statistic; an index past n means every
    action set must be all-inclusive (tau = +inf).
    """
    scores = np.sort(np.asarray(cal_scores, dtype=np.float64))
    n = scores.size
    if n == 0:
        raise ValueError("empty calibration set")
    idx = math.ceil(Fraction(n + 1) * (1 - Fraction(str(float(alpha)))))
    if idx > n:
        return math.inf
    return float(scores[idx - 1])


def predict_set(probs, tau: float, lam: float, k_reg: int, u: float) -> ConformalSet:
    """All actions whose generalized score is <= tau, top-1 forced if empty."""
    p = _validate_probs(probs)
    scores = _all_scores(p, u, lam, k_reg)
    order = _rank_order(p)
    members = [int(a) for a in order if scores[a] <= tau]
    if not members:
        members = [int(order[0])]
    return ConformalSet(actions=members, tau=float(tau), lam=float(lam),
                        k_reg=int(k_reg), u=float(u))


def train_classifier(model: ConformalModel, buffer: LabeledObsBuffer, epochs: int,
                     rng: np.random.Generator, minibatch: int = 256,
                     lr: float = 1e-3) -> ClassifierStats:
    """Fit the classifier on the train split only; stats from the train split."""
    if len(buffer) == 0:
        raise ValueError("empty buffer")
    obs, labels = buffer.train_arrays()
    n = obs.shape[0]
    for _ in range(epochs):
        perm = rng.permutation(n)
        for start in range(0, n, minibatch):
            idx = perm[start : start + minibatch]
            logits, cache = nn.forward(model.classifier, obs[idx])
            _, logit_grad = nn.softmax_cross_entropy(logits, labels[idx])
            grads = nn.backward(model.classifier, cache, logit_grad)
            nn.adam_step(model.classifier, grads, lr)
    logits, _ = nn.forward(model.classifier, obs)
    loss, _ = nn.softmax_cross_entropy(logits, labels)
    accuracy = float((logits.argmax(axis=1) == labels).mean())
    model.update_count += 1
    return ClassifierStats(accuracy=accuracy, mean_loss=loss)


def select_regularization(model: ConformalModel, buffer: LabeledObsBuffer, alpha: float,
                          lambda_grid, rng: np.random.Generator) -> RegularizationChoice:
    """Pick (lambda, k_reg) for small sets, then calibrate tau on the full split.

    k_reg is the smallest rank k whose calibration mass of true labels with
    rank <= k reaches 1 - alpha.  Each lambda candidate is calibrated on one
    half of the calibration split and judged by mean set size on the other
    half; the winner is recalibrated on the whole split.
    """
    cal_obs, cal_labels = buffer.cal_arrays()
    n = cal_obs.shape[0]
    if n < 2:
        raise ValueError(f"calibration split must hold at least 2 records, got {n}")
    lambda_grid = list(lambda_grid)
    if not lambda_grid:
        raise ValueError("empty lambda grid")

    probs = model.probabilities(cal_obs)
    k = probs.shape[1]
    ranks = label_ranks(probs, cal_labels)
    coverage_by_rank = np.array([(ranks <= r).mean() for r in range(1, k + 1)])
    k_reg = int(np.argmax(coverage_by_rank >= 1.0 - alpha) + 1)

    perm = rng.permutation(n)
    half = n // 2
    fit_idx, judge_idx = perm[:half], perm[half:]
    u_fit = rng.uniform(0.0, 1.0, size=fit_idx.size)
    u_judge = rng.uniform(0.0, 1.0, size=judge_idx.size)
    sizes: dict[float, float] = {}
    for lam in lambda_grid:
        scores = calibration_scores(probs[fit_idx], cal_labels[fit_idx], u_fit, lam, k_reg)
        tau_lam = calibrate_tau(scores, alpha)
        sizes[lam] = _mean_set_size(probs[judge_idx], u_judge, tau_lam, lam, k_reg)
    best = lambda_grid[int(np.argmin([sizes[lam] for lam in lambda_grid]))]

    u_full = rng.uniform(0.0, 1.0, size=n)
    full_scores = calibration_scores(probs, cal_labels, u_full, best, k_reg)
    tau = calibrate_tau(full_scores, alpha)
    model.lam = float(best)
    model.k_reg = k_reg
    model.tau = float(tau)
    return RegularizationChoice(lam=float(best), k_reg=k_reg, tau=float(tau),
                                mean_set_size_by_lambda=sizes)


def _set_sizes(probs: np.ndarray, u: np.ndarray, tau: float, lam: float, k_reg: int) -> np.ndarray:
    """Vectorized sizes of predict_set over an (n, k) probability matrix."""
    p = np.asarray(probs, dtype=np.float64)
    n, k = p.shape
    ids = np.broadcast_to(np.arange(k), (n, k))
    order = np.lexsort((ids, -p), axis=1)
    sorted_p = np.take_along_axis(p, order, axis=1)
    ahead = np.concatenate((np.zeros((n, 1)), np.cumsum(sorted_p, axis=1)[:, :-1]), axis=1)
    penalties = lam * np.maximum(np.arange(1, k + 1) - k_reg, 0)
    scores_sorted = ahead + sorted_p * np.asarray(u)[:, None] + penalties
    return np.maximum((scores_sorted <= tau).sum(axis=1), 1)


def _mean_set_size(probs, u, tau, lam, k_reg) -> float:
    return float(_set_sizes(probs, u, tau, lam, k_reg).mean())


def predict_for_agent(model: ConformalModel, obs: np.ndarray,
                      rng: np.random.Generator) -> ConformalSet:
    """Prediction set for one observation; full action set before calibration."""
    probs = model.probabilities(obs)
    u = float(rng.uniform(0.0, 1.0))
    if not model.calibrated:
        order = _rank_order(probs)
        return ConformalSet(actions=[int(a) for a in order], tau=math.inf,
                            lam=model.lam, k_reg=model.k_reg, u=u)
    return predict_set(probs, model.tau, model.lam, model.k_reg, u)


def empirical_coverage(model: ConformalModel, observations: np.ndarray,
                       labels: np.ndarray, rng: np.random.Generator) -> float:
    """Fraction of pairs whose true action lands in the predicted set.

    The pairs must be disjoint from the calibration split.  Matches
    predict_for_agent exactly, including the forced top-1 member.
    """
    obs = np.asarray(observations, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    if obs.shape[0] == 0:
        raise ValueError("empty input")
    probs = model.probabilities(obs)
    u = rng.uniform(0.0, 1.0, size=obs.shape[0])
    tau = model.tau if model.calibrated else math.inf
    label_scores = batch_label_scores(probs, labels, u, model.lam, model.k_reg)
    hit = label_scores <= tau
    # Forced top-1: when no score clears tau, the most probable action is kept.
    k = probs.shape[1]
    top = np.lexsort((np.broadcast_to(np.arange(k), probs.shape), -probs), axis=1)[:, 0]
    top_scores = batch_label_scores(probs, top, u, model.lam, model.k_reg)
    forced = (top == labels) & (top_scores > tau)
    return float((hit | forced).mean())


def penultimate_embedding(model: ConformalModel, obs: np.ndarray) -> np.ndarray:
    """Activations of the classifier's last hidden layer (fixed width)."""
    _, cache = nn.forward(model.classifier, obs)
    return cache.inputs[-1][0].copy()


def update_model(model: ConformalModel, buffer: LabeledObsBuffer, rng: np.random.Generator,
                 *, epochs: int = 3, minibatch: int = 256, lr: float = 1e-3,
                 lambda_grid=DEFAULT_LAMBDA_GRID, eval_sample: int = 2048) -> ConformalUpdateStats:
    """One full conformal update: re-split, fit, select regularization, calibrate.

    Set-size and coverage metrics come from a bounded subsample of the train
    split, which stays disjoint from the calibration records.
    """
    buffer.resplit(rng)
    cls_stats = train_classifier(model, buffer, epochs, rng, minibatch=minibatch, lr=lr)
    choice = select_regularization(model, buffer, model.alpha, lambda_grid, rng)
    obs, labels = buffer.train_arrays()
    if obs.shape[0] > eval_sample:
        idx = rng.choice(obs.shape[0], size=eval_sample, replace=False)
        obs, labels = obs[idx], labels[idx]
    probs = model.probabilities(obs)
    u = rng.uniform(0.0, 1.0, size=obs.shape[0])
    mean_size = _mean_set_size(probs, u, model.tau, model.lam, model.k_reg)
    coverage = empirical_coverage(model, obs, labels, rng)
    return ConformalUpdateStats(
        update_count=model.update_count,
        mean_set_size=mean_size,
        empirical_coverage=coverage,
        classifier_accuracy=cls_stats.accuracy,
        classifier_loss=cls_stats.mean_loss,
        lam=choice.lam,
        k_reg=choice.k_reg,
        tau=choice.tau,
    )
