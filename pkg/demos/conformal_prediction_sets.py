"""Walkthrough: calibrated prediction sets over a synthetic action classifier.

Builds a 10-class Gaussian-cluster task, trains the dense classifier on it,
calibrates the set threshold at 90% target coverage, and then shows how the
regularization knobs trade coverage against set size.

Run:  python demos/conformal_prediction_sets.py
"""

import numpy as np

from cammarl import conformal
from cammarl.conformal import (
    ConformalModel,
    LabeledObsBuffer,
    calibrate_tau,
    calibration_scores,
    empirical_coverage,
    predict_for_agent,
    train_classifier,
)

CLASSES, DIM, SPREAD = 10, 10, 2.5
MEANS = SPREAD * np.eye(CLASSES, DIM)


def sample(n, rng):
    labels = rng.integers(0, CLASSES, n)
    return MEANS[labels] + rng.standard_normal((n, DIM)), labels


def main():
    rng = np.random.default_rng(0)

    print("== fit the action classifier ==")
    train_x, train_y = sample(20_000, rng)
    buffer = LabeledObsBuffer(DIM, capacity=30_000, train_fraction=0.9)
    for x, y in zip(train_x, train_y):
        buffer.append(x, int(y))
    buffer.resplit(rng)
    model = ConformalModel(DIM, CLASSES, alpha=0.1, seed=1)
    stats = train_classifier(model, buffer, epochs=8, rng=rng)
    print(f"train accuracy {stats.accuracy:.3f}, loss {stats.mean_loss:.3f}")

    print("\n== calibrate and measure coverage per regularization weight ==")
    cal_x, cal_y = sample(2_000, rng)
    test_x, test_y = sample(10_000, rng)
    probs_cal = model.probabilities(cal_x)
    ranks = conformal.label_ranks(probs_cal, cal_y)
    k_reg = next(k for k in range(1, CLASSES + 1) if (ranks <= k).mean() >= 0.9)
    u_cal = rng.uniform(size=cal_y.size)
    print(f"adaptive rank offset k_reg = {k_reg}")
    print(f"{'lambda':>8} {'tau':>8} {'coverage':>9} {'mean size':>10}")
    for lam in conformal.DEFAULT_LAMBDA_GRID:
        scores = calibration_scores(probs_cal, cal_y, u_cal, lam, k_reg)
        model.tau, model.lam, model.k_reg = calibrate_tau(scores, 0.1), lam, k_reg
        cov = empirical_coverage(model, test_x, test_y, np.random.default_rng(7))
        probs_test = model.probabilities(test_x)
        sizes = conformal._set_sizes(probs_test, np.random.default_rng(8).uniform(size=test_y.size),
                                     model.tau, lam, k_reg)
        print(f"{lam:>8} {model.tau:>8.4f} {cov:>9.4f} {float(sizes.mean()):>10.2f}")

    print("\n== a few individual prediction sets ==")
    for i in range(5):
        pred = predict_for_agent(model, test_x[i], rng)
        marker = "hit " if test_y[i] in pred.actions else "miss"
        print(f"true={test_y[i]} set={pred.actions} ({marker})")


if __name__ == "__main__":
    main()
