"""Compare the three gradient-step rules on the same training run.

Every trainer routes its updates through one framework: accumulate a
first momentum from the gradient stream, optionally a second momentum of
squared gradients, and step by alpha * m / (sqrt(V) + eps). The sgd rule
bypasses both accumulators, momentum keeps the first, and adaptive keeps
both. The framework is also usable on its own, shown here by minimizing
a quadratic bowl by hand.
"""

import numpy as np

from latentrec import RatingDataset, TrainConfig, funk_train
from latentrec.optim import make_state, step


def make_ratings(m=30, n=20, seed=8):
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.8, 1.2, size=(m, 2))
    q = rng.uniform(0.7, 1.8, size=(n, 2))
    full = p @ q.T
    triples = [
        (f"u{u:02d}", f"i{i:02d}", float(full[u, i]))
        for u in range(m)
        for i in range(n)
        if rng.random() < 0.6
    ]
    return RatingDataset(triples, scale=(float(full.min()), float(full.max())))


def main():
    # --- the framework by itself: minimize f(x) = |x - target|^2
    target = np.array([3.0, -1.0])
    print("minimizing a quadratic with each rule (30 steps, alpha=0.1):")
    for kind in ("sgd", "momentum", "adaptive"):
        x = np.zeros(2)
        state = make_state(kind, x.shape, alpha=0.1, name="x")
        for _ in range(30):
            step(state, x, 2.0 * (x - target))
        print(f"  {kind:9s} reached {x.round(3).tolist()}")

    # --- the same switch inside a trainer
    ds = make_ratings()
    print("\nfactor training with each rule (40 epochs, alpha=0.01):")
    for kind in ("sgd", "momentum", "adaptive"):
        cfg = TrainConfig(f=2, alpha=0.01, lam=0.02, epochs=40, seed=42,
                          optimizer=kind)
        model = funk_train(ds, cfg)
        print(f"  {kind:9s} epoch 1 rmse {model.trace[0]:.4f}  "
              f"epoch 40 rmse {model.trace[-1]:.4f}")

    # the adaptive rule normalizes per-entry step sizes, which helps when
    # gradient scales differ wildly; on this well-scaled problem plain sgd
    # is already competitive
    print("\nsame trainer, skewed learning rate (alpha=0.2):")
    for kind in ("sgd", "adaptive"):
        cfg = TrainConfig(f=2, alpha=0.2, lam=0.02, epochs=40, seed=42,
                          optimizer=kind)
        try:
            model = funk_train(ds, cfg)
            print(f"  {kind:9s} final rmse {model.trace[-1]:.4f}")
        except Exception as exc:
            print(f"  {kind:9s} diverged: {exc}")


if __name__ == "__main__":
    main()
