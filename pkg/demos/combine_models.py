"""Four ways to combine trained predictors.

Any object with predict(u, i) and recommend(u, k) can be a member, so
the combinators compose freely: fixed-weight blending, rank voting,
bagging over bootstrap resamples, and least-squares stacking fit on a
held-out slice.
"""

import numpy as np

from latentrec import (
    BlendModel,
    RatingDataset,
    TrainConfig,
    bag_train,
    funk_train,
    rmse,
    split,
    stack_fit,
    svdpp_train,
    vote_recommend,
)


def make_ratings(m=30, n=20, seed=11, noise=0.25):
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.8, 1.2, size=(m, 2))
    q = rng.uniform(0.7, 1.8, size=(n, 2))
    full = p @ q.T + rng.normal(scale=noise, size=(m, n))
    full = np.clip(full, 0.5, 4.5)
    triples = [
        (f"u{u:02d}", f"i{i:02d}", float(full[u, i]))
        for u in range(m)
        for i in range(n)
        if rng.random() < 0.7
    ]
    return RatingDataset(triples, scale=(0.5, 4.5))


def heldout(model, test):
    users, items, truth = test.indexed()
    preds = [model.predict(int(u), int(i)) for u, i in zip(users, items)]
    return rmse(preds, truth)


def main():
    ds = make_ratings()
    train, test = split(ds, 0.25, seed=5)

    plain = funk_train(train, TrainConfig(f=2, alpha=0.01, lam=0.02,
                                          epochs=120, seed=42))
    biased = svdpp_train(train, TrainConfig(f=2, alpha=0.02, lam=0.005,
                                            epochs=120, seed=42))
    print(f"plain model held-out rmse:  {heldout(plain, test):.4f}")
    print(f"biased model held-out rmse: {heldout(biased, test):.4f}")

    # --- fixed-weight blend; weights normalize to sum 1
    blend = BlendModel(members=[plain, biased], weights=[2.0, 1.0])
    print(f"\n2:1 blend held-out rmse:    {heldout(blend, test):.4f}")
    print(f"normalized weights:         {blend.weights.round(4).tolist()}")

    # --- rank voting over the members' own top lists
    u = train.user_index["u03"]
    print("\nvote over top-4 lists for user u03:")
    for item, votes in vote_recommend([plain, biased], u, k=4):
        print(f"  item {item}: {votes} vote(s)")

    # --- bagging: retrain the same recipe on bootstrap resamples
    trainer = lambda d: funk_train(d, TrainConfig(f=2, alpha=0.01, lam=0.02,
                                                  epochs=60, seed=42))
    bag = bag_train(trainer, train, b=4, seed=9)
    single = trainer(train)
    print(f"\nsingle model held-out rmse: {heldout(single, test):.4f}")
    print(f"bag of 4 held-out rmse:     {heldout(bag, test):.4f}")

    # --- stacking: fit free-sign coefficients on the held-out slice
    stack = stack_fit([plain, biased], test)
    print(f"\nstacked coefficients: {stack.weights.round(4).tolist()} "
          f"+ intercept {stack.intercept:.4f}")
    print(f"stack rmse on its own fitting slice: {heldout(stack, test):.4f}")


if __name__ == "__main__":
    main()
