"""Train a model, save it as JSON, reload it, and serve token queries.

A model file carries the algorithm tag, the rating scale, the token
index maps, and every learned parameter at full precision, so a reloaded
model predicts bit-for-bit what the original did. The same files back
the command line:

    latentrec train --input ratings.csv --output m.json --algo funk
    latentrec predict m.json 4 2
    latentrec recommend m.json 4 --k 2
    latentrec evaluate m.json --test holdout.csv
"""

import tempfile

from latentrec import (
    ModelBundle,
    TrainConfig,
    funk_train,
    load_model,
    parse_csv,
    save_model,
)

CSV = """user,item,rating
1,1,1
1,2,3
1,4,4
2,1,5
2,3,5
2,4,4
3,1,4
3,3,1
3,4,1
4,3,4
4,4,5
"""


def main():
    ds = parse_csv(CSV)
    model = funk_train(ds, TrainConfig(f=2, alpha=0.02, lam=0.01,
                                       epochs=150, seed=3))
    bundle = ModelBundle(
        algorithm="funk",
        model=model,
        user_index=ds.user_index,
        item_index=ds.item_index,
        scale=ds.scale,
    )

    with tempfile.TemporaryDirectory() as outdir:
        path = save_model(bundle, f"{outdir}/funk.json")
        with open(path, encoding="utf-8") as handle:
            lines = handle.read().splitlines()
        print(f"wrote {path}: {len(lines)} lines of JSON")
        print("\n".join(lines[:6]) + "\n  ...")

        reloaded = load_model(path)

    print(f"\nalgorithm: {reloaded.algorithm}, scale {reloaded.scale}")
    for user, item in (("4", "1"), ("4", "2"), ("1", "3")):
        a = bundle.predict(user, item)
        b = reloaded.predict(user, item)
        print(f"user {user}, item {item}: trained {a:.6f}, reloaded {b:.6f}, "
              f"gap {abs(a - b):.1e}")

    print("\ntop 2 unrated items for user 4 (token, score):")
    for token, score in reloaded.recommend("4", k=2):
        print(f"  {token}\t{score:.4f}")


if __name__ == "__main__":
    main()
