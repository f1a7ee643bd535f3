"""Smoke test for the compiled extension: simulate, estimate, compare."""

import tensor_factor as tf

data = tf.simulate("Ia", [20, 20], 100, seed=1)
fit = tf.estimate(data["dims"], data["steps"], seed=3, m0=60, replicates=20)
print("ranks", fit["ranks"], "sweeps", fit["sweeps"])
assert fit["ranks"] == [2, 2], fit["ranks"]

for k, (est, truth) in enumerate(zip(fit["loadings"], data["bases"])):
    err = tf.projection_error(est, truth)
    print(f"mode {k}: projected error {err:.4f}")
    assert err < 0.5

for k, est in enumerate(tf.hooi(data["dims"], data["steps"], [2, 2])):
    print(f"mode {k}: hooi error {tf.projection_error(est, data['bases'][k]):.4f}")

rows = tf.bench("Ib", [10, 10], 50, 2, estimators=["proj", "hosvd"], seed=5)
assert len(rows) == 4
try:
    tf.simulate("IV", [4, 4], 10)
except ValueError as e:
    print("rejected:", e)
else:
    raise AssertionError("unknown setting accepted")
print("ok")
