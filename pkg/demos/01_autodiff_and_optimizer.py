"""Tour of the tensor core: tape-based gradients, the optimizer, checking.

Run from the repository root:  python3 demos/01_autodiff_and_optimizer.py
"""

import numpy as np

from syngcn import numerics as nm

print("== tensors and the tape ==")
w = nm.parameter("w", np.array([[1.0, -2.0], [0.5, 3.0]]), dtype=np.float64)
x = nm.Tensor(np.array([[1.0], [1.0]]), dtype=np.float64)
with nm.Tape() as tape:
    y = nm.relu(w @ x)              # [[0 hidden], ...]
    loss = nm.sum_all(y * y)
grads = tape.gradients(loss)
print("loss:", float(loss.data))
print("dL/dw:\n", grads["w"])

print("\n== the optimizer walks a bowl ==")
w = nm.parameter("w", np.array([3.0, -2.0]), dtype=np.float64)
state = nm.AdamState(learning_rate=0.05)
for step in range(200):
    nm.zero_grads([w])
    with nm.Tape() as tape:
        loss = nm.sum_all(w * w)
    nm.adam_step({"w": w}, tape.gradients(loss), state)
    if step % 50 == 0:
        print(f"step {step:3d}: w = {w.data.round(4)}")
print(f"after {state.step_count} steps: w = {w.data.round(6)}")

print("\n== gradient checking (finite differences vs the tape) ==")
rng = np.random.default_rng(0)
a = nm.parameter("a", rng.standard_normal((3, 3)), dtype=np.float64)
b = nm.parameter("b", rng.standard_normal((3, 1)), dtype=np.float64)


def objective():
    return nm.sum_all(nm.sigmoid(a @ nm.tanh(b)))


result = nm.grad_check(objective, {"a": a, "b": b})
print(f"max relative error {result.max_rel_err:.2e} over {result.checked} "
      f"entries ({result.skipped} skipped near ReLU kinks)")

print("\n== checkpoints round-trip bit for bit ==")
import tempfile
from pathlib import Path

with tempfile.TemporaryDirectory() as d:
    p1, p2 = Path(d) / "a.ckpt", Path(d) / "b.ckpt"
    nm.save_checkpoint({"a": a, "b": b}, p1)
    nm.save_checkpoint(nm.load_checkpoint(p1), p2)
    print("identical bytes:", p1.read_bytes() == p2.read_bytes())
