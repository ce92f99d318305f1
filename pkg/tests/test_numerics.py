import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from syngcn import numerics as nm
from syngcn.errors import ContractError, FormatError, NumericsError, ShapeError


def matmul_oracle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Naive triple loop in float64."""
    m, k = a.shape
    k2, n = b.shape
    out = np.zeros((m, n), dtype=np.float64)
    for i in range(m):
        for j in range(n):
            for l in range(k):
                out[i, j] += float(a[i, l]) * float(b[l, j])
    return out


class TestMatmul:
    def test_identity(self):
        a = nm.Tensor([[1.0, 2.0], [3.0, 4.0]])
        eye = nm.Tensor(np.eye(2, dtype=np.float32))
        assert np.array_equal(nm.matmul(eye, a).data, a.data)

    def test_small_product(self):
        out = nm.matmul(nm.Tensor([[1.0, 2.0]]), nm.Tensor([[3.0], [4.0]]))
        assert out.data.shape == (1, 1)
        assert out.data[0, 0] == 11.0

    def test_against_triple_loop(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((5, 7)).astype(np.float32)
        b = rng.standard_normal((7, 3)).astype(np.float32)
        got = nm.matmul(nm.Tensor(a), nm.Tensor(b)).data
        assert np.abs(got - matmul_oracle(a, b)).max() < 1e-6

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 6),
           st.integers(0, 2**32 - 1))
    def test_random_shapes_match_oracle(self, m, k, n, seed):
        rng = np.random.default_rng(seed)
        a = rng.uniform(-2, 2, (m, k)).astype(np.float32)
        b = rng.uniform(-2, 2, (k, n)).astype(np.float32)
        got = nm.matmul(nm.Tensor(a), nm.Tensor(b)).data
        assert np.abs(got - matmul_oracle(a, b)).max() < 1e-5

    def test_shape_error_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
            nm.matmul(nm.Tensor(np.ones((2, 3))), nm.Tensor(np.ones((2, 3))))

    def test_gradient(self):
        a = nm.parameter("a", np.array([[1.0, 2.0], [3.0, 4.0]]))
        b = nm.parameter("b", np.array([[1.0], [1.0]]))
        with nm.Tape() as tape:
            loss = nm.sum_all(nm.matmul(a, b))
        grads = tape.gradients(loss)
        assert np.array_equal(grads["a"], np.ones((2, 2)))
        assert np.array_equal(grads["b"], np.array([[4.0], [6.0]]))


class TestRelu:
    def test_sign_cases(self):
        out = nm.relu(nm.Tensor([[-1.0, 0.0, 2.0]]))
        assert np.array_equal(out.data, [[0.0, 0.0, 2.0]])

    def test_all_negative(self):
        out = nm.relu(nm.Tensor(-np.ones((3, 4))))
        assert np.array_equal(out.data, np.zeros((3, 4)))

    def test_gradient_matches_finite_differences(self):
        # frozen central-difference oracle for sum(relu(x)) at [-1, 2]: [0, 1]
        x = nm.parameter("x", np.array([[-1.0, 2.0]]))
        with nm.Tape() as tape:
            loss = nm.sum_all(nm.relu(x))
        grads = tape.gradients(loss)
        assert np.array_equal(grads["x"], np.array([[0.0, 1.0]]))

    def test_subgradient_at_zero_is_zero(self):
        x = nm.parameter("x", np.array([[0.0]]))
        with nm.Tape() as tape:
            loss = nm.sum_all(nm.relu(x))
        assert tape.gradients(loss)["x"][0, 0] == 0.0


class TestSigmoid:
    def test_symmetry_point(self):
        assert nm.sigmoid(nm.Tensor([[0.0]])).data[0, 0] == 0.5

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-30, 30))
    def test_complement_identity(self, x):
        a = nm.sigmoid(nm.Tensor([[x]], dtype=np.float64)).data[0, 0]
        b = nm.sigmoid(nm.Tensor([[-x]], dtype=np.float64)).data[0, 0]
        assert a + b == pytest.approx(1.0, abs=1e-12)

    def test_large_inputs_stay_inside_open_interval(self):
        for dtype in (np.float32, np.float64):
            out = nm.sigmoid(nm.Tensor([[-50.0, 50.0, -500.0, 500.0]],
                                       dtype=dtype)).data
            assert np.isfinite(out).all()
            assert (out > 0.0).all() and (out < 1.0).all()

    def test_matches_high_precision_oracle(self):
        xs = np.array([[-50.0, -5.0, -0.5, 0.5, 5.0, 50.0]], dtype=np.float32)
        got = nm.sigmoid(nm.Tensor(xs)).data
        want = np.array([1.0 / (1.0 + math.exp(-float(v))) for v in xs[0]])
        assert np.abs(got - want).max() < 1e-6


class TestSoftmaxCrossEntropy:
    def test_uniform_case(self):
        loss = nm.softmax_cross_entropy(nm.Tensor([[1.0, 1.0, 1.0, 1.0]]), 2)
        assert float(loss.data) == pytest.approx(math.log(4.0), abs=1e-6)

    def test_confident_case(self):
        # high-precision value of -log(e^10 / (e^10 + 1)) = log1p(e^-10)
        loss = nm.softmax_cross_entropy(
            nm.Tensor([[10.0, 0.0]], dtype=np.float64), 0)
        assert float(loss.data) == pytest.approx(4.539889921686465e-05,
                                                 rel=1e-9)

    def test_gold_out_of_range(self):
        with pytest.raises(IndexError):
            nm.softmax_cross_entropy(nm.Tensor([[0.0, 1.0]]), 2)
        with pytest.raises(IndexError):
            nm.softmax_cross_entropy(nm.Tensor([[0.0, 1.0]]), -1)

    def test_gradient_matches_central_differences(self):
        logits = nm.parameter("l", np.array([[0.3, -1.2, 2.0]]),
                              dtype=np.float64)
        result = nm.grad_check(
            lambda: nm.softmax_cross_entropy(logits, 1), {"l": logits})
        assert result.max_rel_err < 1e-4

    def test_rows_version_matches_single(self):
        rng = np.random.default_rng(3)
        logits = rng.standard_normal((4, 5))
        golds = [1, 0, 4, 2]
        total = nm.cross_entropy_rows(nm.Tensor(logits, dtype=np.float64),
                                      golds)
        singles = sum(
            float(nm.softmax_cross_entropy(
                nm.Tensor(logits[i:i + 1], dtype=np.float64), golds[i]).data)
            for i in range(4))
        assert float(total.data) == pytest.approx(singles, rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 6), st.integers(0, 2**32 - 1))
    def test_softmax_rows_is_a_distribution(self, n, seed):
        rng = np.random.default_rng(seed)
        probs = nm.softmax_rows(rng.uniform(-30, 30, (3, n)).astype(np.float32))
        assert (probs >= 0).all()
        assert np.abs(probs.sum(axis=1) - 1.0).max() < 1e-6


def reference_adam(w0: float, grad_fn, steps: int, lr=0.01, b1=0.9, b2=0.999,
                   eps=1e-8) -> list[float]:
    """Independent scalar Adam, written out step by step."""
    w, m, v = w0, 0.0, 0.0
    history = []
    for t in range(1, steps + 1):
        g = grad_fn(w)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w -= lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
        history.append(w)
    return history


class TestAdam:
    def test_zero_gradients_fixed_point(self):
        p = nm.parameter("w", np.ones((2, 2)))
        state = nm.AdamState(learning_rate=0.01)
        nm.adam_step({"w": p}, {"w": np.zeros((2, 2))}, state)
        assert np.array_equal(p.data, np.ones((2, 2)))
        assert state.step_count == 1

    def test_first_step_magnitude(self):
        # |update| = lr * g / (sqrt(g^2) + eps) ~= lr for g = 1
        p = nm.parameter("w", np.full((3,), 5.0))
        state = nm.AdamState(learning_rate=0.01)
        nm.adam_step({"w": p}, {"w": np.ones(3)}, state)
        assert np.abs(p.data - (5.0 - 0.01)).max() < 1e-8

    def test_quadratic_convergence_run(self):
        p = nm.parameter("w", np.array([1.0]), dtype=np.float64)
        state = nm.AdamState(learning_rate=0.01)
        ours = []
        for _ in range(100):
            nm.adam_step({"w": p}, {"w": 2.0 * p.data}, state)
            ours.append(float(p.data[0]))
        want = reference_adam(1.0, lambda w: 2.0 * w, 100)
        assert np.abs(np.array(ours) - np.array(want)).max() < 1e-12
        # strict monotone descent toward 0 (never overshoots at this rate)
        path = [1.0] + ours
        assert all(b < a for a, b in zip(path, path[1:]))
        assert 0.0 < ours[-1] < 0.3

    def test_missing_gradient_is_contract_error(self):
        p = nm.parameter("w", np.ones(2))
        with pytest.raises(ContractError, match="w"):
            nm.adam_step({"w": p}, {}, nm.AdamState())

    def test_second_moment_nonnegative(self):
        p = nm.parameter("w", np.ones(4))
        state = nm.AdamState()
        rng = np.random.default_rng(1)
        for _ in range(20):
            nm.adam_step({"w": p}, {"w": rng.standard_normal(4)}, state)
        assert (state.v["w"] >= 0).all()


class TestTape:
    def test_backward_runs_once(self):
        x = nm.parameter("x", np.array([[2.0]]))
        with nm.Tape() as tape:
            loss = nm.sum_all(x * x)
        tape.backward(loss)
        with pytest.raises(ContractError):
            tape.backward(loss)

    def test_scalar_required(self):
        x = nm.parameter("x", np.ones((2, 2)))
        with nm.Tape() as tape:
            y = x * x
        with pytest.raises(ShapeError):
            tape.backward(y)

    def test_gradient_accumulates_over_reuse(self):
        x = nm.parameter("x", np.array([[3.0]]))
        with nm.Tape() as tape:
            loss = nm.sum_all(x * x + x * x)   # d/dx = 4x
        assert tape.gradients(loss)["x"][0, 0] == pytest.approx(12.0)

    def test_nested_tapes_rejected(self):
        with nm.Tape():
            with pytest.raises(ContractError):
                with nm.Tape():
                    pass

    def test_no_tape_means_no_recording(self):
        x = nm.parameter("x", np.array([[1.0]]))
        y = x * x
        assert y.grad is None and not y._needs_grad


class TestFiniteChecks:
    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_overflow_raises(self):
        big = nm.Tensor(np.full((2, 2), 1e30, dtype=np.float32))
        with pytest.raises(NumericsError):
            nm.mul(big, big)

    def test_dtype_mismatch_rejected(self):
        a = nm.Tensor(np.ones((1, 1), dtype=np.float32))
        b = nm.Tensor(np.ones((1, 1), dtype=np.float64))
        with pytest.raises(ShapeError):
            nm.add(a, b)


class TestGradCheck:
    def test_quadratic_bowl(self):
        w = nm.parameter("w", np.array([[0.4, -1.3, 2.2]]), dtype=np.float64)
        result = nm.grad_check(lambda: nm.sum_all(w * w), {"w": w})
        assert result.max_rel_err < 1e-8
        assert result.skipped == 0
        assert result.checked == 3

    def test_kink_entries_skipped_and_counted(self):
        x = nm.parameter("x", np.array([[-1.0, 2.0, 1e-5, -5e-5, 0.5]]),
                         dtype=np.float64)
        result = nm.grad_check(lambda: nm.sum_all(nm.relu(x)), {"x": x})
        assert result.skipped == 2        # the two |x| < 1e-4 entries
        assert result.checked == 3
        assert result.max_rel_err < 1e-8

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_nonfinite_objective_names_parameter(self):
        # finite at the base point (relu output 0), overflows at w + h
        w = nm.parameter("bad_param", np.array([[0.5]]), dtype=np.float64)
        big = nm.Tensor(np.full((1, 1), 1e160), dtype=np.float64)
        half = nm.Tensor(np.full((1, 1), 0.5), dtype=np.float64)

        def f():
            spike = nm.mul(nm.relu(w - half), big)
            return nm.sum_all(nm.mul(spike, spike))

        with pytest.raises(NumericsError, match="bad_param"):
            nm.grad_check(f, {"bad_param": w})


class TestCheckpointContainer:
    def test_save_load_save_identical_bytes(self, tmp_path):
        rng = np.random.default_rng(5)
        tensors = {
            "a.weight": rng.standard_normal((3, 4)).astype(np.float32),
            "b.bias": rng.standard_normal((1, 4)).astype(np.float64),
        }
        p1, p2 = tmp_path / "one.ckpt", tmp_path / "two.ckpt"
        nm.save_checkpoint(tensors, p1)
        loaded = nm.load_checkpoint(p1)
        nm.save_checkpoint(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()
        for name, arr in tensors.items():
            assert np.array_equal(loaded[name], arr)
            assert loaded[name].dtype == arr.dtype

    def test_header_layout(self, tmp_path):
        path = tmp_path / "t.ckpt"
        nm.save_checkpoint({"w": np.zeros((2, 3), dtype=np.float32)}, path)
        raw = path.read_bytes()
        header, rest = raw.split(b"\n", 1)
        assert header == b"SYNGCN1\t1"
        assert rest.split(b"\n", 1)[0] == b"w\tfloat32\t2,3"
        assert len(rest.split(b"\n", 1)[1]) == 2 * 3 * 4

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOTHING\t1\n")
        with pytest.raises(FormatError):
            nm.load_checkpoint(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "t.ckpt"
        nm.save_checkpoint({"w": np.zeros((1, 1), dtype=np.float32)}, path)
        path.write_bytes(path.read_bytes() + b"x")
        with pytest.raises(FormatError):
            nm.load_checkpoint(path)


class TestDeterminism:
    def _run(self, seed: int) -> bytes:
        rng = np.random.default_rng(seed)
        w = nm.parameter("w", rng.uniform(-1, 1, (4, 4)).astype(np.float32))
        target = nm.Tensor(rng.uniform(-1, 1, (4, 4)).astype(np.float32))
        state = nm.AdamState(learning_rate=0.05)
        for _ in range(25):
            nm.zero_grads([w])
            with nm.Tape() as tape:
                diff = w - target
                loss = nm.sum_all(diff * diff)
            nm.adam_step({"w": w}, tape.gradients(loss), state)
        return w.data.tobytes()

    def test_same_seed_bitwise_identical(self):
        assert self._run(9) == self._run(9)

    def test_different_seed_differs(self):
        assert self._run(9) != self._run(10)
