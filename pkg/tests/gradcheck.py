"""Central-difference gradient checks shared by the layer and loss tests."""
import numpy as np

from app.nn import tensor as T

H = 1e-5


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_gradient(build, arrays, seed: int, tolerance: float = 1e-4) -> None:
    """Compare backward() against central differences of sum(out * w) for random w."""
    rng = np.random.default_rng(seed)
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    nodes = [T.parameter(a) for a in arrays]
    out = build(*nodes)
    weights = rng.normal(size=out.shape)
    T.backward(T.total(T.mul(out, T.constant(weights))))

    def objective(values) -> float:
        return float(np.sum(build(*[T.constant(v) for v in values]).value * weights))

    for i, node in enumerate(nodes):
        numeric = np.zeros_like(arrays[i])
        for idx in np.ndindex(arrays[i].shape):
            plus = [a.copy() for a in arrays]
            minus = [a.copy() for a in arrays]
            plus[i][idx] += H
            minus[i][idx] -= H
            numeric[idx] = (objective(plus) - objective(minus)) / (2 * H)
        assert node.grad is not None
        assert rel_error(node.grad, numeric) < tolerance


def away_from_zero(rng: np.random.Generator, shape) -> np.ndarray:
    """Values with |x| >= 0.1, keeping finite differences off the ReLU kink."""
    return rng.uniform(0.1, 1.0, size=shape) * rng.choice([-1.0, 1.0], size=shape)
