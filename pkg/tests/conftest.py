import numpy as np
import pytest


def fd_gradient(build, param, h=1e-6):
    """Central finite-difference gradient of build() w.r.t. every entry of param.data."""
    num = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    out = num.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = build().item()
        flat[i] = orig - h
        down = build().item()
        flat[i] = orig
        out[i] = (up - down) / (2 * h)
    return num


def max_rel_err(analytic, numeric, floor=1e-3):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float((np.abs(analytic - numeric) / denom).max())


def assert_grad_matches(build, params, tol=1e-4, h=1e-6):
    """Run backward once and compare each param's grad against finite differences."""
    for p in params:
        p.zero_grad()
    build().backward()
    analytic = {id(p): (p.grad.copy() if p.grad is not None else np.zeros_like(p.data)) for p in params}
    for p in params:
        err = max_rel_err(analytic[id(p)], fd_gradient(build, p, h=h))
        assert err < tol, f"gradient mismatch: rel err {err:.3e} on shape {p.shape}"
    for p in params:
        p.zero_grad()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
