"""The numba kernels must agree with the numpy reference implementations."""

import numpy as np
import pytest

from dualflow import kernels


def make_inputs(seed=0, C=11, nq=6, n=5, m=4):
    rng = np.random.default_rng(seed)
    return {
        "wdet": rng.random((C, nq)) + 0.1,
        "val": rng.standard_normal((nq, n)),
        "grad": rng.standard_normal((C, nq, n, 2)),
        "vvals": rng.standard_normal((C, nq, m, 2)),
        "divs": rng.standard_normal((C, nq, m)),
        "qval": rng.standard_normal((nq, 3)),
        "uq": rng.standard_normal((C, nq, 2)),
        "duq": rng.standard_normal((C, nq)),
        "wq": rng.standard_normal((C, nq)),
        "F": rng.standard_normal((C, nq, 2)),
        "fq": rng.standard_normal((C, nq)),
        "dofs": rng.integers(0, 40, size=(C, n)).astype(np.int64),
        "mdofs": rng.integers(0, 40, size=(C, m)).astype(np.int64),
        "coef": rng.standard_normal(40),
    }


CALLS = {
    "mass_ref": lambda d: ("wdet", "val"),
    "mass_vec": lambda d: ("wdet", "vvals"),
    "gradgrad": lambda d: ("wdet", "grad"),
    "div_pairing": lambda d: ("wdet", "divs", "qval"),
    "convection": lambda d: ("wdet", "val", "grad", "uq", "duq"),
    "rotation": lambda d: ("wdet", "wq", "vvals"),
    "field_scalar": lambda d: ("dofs", "coef", "val"),
    "field_scalar_grad": lambda d: ("dofs", "coef", "grad"),
    "field_vec": lambda d: ("mdofs", "coef", "vvals"),
    "field_div": lambda d: ("mdofs", "coef", "divs"),
    "vec_dot": lambda d: ("wdet", "F", "vvals"),
    "vec_scalar": lambda d: ("wdet", "fq", "val"),
    "vec_rotgrad": lambda d: ("wdet", "F", "grad"),
}


@pytest.mark.skipif(not kernels.NUMBA_ENABLED, reason="numba backend not active")
@pytest.mark.parametrize("name", sorted(CALLS))
def test_backends_agree(name):
    data = make_inputs()
    args = [data[k] for k in CALLS[name](data)]
    ref = kernels.NUMPY_IMPL[name](*args)
    out = kernels.NUMBA_IMPL[name](*args)
    assert out.shape == ref.shape
    scale = max(1.0, float(np.max(np.abs(ref))))
    assert np.max(np.abs(out - ref)) < 1e-13 * scale


@pytest.mark.skipif(not kernels.NUMBA_ENABLED, reason="numba backend not active")
def test_scatter_backends_agree():
    data = make_inputs()
    C, n = data["dofs"].shape
    rng = np.random.default_rng(1)
    local = rng.standard_normal((C, n, n))
    pos = rng.integers(0, 60, size=(C, n, n)).astype(np.int64)
    a = np.zeros(60)
    b = np.zeros(60)
    kernels.NUMPY_IMPL["scatter_matrix"](a, pos, local)
    kernels.NUMBA_IMPL["scatter_matrix"](b, pos, local)
    assert np.max(np.abs(a - b)) < 1e-14
    va = np.zeros(40)
    vb = np.zeros(40)
    vec = rng.standard_normal((C, n))
    kernels.NUMPY_IMPL["scatter_vector"](va, data["dofs"], vec)
    kernels.NUMBA_IMPL["scatter_vector"](vb, data["dofs"], vec)
    assert np.max(np.abs(va - vb)) < 1e-14


def test_rotation_exactly_skew_both_backends():
    data = make_inputs()
    for name, impl in kernels.backends().items():
        out = impl["rotation"](data["wdet"], data["wq"], data["vvals"])
        assert np.max(np.abs(out + np.transpose(out, (0, 2, 1)))) == 0.0, name


def test_active_backend_matches_env():
    import os

    env = os.environ.get("DUALFLOW_NUMBA", "auto").lower()
    if env in ("0", "false", "off", "numpy"):
        assert kernels.BACKEND == "numpy"
    elif env in ("1", "true", "on", "numba"):
        assert kernels.BACKEND == "numba"
    else:
        assert kernels.BACKEND in ("numba", "numpy")
