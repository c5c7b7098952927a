import itertools
import os
import random
import subprocess
import sys

import pytest

from dynbinpack import _kernels_py, kernels

BACKENDS = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])


def knapsack_brute(weights, values, capacity):
    best = 0
    ranges = [range(capacity // w + 1) for w in weights]
    for counts in itertools.product(*ranges):
        if sum(w * a for w, a in zip(weights, counts)) <= capacity:
            best = max(best, sum(v * a for v, a in zip(values, counts)))
    return best


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("seed", range(10))
def test_knapsack_matches_enumeration(backend, seed):
    rng = random.Random(seed)
    weights = [rng.randint(3, 12) for _ in range(3)]
    values = [rng.randint(1, 50) for _ in range(3)]
    value, counts = kernels.knapsack_dp(weights, values, 30, backend=backend)
    assert value == knapsack_brute(weights, values, 30)
    assert sum(w * a for w, a in zip(weights, counts)) <= 30
    assert sum(v * a for v, a in zip(values, counts)) == value


@pytest.mark.parametrize("backend", BACKENDS)
def test_bnb_small_cases(backend):
    assert kernels.bnb_min_bins([5, 5, 5, 5], 10, 4, backend=backend) == 2
    assert kernels.bnb_min_bins([7, 6, 5, 4, 3], 10, 5, backend=backend) == 3
    assert kernels.bnb_min_bins([], 10, 0, backend=backend) == 0


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")
@pytest.mark.parametrize("seed", range(20))
def test_backends_agree(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 10)
    weights = [rng.randint(1, 100) for _ in range(n)]
    values = [rng.randint(0, 10 ** 6) for _ in range(n)]
    cap = rng.randint(0, 2000)
    assert kernels.knapsack_dp(weights, values, cap, backend="python") == \
        kernels.knapsack_dp(weights, values, cap, backend="cython")
    sizes = sorted((rng.randint(1, 100) for _ in range(rng.randint(1, 12))), reverse=True)
    assert kernels.bnb_min_bins(sizes, 100, len(sizes), backend="python") == \
        kernels.bnb_min_bins(sizes, 100, len(sizes), backend="cython")


def test_huge_values_use_exact_python_path():
    value, counts = kernels.knapsack_dp([1], [10 ** 30], 3)
    assert value == 3 * 10 ** 30 and counts == [3]
    assert _kernels_py.knapsack_dp([1], [10 ** 30], 3) == (value, counts)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.knapsack_dp([1], [1], 1, backend="fortran")


def test_pure_python_fallback_via_environment():
    env = dict(os.environ, DYNBINPACK_PURE_PYTHON="1")
    code = ("from dynbinpack import kernels; print(kernels.BACKEND);"
            "print(kernels.knapsack_dp([3, 5], [4, 7], 11)[0])")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["python", "15"]
    forced = subprocess.run([sys.executable, "-c", "from dynbinpack import kernels; kernels._pick('cython')"],
                            env=env, capture_output=True, text=True)
    assert forced.returncode != 0
    assert "compiled kernels are not available" in forced.stderr
