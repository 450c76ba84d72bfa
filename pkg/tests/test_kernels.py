import os
import subprocess
import sys

import numpy as np
import pytest

from weightless import kernels

native = pytest.mark.skipif(kernels.native_backend is None, reason="extension not built")


@native
@pytest.mark.parametrize("name,window", [("causal_moving_average", w) for w in (1, 2, 5, 9)]
                         + [("median_filter", w) for w in (1, 3, 5, 9)])  # median windows are odd
def test_filters_agree(rng, name, window):
    x = rng.normal(size=257)
    a = getattr(kernels.native_backend, name)(x, window)
    b = getattr(kernels.python_backend, name)(x, window)
    assert np.array_equal(a, b)


@native
def test_read_only_input(rng):
    x = rng.normal(size=20)
    x.setflags(write=False)
    assert np.array_equal(kernels.native_backend.causal_moving_average(x, 3),
                          kernels.python_backend.causal_moving_average(x, 3))


def test_forced_fallback():
    env = {**os.environ, "WEIGHTLESS_PURE_PYTHON": "1"}
    code = ("from weightless import kernels; from weightless.toy import sit_sequence; "
            "from weightless.smoothing import smooth_pipeline; smooth_pipeline(sit_sequence()[0]); "
            "print(kernels.BACKEND)")
    r = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert r.stdout.strip() == "python"
