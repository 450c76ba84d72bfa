"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on identical inputs through both backends; outputs are
checked for agreement before timings are reported.
"""

import argparse
import timeit

import numpy as np

from weightless import kernels
from weightless.geometry import Box, TerrainScene
from weightless.sim.chain import SimState, step
from weightless.toy import pose_from_angles, toy_chain


def cases():
    rng = np.random.default_rng(0)
    x = rng.normal(size=20_000)
    chain = toy_chain()
    scene = TerrainScene(0.0, (Box((0.3, 0.0, 0.2), (0.2, 0.3, 0.2)),))
    s0 = SimState(pose_from_angles(-0.6, 1.0, 0.4), np.zeros(chain.n_dof))
    q_des = np.zeros(chain.n_joints)

    def sim(backend):
        return step(chain, s0, None, scene, substeps=1000, q_des=q_des, backend=backend).x

    return [
        ("causal_moving_average n=2e4 w=5", lambda b: b.causal_moving_average(x, 5)),
        ("median_filter n=2e4 w=5", lambda b: b.median_filter(x, 5)),
        ("planar_substeps 1000 x 1 ms", sim),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.native_backend is None:
        raise SystemExit("compiled extension not available; build with `python3 setup.py build_ext --inplace`")
    nat, py = kernels.native_backend, kernels.python_backend
    print(f"{'kernel':36s} {'python ms':>10s} {'native ms':>10s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, fn in cases():
        diff = float(np.max(np.abs(np.asarray(fn(nat)) - np.asarray(fn(py)))))
        t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat))
        t_nat = min(timeit.repeat(lambda: fn(nat), number=1, repeat=args.repeat))
        print(f"{name:36s} {1e3 * t_py:10.2f} {1e3 * t_nat:10.3f} {t_py / t_nat:7.0f}x {diff:11.1e}")


if __name__ == "__main__":
    main()
