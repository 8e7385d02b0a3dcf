"""Time the compiled recursion kernel against the numpy fallback.

Both backends run on the same pre-drawn link states and LLRs, so only the
recursion itself is timed, and their outputs are checked to be identical.

    python3 benchmarks/bench_kernel.py --trials 1000 --repeat 3
"""

import argparse
import time

import numpy as np

from consensus_detect import _kernel_py
from consensus_detect.detector import SimConfig, _edge_arrays, trial_draws
from consensus_detect.exponents import Ensemble
from consensus_detect.models import GaussianModel, Hypothesis
from consensus_detect.network import LinkFailureModel, build_geometric_graph

try:
    from consensus_detect import _kernel
except ImportError:
    _kernel = None


def make_inputs(n: int, trials: int, horizon: int, p: float, seed: int):
    topo = build_geometric_graph(n, 0.4, 2)
    cfg = SimConfig(Ensemble.homogeneous(GaussianModel(0.2, 1.0), n), LinkFailureModel(topo, p),
                    0.0, horizon, trials, seed, (horizon // 2, horizon))
    draws = [trial_draws(cfg, Hypothesis.H0, t) for t in range(trials)]
    online = np.ascontiguousarray(np.stack([d[0] for d in draws]))
    llr = np.ascontiguousarray(np.stack([d[1] for d in draws]))
    ei, ej = _edge_arrays(cfg)
    return (ei, ej, online, llr, np.asarray(cfg.checkpoints, dtype=np.int64)), len(topo.edges)


def best_of(fn, args, repeat: int) -> tuple[float, np.ndarray]:
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20, help="sensors")
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--horizon", type=int, default=60)
    ap.add_argument("--p", type=float, default=0.3, help="link probability")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    inputs, n_edges = make_inputs(args.n, args.trials, args.horizon, args.p, args.seed)
    print(f"N={args.n} edges={n_edges} trials={args.trials} horizon={args.horizon}")
    t_py, out_py = best_of(_kernel_py.run_batch, inputs, args.repeat)
    print(f"numpy     {t_py:8.3f} s  {args.trials / t_py:10.0f} trials/s")
    if _kernel is None:
        print("compiled  not built (pip install -e . --no-build-isolation)")
        return 0
    t_c, out_c = best_of(_kernel.run_batch, inputs, args.repeat)
    print(f"compiled  {t_c:8.3f} s  {args.trials / t_c:10.0f} trials/s")
    print(f"speedup   {t_py / t_c:8.2f}x")
    same = np.array_equal(out_py, out_c)
    print(f"identical outputs: {same}")
    if not same:
        print(f"max abs difference {float(np.max(np.abs(out_py - out_c))):.3e}")
    return 0 if same else 1


if __name__ == "__main__":
    raise SystemExit(main())
