"""Compare the compiled and pure-numpy kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Times the fused loss+gradient kernel and a plain forward pass for a few
batch sizes and reports the speedup of the compiled backend, after checking
that both agree numerically.
"""

import argparse
import timeit

import numpy as np

from mile import backend
from mile.network import ACTIVATIONS, NetworkConfig, init_params


def _args(cfg, theta, n, rng):
    X = rng.standard_normal((n, cfg.input_dim))
    y = rng.standard_normal((n, cfg.n_outputs))
    lab = np.zeros(0, dtype=np.int64)
    act = ACTIVATIONS.index(cfg.activation)
    return (theta, X, y, lab, np.array(cfg.layer_sizes, dtype=np.int64), act, 0, 1e-3)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args(argv)
    names = backend.available()
    if "cython" not in names:
        print("compiled backend not built; only python available")
    kernels = {name: backend.load(name) for name in names}
    for activation in ACTIVATIONS:
        cfg = NetworkConfig(input_dim=8, hidden_layers=(16, 16), activation=activation)
        theta = init_params(cfg, seed=0)
        rng = np.random.default_rng(0)
        print(f"\nnetwork {cfg.layer_sizes}, {activation}, d = {cfg.n_params}")
        print(f"{'n':>6} {'kernel':>10} " + " ".join(f"{nm + ' (us)':>14}" for nm in names) + f" {'speedup':>8}")
        for n in (16, 64, 256, 1024, 4096):
            a = _args(cfg, theta, n, rng)
            outs = {nm: k.loss_grad(*a, True) for nm, k in kernels.items()}
            if len(outs) == 2:
                (r0, g0), (r1, g1) = outs.values()
                assert np.allclose(r0, r1, rtol=1e-12, atol=1e-12) and np.allclose(g0, g1, rtol=1e-10, atol=1e-12)
            for label, call in (
                ("loss_grad", lambda k: k.loss_grad(*a, True)),
                ("forward", lambda k: k.forward(a[0], a[1], a[4], a[5])),
            ):
                times = {
                    nm: min(timeit.repeat(lambda k=k: call(k), number=args.repeat, repeat=3)) / args.repeat * 1e6
                    for nm, k in kernels.items()
                }
                speed = times["python"] / times["cython"] if len(times) == 2 else float("nan")
                print(f"{n:>6} {label:>10} " + " ".join(f"{times[nm]:>14.1f}" for nm in names) + f" {speed:>7.2f}x")


if __name__ == "__main__":
    main()
