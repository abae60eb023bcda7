"""Time the numba and numpy forms of every hot kernel on representative inputs.

    python benchmarks/bench_kernels.py [--repeat 5]

The first numba call compiles (or loads the on-disk cache), so each kernel
is warmed up once before timing. Both forms are checked to agree before
their timings are reported.
"""

import argparse
import timeit

import numpy as np

from transmon_harper import kernels as kn


def _cases(rng):
    W, L = 50, 201
    psi = rng.normal(size=(W, L)) + 1j * rng.normal(size=(W, L))
    n = np.arange(L) - (L - 1) / 2.0
    row, col = kn._bond_currents_numpy(psi, 1.0, 0.4, 0.7, n)
    p, q, d, nn = kn.plaquette_edges(row, col)
    eps = 0.05 * np.abs(d).max()
    U = rng.normal(size=(60, 60, 5, 5)) + 1j * rng.normal(size=(60, 60, 5, 5))
    om = np.linspace(-3, 3, 4000)
    freqs = rng.uniform(-3, 3, 500)
    weights = rng.uniform(0, 1, 500)
    t = np.linspace(0, 400, 3000)
    x = rng.normal(size=3000) + 1j * rng.normal(size=3000)
    om_sig = np.linspace(-3, 3, 2000)
    return [
        ("bond_currents 50x201", kn._bond_currents_jit, kn._bond_currents_numpy, (psi, 1.0, 0.4, 0.7, n)),
        ("vortex regions 50x201", kn._regions_jit, kn._regions_numpy, (p, q, d, nn, eps)),
        ("link field 60^2 x 5 bands", kn._link_field_jit, kn._link_field_numpy, (U,)),
        ("feature sum 4000 x 500", kn._feature_jit, kn._feature_numpy, (om, freqs, weights, 200.0)),
        ("windowed dtft 2000 x 3000", kn._dtft_jit, kn._dtft_numpy, (t, x, om_sig)),
    ]


def _agree(a, b):
    if isinstance(a, tuple):
        return all(_agree(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, atol=1e-9)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<28}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, jit, ref, a in _cases(rng):
        if not _agree(jit(*a), ref(*a)):
            raise SystemExit(f"{name}: numba and numpy results differ")
        tj = min(timeit.repeat(lambda: jit(*a), number=1, repeat=args.repeat))
        tn = min(timeit.repeat(lambda: ref(*a), number=1, repeat=args.repeat))
        print(f"{name:<28}{1e3 * tj:>12.2f}{1e3 * tn:>12.2f}{tn / tj:>10.1f}x")


if __name__ == "__main__":
    main()
