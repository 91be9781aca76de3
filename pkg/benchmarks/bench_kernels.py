#!/usr/bin/env python3
"""Timing comparison of the compiled and numpy kernel backends.

Runs both implementations of the two hot kernels on recognition-scan sized
inputs, checks they agree, and prints per-call timings with the speedup.
Force the numpy path in a real run with ``IPROMP_PURE_KERNELS=1``.
"""
import argparse
import time

import numpy as np

import ipromp
from ipromp._kernels import pure

try:
    from ipromp._kernels import _core
except ImportError:
    _core = None


def _basis_args(rng, n_basis):
    centers = np.linspace(-0.05, 1.05, n_basis)
    width = 1.0 * (centers[1] - centers[0])
    return centers, width


def _rbf_case(rng, n_phases, n_basis):
    centers, width = _basis_args(rng, n_basis)
    z = rng.uniform(0.0, 1.0, size=n_phases)
    return (z, centers, width, True)


def _scan_case(rng, s, p, n_basis, n_candidates):
    centers, width = _basis_args(rng, n_basis)
    times = np.sort(rng.uniform(0.1, 4.0, size=s))
    values = rng.normal(size=(s, p))
    mu_h = rng.normal(size=(p, n_basis))
    dim = p * n_basis
    a = rng.normal(size=(dim, dim))
    sig = (a @ a.T / dim + 0.2 * np.eye(dim)).reshape(p, n_basis, p, n_basis)
    noise = rng.uniform(0.01, 0.05, size=p)
    alphas = np.geomspace(0.7, 1.3, n_candidates)
    return (times, values, centers, width, True, mu_h, sig, noise,
            alphas, 4.0)


def _time_call(fn, args, repeats, inner):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def _run(name, label, args, repeats, inner, tol):
    ref = pure_fn = getattr(pure, name)
    out_pure = pure_fn(*args)
    t_pure = _time_call(pure_fn, args, repeats, inner)
    if _core is None:
        print(f"{name:20s} {label:28s} pure {t_pure * 1e6:9.1f} us   "
              f"(no compiled module)")
        return True
    core_fn = getattr(_core, name)
    out_core = core_fn(*args)
    diff = float(np.max(np.abs(np.asarray(out_pure) - np.asarray(out_core))))
    t_core = _time_call(core_fn, args, repeats, inner)
    ok = diff <= tol
    print(f"{name:20s} {label:28s} pure {t_pure * 1e6:9.1f} us   "
          f"compiled {t_core * 1e6:9.1f} us   speedup {t_pure / t_core:5.2f}x"
          f"   max|diff| {diff:.1e}" + ("" if ok else "   DISAGREE"))
    return ok


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repetitions, best is reported")
    parser.add_argument("--inner", type=int, default=20,
                        help="calls per repetition")
    parser.add_argument("--tol", type=float, default=1e-8,
                        help="max allowed backend disagreement")
    parser.add_argument("--seed", type=int, default=0)
    ns = parser.parse_args()
    rng = np.random.default_rng(ns.seed)

    print(f"backend selected at import: {ipromp.KERNEL_BACKEND}")
    if _core is None:
        print("compiled module unavailable, timing the numpy path only")
    cases = [
        ("rbf_rows", "T=200 N=5",
         _rbf_case(rng, 200, 5)),
        ("rbf_rows", "T=20000 N=31",
         _rbf_case(rng, 20000, 31)),
        ("window_loglik_scan", "s=10 P=2 N=5 C=61",
         _scan_case(rng, 10, 2, 5, 61)),
        ("window_loglik_scan", "s=50 P=2 N=5 C=61",
         _scan_case(rng, 50, 2, 5, 61)),
        ("window_loglik_scan", "s=50 P=3 N=15 C=61",
         _scan_case(rng, 50, 3, 15, 61)),
    ]
    ok = True
    for name, label, args in cases:
        ok = _run(name, label, args, ns.repeats, ns.inner, ns.tol) and ok
    if not ok:
        raise SystemExit("backends disagree beyond tolerance")


if __name__ == "__main__":
    main()
