"""Timing comparison of the compiled and pure-NumPy inner-loop backends.

Run as ``python benchmarks/bench_loops.py``.  The workloads mirror what one
simulation round does: K inner iterations of the posterior update (exact
Hessian and Hessian-free variants) and a Langevin chain, at experiment-scale
dimensions.
"""

import time

import numpy as np

from vitsim import HyperParams, LinearPotential, SufficientStats, sherman_morrison_update
from vitsim import _loops_py
from vitsim import loops as loops_mod
from vitsim.potentials import LogisticPotential


def make_linear(d):
    gen = np.random.default_rng(0)
    stats = SufficientStats(d, 1.0)
    for _ in range(3 * d):
        phi = gen.standard_normal(d)
        phi /= np.linalg.norm(phi)
        sherman_morrison_update(stats, phi, float(gen.standard_normal()))
    return LinearPotential(stats, 1.0)


def make_logistic(d, n):
    gen = np.random.default_rng(1)
    pot = LogisticPotential(d, 1.0, 1.0)
    for _ in range(n):
        phi = gen.standard_normal(d)
        phi /= np.linalg.norm(phi)
        pot.append(phi, float(gen.integers(2)))
    return pot


def bench(label, py_call, cy_call, repeats=5):
    for call in (py_call, cy_call):  # warm up
        if call is not None:
            call()
    t_py = min(_time(py_call) for _ in range(repeats))
    if cy_call is None:
        print(f"{label:32s} python {t_py * 1e3:8.2f} ms   (no compiled backend)")
        return
    t_cy = min(_time(cy_call) for _ in range(repeats))
    print(f"{label:32s} python {t_py * 1e3:8.2f} ms   cython {t_cy * 1e3:8.2f} ms   speedup {t_py / t_cy:6.1f}x")


def _time(call):
    t0 = time.perf_counter()
    call()
    return time.perf_counter() - t0


def main():
    d, K = 10, 200
    gen = np.random.default_rng(2)
    eps = gen.standard_normal((K, d))
    mu0, B0, C0 = np.zeros(d), np.eye(d), np.eye(d)
    cy = loops_mod._loops_cy
    print(f"inner-loop benchmarks at d={d}, K={K} iterations per call\n")

    lin = make_linear(d)
    args_lin = loops_mod._potential_args(lin)
    h = 0.2 * lin.stats.lambda_min / (2.0 * (lin.stats.lambda_min**2 + 2.0 * lin.stats.lambda_max**2))
    bench(
        "linear, exact Hessian",
        lambda: _loops_py.vits_inner_loop(mu0, B0, None, lin, h, K, eps, _loops_py.HESSIAN),
        None if cy is None else (lambda: cy.vits_hessian_loop(mu0, B0, args_lin, h, eps)),
    )
    bench(
        "linear, Hessian-free",
        lambda: _loops_py.vits_inner_loop(mu0, B0, C0, lin, h, K, eps, _loops_py.HESSIAN_FREE),
        None if cy is None else (lambda: cy.vits_hessian_free_loop(mu0, B0, C0, args_lin, h, eps, 0.5)),
    )

    logi = make_logistic(d, 500)
    args_log = loops_mod._potential_args(logi)
    bench(
        "logistic (500 obs), exact Hessian",
        lambda: _loops_py.vits_inner_loop(mu0, B0, None, logi, h, K, eps, _loops_py.HESSIAN),
        None if cy is None else (lambda: cy.vits_hessian_loop(mu0, B0, args_log, h, eps)),
    )

    noise = gen.standard_normal((K, d))
    bench(
        "Langevin chain, linear",
        lambda: _loops_py.ula_chain(mu0, lin, 0.01, K, noise),
        None if cy is None else (lambda: cy.ula_loop(mu0, args_lin, 0.01, noise)),
    )

    hp = HyperParams(d=d, T=2000, eta=1.0)
    print(f"\nactive backend for library calls: {loops_mod.active_backend()}")
    print(f"(eta resolved to {hp.eta} for the workload above)")


if __name__ == "__main__":
    main()
