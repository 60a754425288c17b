"""Throughput comparison: compiled chain kernel vs the NumPy fallback.

Run from a checkout with the extension built::

    python3 benchmarks/benchmark_kernel.py

Times ``chain_points`` (forward kinematics of the marker set) and
``chain_jacobian`` (kinematics plus per-op derivative columns) on the
six-joint model, and one full identification run per backend.
"""

from __future__ import annotations

import time

import numpy as np


def _time_per_call(fn, args, min_seconds=0.4):
    fn(*args)  # warm up
    calls = 0
    start = time.perf_counter()
    while True:
        for _ in range(200):
            fn(*args)
        calls += 200
        elapsed = time.perf_counter() - start
        if elapsed >= min_seconds:
            return elapsed / calls


def main() -> None:
    from markercal import _core_py
    from markercal.backend import COMPILED
    from markercal.models import industrial_manipulator

    kernels = {"pure-python": _core_py}
    if COMPILED:
        from markercal import _core

        kernels["compiled"] = _core
    else:
        print("extension not built; benchmarking the fallback only")

    model = industrial_manipulator()
    prog = model.program
    rng = np.random.default_rng(1)
    q = rng.uniform(-1.0, 1.0, model.dof)
    theta = np.zeros(prog.n_theta)
    args = prog._args() + (q, model.param_nominal, theta, model.markers)

    print(f"model: {model.name} ({prog.n_ops} ops, {model.markers.shape[0]} markers)")
    baseline = {}
    for label, kernel in kernels.items():
        t_points = _time_per_call(kernel.chain_points, args)
        t_jac = _time_per_call(kernel.chain_jacobian, args)
        baseline[label] = (t_points, t_jac)
        print(
            f"{label:>12}:  chain_points {t_points * 1e6:8.2f} us/call   "
            f"chain_jacobian {t_jac * 1e6:8.2f} us/call"
        )
    if COMPILED:
        sp = baseline["pure-python"][0] / baseline["compiled"][0]
        sj = baseline["pure-python"][1] / baseline["compiled"][1]
        print(f"{'speedup':>12}:  chain_points {sp:8.1f} x        chain_jacobian {sj:8.1f} x")

    # end-to-end: one elastostatic identification per backend
    import importlib

    import markercal.backend as backend_mod
    from markercal.experiments import simulate_measurements
    from markercal.io import fixture_path, load_scenario

    scenario = load_scenario(fixture_path("elastostatic_study.yaml"))
    measurements = simulate_measurements(scenario, trial=1)
    print()
    for label in kernels:
        import os

        os.environ["MARKERCAL_PURE_PYTHON"] = "1" if label == "pure-python" else "0"
        importlib.reload(backend_mod)
        from markercal.identify import identify_iterative

        options = scenario.identify_options("partial")
        start = time.perf_counter()
        result = identify_iterative(scenario.model, measurements, options)
        elapsed = time.perf_counter() - start
        print(
            f"{label:>12}:  elastostatic identification {elapsed * 1e3:8.1f} ms "
            f"({result.iterations} iterations, converged: {result.converged})"
        )
    os.environ.pop("MARKERCAL_PURE_PYTHON", None)
    importlib.reload(backend_mod)


if __name__ == "__main__":
    main()
