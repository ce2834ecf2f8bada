"""Smoke test for the sdsense extension.

Run after `maturin develop -m crates/python/Cargo.toml`, or against a plain
`cargo build -p sds-python --features extension-module --release`, in which case
the shared library is loaded from target/release.
"""

import cmath
import importlib.machinery
import importlib.util
import math
import pathlib
import sys


def load():
    try:
        import sdsense

        return sdsense
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parents[1] / "target"
    for profile in ("release", "debug"):
        for name in ("libsdsense.so", "libsdsense.dylib", "sdsense.dll"):
            path = root / profile / name
            if path.exists():
                loader = importlib.machinery.ExtensionFileLoader("sdsense", str(path))
                spec = importlib.util.spec_from_loader("sdsense", loader)
                module = importlib.util.module_from_spec(spec)
                loader.exec_module(module)
                return module
    sys.exit("sdsense not found; build it first")


def close(a, b, tol=1e-9):
    assert abs(a - b) <= tol * max(1.0, abs(b)), (a, b)


def main():
    sds = load()

    ghz = sds.SpinState("ghz", 2)
    for w, expected in zip(ghz.weights, [0.5, 0.0, 0.5]):
        close(abs(w) ** 2, expected)
    zeta = 0.8
    n = math.sinh(zeta) ** 2
    close(ghz.mode_occupation(zeta), n)
    bounds = ghz.bounds(zeta)
    close(bounds["n_mean"], n)
    assert bounds["abs"]["qcrb"] < bounds["abs"]["sql"]
    q = ghz.qfim(zeta)
    close(q[0][1], q[1][0])

    coh = sds.SpinState("coherent_x", 3)
    close(sum(abs(w) ** 2 for w in coh.weights), 1.0)
    try:
        sds.SpinState("neel", 2)
        raise AssertionError("unknown state accepted")
    except ValueError:
        pass

    close(sds.squeezing_db(1.0), 20 / math.log(10))
    close(sds.target_zeta(1.0, 4), 0.5)

    d = sds.DriveParams.for_target(2 * math.pi * 5e3, 0.6)
    close(abs(d.effective_zeta()), 0.6, 1e-6)
    close(d.total_duration(), 4 * d.segment_duration())

    dist = sds.protocol_distribution("single_spin", 1, 1.0, 0.05 + 0.02j)
    close(sum(p for _, p in dist), 1.0, 1e-10)
    assert sds.protocol_cfi("ghz", 2, 0.5) > 0

    p1, p2 = sds.ancilla_probabilities(2.0, 0.3, 0j)
    close(p1, 1.0)
    close(p2, 1.0)

    params, t_min, fidelity, _ = sds.min_time_search(1, 0.3)
    assert params.reps == 1 and fidelity > 0.99, (params, fidelity)
    close(t_min, params.total_duration())

    xs, ps, w = sds.wigner_grid("ghz", 2, 0.3, 5.0, 41)
    area = (xs[1] - xs[0]) * (ps[1] - ps[0])
    close(sum(map(sum, w)) * area, 1.0, 1e-3)
    assert cmath.isclose(w[10][20], w[30][20], rel_tol=1e-9, abs_tol=1e-12)

    print("sdsense", sds.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
