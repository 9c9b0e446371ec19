"""Smoke test for the `prc` Python module.

Usage:
    cargo build -p prc-py --release --features extension-module
    python3 python/smoke_test.py

Imports an installed `prc` if present, otherwise loads target/release/libprc.so.
"""

import importlib.util
import math
import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load_prc():
    try:
        import prc  # noqa: F401

        return prc
    except ImportError:
        pass
    lib = os.environ.get("PRC_LIB", os.path.join(ROOT, "target", "release", "libprc.so"))
    if not os.path.exists(lib):
        sys.exit(f"extension not found at {lib}; build it first")
    tmp = tempfile.mkdtemp()
    dst = os.path.join(tmp, "prc.so")
    shutil.copy(lib, dst)
    spec = importlib.util.spec_from_file_location("prc", dst)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def main():
    prc = load_prc()

    found = prc.extract_positions("On p. 8, l. 21 the claim is unclear; see also Table 2.")
    kinds = [k for k, *_ in found]
    assert "PageLine" in kinds and "Table" in kinds, found
    print("extract_positions", found)

    assert prc.classify_title("Materials and Methods") == "Methods"
    assert prc.classify_title("Concluding remarks") in ("Discussion", "Unknown")

    group = prc.normalize_group([0.0, 1.0, 10.0, 100.0])
    assert group[0] == (None, 0.0)
    assert abs(sum(z for z, _ in group[1:])) < 1e-12
    assert abs(group[2][1] - 1.0) < 1e-12

    rho, p, n = prc.spearman([1, 2, 3, 4, 5], [2, 4, 6, 8, 10])
    assert abs(rho - 1.0) < 1e-12 and n == 5

    d, p = prc.ks_two_sample([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert d == 0.0 and abs(p - 1.0) < 1e-12
    assert abs(prc.kolmogorov_q(1.0) - 0.26999967) < 1e-6

    bins = prc.partition([(f"a{i}", float(i)) for i in range(10)], 3)
    assert sum(len(b) for b in bins) == 10 and "a9" in bins[0]

    xs = [i / 50.0 for i in range(200)]
    counts = [float(round(math.exp(0.5 + 0.3 * x))) for x in xs]
    fit = prc.nb_fit(["x"], [xs], counts)
    assert fit["n"] == 200 and len(fit["coefficients"]) == 2
    print("nb_fit", [(c["name"], round(c["beta"], 3)) for c in fit["coefficients"]])

    config = os.path.join(ROOT, "crates", "core", "data", "mini", "mini.toml")
    with tempfile.TemporaryDirectory() as out:
        report = prc.run_pipeline(config, 7, out=out)
        assert os.path.exists(os.path.join(out, "report.json"))
        print("run_pipeline keys", sorted(report)[:6])

    try:
        prc.normalize_group([-1.0])
    except ValueError:
        pass
    else:
        raise AssertionError("negative citation accepted")

    print("smoke test ok")


if __name__ == "__main__":
    main()
