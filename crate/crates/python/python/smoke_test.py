"""Smoke test for the pymatchideal extension.

Build with `cargo build --release -p pymatchideal`, then run
`python3 crates/python/python/smoke_test.py` from the workspace root.
"""

import importlib.util
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[3]


def load():
    try:
        import pymatchideal  # noqa: F401
        return sys.modules["pymatchideal"]
    except ImportError:
        pass
    lib = ROOT / "target" / "release" / "libpymatchideal.so"
    tmp = pathlib.Path(tempfile.mkdtemp()) / "pymatchideal.so"
    shutil.copy(lib, tmp)
    spec = importlib.util.spec_from_file_location("pymatchideal", tmp)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def main():
    m = load()
    assert [m.count_matchings(n) for n in (2, 4, 6, 8)] == [1, 3, 15, 105]

    # x1_2 + x1_3 + x1_4 - 1 vanishes on every perfect matching of K_4.
    poly = "1 x1_2\n1 x1_3\n1 x1_4\n-1\n"
    cert = m.pm_derive(poly, 4)
    assert cert.startswith("CERT MATCH n=4")
    assert m.pm_verify(cert)
    try:
        m.pm_derive("1 x1_2\n", 4)
    except ValueError as e:
        assert "member" in str(e).lower() or "nonzero" in str(e).lower(), e
    else:
        raise AssertionError("non-member accepted")

    tour = m.tour_derive("1 y1_1\n1 y1_2\n1 y1_3\n-1\n", 3)
    assert m.tour_verify(tour)

    inst = "TSP n=3\n" + "".join(
        f"d {i} {j} {v}\n" for (i, j), v in {(1, 2): 1, (1, 3): 2, (2, 3): 3}.items() for i, j in ((i, j), (j, i))
    )
    assert m.tour_value(inst, [1, 2, 3]) == "6"
    basis, moments, constraints = m.lasserre_summary(inst, 2)
    assert basis == 10, basis
    assert moments > basis and constraints > 0
    print("pymatchideal smoke test ok:", basis, moments, constraints)


if __name__ == "__main__":
    main()
