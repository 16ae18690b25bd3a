#!/usr/bin/env python3
"""Smoke test for the molfusion_py extension module.

Build the module first:

    cargo build -p molfusion-py --release --features extension-module

then run this script from the repository root.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_module():
    candidates = [
        REPO / "target" / "release" / "libmolfusion_py.so",
        REPO / "target" / "debug" / "libmolfusion_py.so",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit(
            "libmolfusion_py.so not found; build with "
            "`cargo build -p molfusion-py --release --features extension-module`"
        )
    stage = Path(tempfile.mkdtemp(prefix="molfusion_py_"))
    shutil.copy(built, stage / "molfusion_py.so")
    sys.path.insert(0, str(stage))
    import molfusion_py

    return molfusion_py


def main():
    mf = import_module()

    mol = mf.parse_smiles("CC(=O)O")
    assert mol["atom_count"] == 4
    assert mol["bond_count"] == 3
    assert [a[0] for a in mol["atoms"]] == ["C", "C", "O", "O"]

    try:
        mf.parse_smiles("C(")
        raise AssertionError("expected a parse error")
    except ValueError:
        pass

    fp_a = mf.morgan_fingerprint("OCC")
    fp_b = mf.morgan_fingerprint("CCO")
    assert fp_a == fp_b, "spelling must not change the fingerprint"
    assert mf.tanimoto("CCO", "CCO") == 1.0
    assert 0.0 <= mf.tanimoto("CCO", "c1ccccc1") < 1.0

    matrix = mf.similarity_matrix(["CCO", "CCN", "CCO"])
    assert matrix[0][2] == 1.0 and matrix[0][0] == 1.0
    assert matrix[0][1] == matrix[1][0]

    assert mf.scaffold_key("CCO") == ""
    assert mf.scaffold_key("c1ccccc1C") == mf.scaffold_key("c1ccccc1")
    train, valid, test = mf.scaffold_split(
        ["CCO", "CCN", "CCC", "c1ccccc1", "C1CCCCC1", "CC", "CO", "CN", "CS", "CCS"]
    )
    assert sorted(train + valid + test) == list(range(10))

    assert mf.roc_auc([0.9, 0.1], [1, 0]) == 1.0
    assert mf.roc_auc([0.5, 0.5], [1, 0]) == 0.5
    assert math.isclose(mf.rmse([0.0, 0.0], [3.0, 4.0]), math.sqrt(12.5))

    corpus = [
        "CCO", "CC(=O)O", "c1ccccc1", "CCN", "CCCl", "CC(C)O",
        "C=CC", "CCOC", "CNC", "c1ccncc1", "CCS", "CC#N",
    ]
    model = mf.Model.train(corpus, epochs=3, d_model=16, d_shared=16, seed=7)
    s_vec, g_vec = model.encode("CCO")
    assert len(s_vec) == model.d_shared and len(g_vec) == model.d_shared

    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "model.ckpt"
        model.save(path)
        reloaded = mf.Model.load(path)
        s2, g2 = reloaded.encode("CCO")
        assert s_vec == s2 and g_vec == g2, "reload must be bit-exact"

    print("smoke test passed")


if __name__ == "__main__":
    main()
