"""Smoke test for the alterlink Python extension.

Uses an installed `alterlink` module when present (e.g. after
`maturin develop -m crates/python/Cargo.toml`), otherwise loads the library
built by `cargo build --release -p alterlink-py`.
"""

import importlib.util
import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import alterlink

        return alterlink
    except ImportError:
        pass
    built = next(
        (p for p in (ROOT / "target" / "release" / n for n in ("libalterlink.so", "libalterlink.dylib", "alterlink.dll")) if p.exists()),
        None,
    )
    if built is None:
        sys.exit("alterlink extension not found; run `cargo build --release -p alterlink-py` first")
    ext = ".pyd" if built.suffix == ".dll" else ".so"
    dest = pathlib.Path(tempfile.mkdtemp()) / f"alterlink{ext}"
    shutil.copy(built, dest)
    spec = importlib.util.spec_from_file_location("alterlink", dest)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    al = load()

    model = al.GatModel(4, seed=1)
    assert model.widths == [128, 128, 7], model.widths

    features = [[math.sin(i + k) for k in range(4)] for i in range(6)]
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]
    z = model.embed(features, edges)
    assert len(z) == 6 and len(z[0]) == 7

    small = al.GatModel(4, hidden_channels=3, heads=2, layers=2, out_channels=3, seed=2)
    err = small.grad_check(features, edges, [(0, 1), (0, 5), (2, 3)], [1.0, 0.0, 1.0])
    assert err < 1e-4, err

    m = al.classification_metrics([True, False], [True, True])
    assert (m["precision"], m["recall"], m["accuracy"]) == (1.0, 0.5, 0.5)
    assert abs(m["f1"] - 2 / 3) < 1e-12

    assert al.auc([0.9, 0.1, 0.5, 0.5], [True, False, True, False]) == 0.875
    tau, f1 = al.calibrate_threshold([0.1, 0.2, 0.8, 0.9], [True, True, False, False])
    assert f1 == 1.0 and 0.2 < tau <= 0.8

    emb = [[0.0, 0.0], [0.1, 0.0], [3.0, 0.0]]
    assert al.resolve_pair(emb, 0, 1, 2)["chosen"] == 1
    assert al.resolve_pair(emb, 0, 2, 1)["chosen"] == 1
    assert al.resolve_existence(emb, 0, 2, tau=1.0)["exists"] is False

    before = small.param_hash()
    e = al.explain_link(small, features, edges, 0, 1, feature_names=["a", "b", "c", "d"])
    assert small.param_hash() == before
    assert all(0.0 <= w <= 1.0 for w in e["feature_mask"] + e["edge_mask"])

    with tempfile.TemporaryDirectory() as tmp:
        summary, files = al.run("synth", out=tmp, seed=3)
        assert "synthesized" in summary and files
        config = pathlib.Path(tmp) / "config.toml"
        al.run("train", config=str(config), out=tmp)
        ck = al.Checkpoint.load(str(pathlib.Path(tmp) / "checkpoint.json"))
        assert ck.threshold is not None and ck.n_nodes > 0
        summary, _ = al.run("resolve", config=str(config), out=tmp)
        assert "accuracy" in summary
        try:
            al.run("risk", config=str(config), out=str(pathlib.Path(tmp) / "empty"))
        except al.AlterlinkError as exc:
            assert "error[missing-input]" in str(exc)
        else:
            raise AssertionError("risk without resolved edges should fail")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
