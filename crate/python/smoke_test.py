"""Smoke test for the layoutgnn_py extension module.

Build and run from the repository root:

    cargo build -p layoutgnn-py --release --features extension-module
    cp target/release/liblayoutgnn_py.so python/layoutgnn_py.so
    python3 python/smoke_test.py
"""

import json

import layoutgnn_py as lg


def main():
    corpus = lg.Corpus.synthetic(3, docs=10, pages=2, objects=8)
    assert len(corpus) == 10
    assert corpus.sources() == ["SYNTH"]
    again = lg.Corpus.from_json(corpus.to_json())
    assert again.doc_ids() == corpus.doc_ids()

    text = lg.Embeddings.synthetic(corpus, "text", 16, 3, 1.0)
    vision = lg.Embeddings.synthetic(corpus, "vision", 8, 3, 1.0)
    assert text.dim == 16 and vision.modality == "vision"
    assert text.missing(corpus) == []
    copy = lg.Embeddings.from_bytes(text.to_bytes(), "text")
    first = corpus.pages()[0]
    assert len(copy) == len(text)

    doc_id, page_index, n = first
    edges = lg.page_edges(corpus, doc_id, page_index, "k-closest:4")
    assert all(i < j < n for i, j in edges)
    assert len(lg.page_edges(corpus, doc_id, page_index, "complete")) == n * (n - 1) // 2

    folds = lg.make_splits(corpus, "SYNTH", 0)
    assert len(folds) == 5
    assert sorted(d for _, test in folds for d in test) == sorted(corpus.doc_ids())

    m = lg.fold_metrics([0, 1, 1, 3], [0, 1, 2, 3])
    assert m["overall"] == 0.75 and m["identifier"] == 1.0 and m["summary"] == 0.0

    config = {
        "source_id": "SYNTH",
        "framework": "dual",
        "backbone_text": "sage",
        "backbone_vision": "gat",
        "epochs": 5,
        "hidden": 16,
        "head_hidden": 8,
    }
    per_fold, csv = lg.run_experiment(json.dumps(config), corpus, text, vision)
    assert len(per_fold) == 5
    assert all(0.0 <= f["overall"] <= 1.0 for f in per_fold)
    report = lg.render_report(csv)
    assert "Dual" in report

    try:
        lg.Embeddings.from_bytes(b"nope", "text")
    except ValueError:
        pass
    else:
        raise AssertionError("bad EMB1 bytes accepted")

    print("smoke test passed:", ", ".join(f"{f['overall']:.3f}" for f in per_fold))


if __name__ == "__main__":
    main()
