import pytest

from contractengine.doctree import (
    DocumentTree,
    NodeKind,
    ParseMode,
    ParseOptions,
    build_hierarchy,
    detect_sections,
    llm_parse_sections,
    normalize_ws,
    parse_document,
    summarize_document,
)
from contractengine.errors import UpstreamError
from contractengine.gateway import CostLedger, RuleChatClient, ScriptedChatClient

from conftest import synthetic_contract


def test_empty_document_yields_no_boundaries():
    assert detect_sections("") == []
    assert detect_sections("   \n\n  ") == []


def test_numbered_boundaries_and_labels():
    text = "1. Definitions\n1.1 Seller means the seller.\n2. Term\n"
    bs = detect_sections(text)
    assert [b.label for b in bs] == ["1.", "1.1", "2."]
    assert all(b.kind is NodeKind.CLAUSE for b in bs)
    # ascending, non-overlapping, covering all non-whitespace text
    for a, b in zip(bs, bs[1:]):
        assert a.span[1] <= b.span[0]
    covered = "".join(text[s:e] for s, e in (b.span for b in bs))
    assert normalize_ws(covered) == normalize_ws(text)


def test_clause_under_title():
    text = "DEFINITIONS\n1.1 Seller means the party selling.\n1.2 Buyer means the party buying.\n"
    tree = parse_document(text)
    nodes = tree.document_order()
    assert nodes[0].kind is NodeKind.TITLE
    clause = nodes[1]
    assert clause.kind is NodeKind.CLAUSE
    assert tree.nodes[clause.parent].kind is NodeKind.TITLE


def test_hierarchy_nesting():
    text = "1. Definitions\n1.1 Seller means X.\n1.2 Buyer means Y.\n2. Term\n"
    tree = build_hierarchy(detect_sections(text), text)
    root = tree.nodes[tree.root]
    top = [tree.nodes[c] for c in root.children]
    assert [n.label for n in top] == ["1.", "2."]
    children = [tree.nodes[c].label for c in top[0].children]
    assert children == ["1.1", "1.2"]
    assert all(tree.nodes[c].depth == 2 for c in top[0].children)


def test_single_boundary_tree():
    text = "Just one paragraph of text."
    bs = detect_sections(text)
    tree = build_hierarchy(bs, text)
    root = tree.nodes[tree.root]
    assert len(root.children) == 1
    assert tree.nodes[root.children[0]].depth == 1


def test_all_kinds_representable(structured_tree):
    kinds = {n.kind for n in structured_tree.document_order()}
    assert {NodeKind.TITLE, NodeKind.CLAUSE, NodeKind.PARAGRAPH, NodeKind.LIST_ITEM} <= kinds


def test_list_items_one_deeper_than_numbered_ancestor(structured_tree):
    items = [n for n in structured_tree.document_order() if n.kind is NodeKind.LIST_ITEM]
    assert items
    for item in items:
        parent = structured_tree.nodes[item.parent]
        assert parent.kind is NodeKind.CLAUSE
        assert item.depth == parent.depth + 1


def test_non_monotone_numbering_warns_not_fails():
    text = "2. Term\nSome text.\n1. Definitions\nOther text.\n"
    tree = parse_document(text)
    assert tree.parse_mode is ParseMode.STRUCTURAL
    assert any("non-monotone" in w for w in tree.warnings)
    assert len(tree.document_order()) == 2


def test_fallback_flat_windows():
    tree = parse_document("x" * 2500)
    assert tree.parse_mode is ParseMode.FALLBACK_FLAT
    sizes = [len(tree.nodes[c].text) for c in tree.nodes[tree.root].children]
    assert sizes == [1000, 1000, 500]


def test_fallback_window_size_configurable():
    tree = parse_document("y" * 250, options=ParseOptions(fallback_chunk_chars=100))
    sizes = [len(tree.nodes[c].text) for c in tree.nodes[tree.root].children]
    assert sizes == [100, 100, 50]


def test_empty_string_root_only():
    tree = parse_document("")
    assert tree.parse_mode is ParseMode.FALLBACK_FLAT
    assert list(tree.nodes) == [tree.root]


def test_structured_corpus_uses_structural_mode(structured_tree):
    assert structured_tree.parse_mode is ParseMode.STRUCTURAL


@pytest.mark.parametrize("seed", range(20))
def test_roundtrip_on_synthetic_contracts(seed):
    text = synthetic_contract(seed)
    tree = parse_document(text, filename=f"doc{seed}.txt")
    concatenated = " ".join(n.text for n in tree.document_order())
    assert normalize_ws(concatenated) == normalize_ws(text)


def test_tree_invariants_on_synthetic_contracts():
    for seed in range(10):
        tree = parse_document(synthetic_contract(seed))
        root = tree.nodes[tree.root]
        assert root.depth == 0 and root.label == ""
        for node in tree.document_order():
            parent = tree.nodes[node.parent]
            assert node.depth == parent.depth + 1
        # sibling spans pairwise disjoint and ascending
        for node in [root] + tree.document_order():
            child_spans = [tree.nodes[c].span for c in node.children]
            for a, b in zip(child_spans, child_spans[1:]):
                assert a[1] <= b[0]


def test_determinism():
    text = synthetic_contract(7)
    a = parse_document(text, filename="a.txt").to_json()
    b = parse_document(text, filename="a.txt").to_json()
    assert a == b


def test_serialization_fields(structured_tree):
    import json

    payload = json.loads(structured_tree.to_json())
    assert payload["parse_mode"] == "structural"
    node = payload["nodes"][1]
    assert list(node) == ["id", "kind", "label", "span", "depth", "parent"]


def test_summarize_sets_summary_and_one_ledger_record(structured_tree):
    ledger = CostLedger()
    client = ScriptedChatClient(["NDA between A and B"], ledger=ledger)
    before = ledger.count()
    tree = summarize_document(structured_tree, client)
    assert tree.summary == "NDA between A and B"
    assert ledger.count() - before == 1
    assert ledger.records[-1].role == "summarize"


def test_summarize_error_leaves_tree_unchanged(structured_tree):
    client = ScriptedChatClient([])  # exhausted -> UpstreamError
    with pytest.raises(UpstreamError):
        summarize_document(structured_tree, client)
    assert structured_tree.summary is None


def test_llm_parse_uses_model_boundaries():
    text = "alpha beta\ngamma delta\n"
    script = (
        '[{"start": 0, "end": 11, "kind": "clause", "label": "1.", "level": 1},'
        ' {"start": 11, "end": 22, "kind": "clause", "label": "2.", "level": 1}]'
    )
    ledger = CostLedger()
    tree = llm_parse_sections(text, ScriptedChatClient([script], ledger=ledger))
    assert [n.label for n in tree.document_order()] == ["1.", "2."]
    assert ledger.count("llm_parse") == 1


def test_llm_parse_falls_back_on_garbage():
    tree = llm_parse_sections("1. One\n2. Two\n", ScriptedChatClient(["not json"]))
    assert [n.label for n in tree.document_order()] == ["1.", "2."]
    assert any("fallback" in w for w in tree.warnings)
