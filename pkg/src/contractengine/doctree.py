"""Structural parsing of contract text into a section hierarchy.

Detection is purely pattern-based and deterministic: numbering cues take
precedence over heading cues, which take precedence over indentation.
Documents with fewer than two detected structural sections fall back to
flat fixed-size windowing.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

# ── Section cues, priority order: numbering > headings > indentation ── #

# "1.", "2.10", "1.1.3", optionally with trailing dot
_DOTTED_RE = re.compile(r"^(\d+(?:\.\d+)+\.?|\d+\.)(?=\s)")
# "Article 3", "Section 4.2"
_KEYWORD_RE = re.compile(r"^(Article|Section)\s+(\d+(?:\.\d+)*)\b", re.IGNORECASE)
# "(a)", "(iv)", "a)", also "(1)"
_PAREN_RE = re.compile(r"^\(?([a-z]|[0-9]{1,2}|[ivxl]{1,5})\)(?=\s)")
# "i.", "iv." — lowercase roman followed by a dot
_ROMAN_RE = re.compile(r"^([ivxl]{1,5})\.(?=\s)")
# markdown heading
_MD_HEADING_RE = re.compile(r"^(#{1,6})\s+(.*)")
# bullet list
_BULLET_RE = re.compile(r"^([-•*])(?=\s)")

_ROMAN_VALUES = {"i": 1, "v": 5, "x": 10, "l": 50}


class NodeKind(str, Enum):
    ROOT = "root"
    TITLE = "title"
    CLAUSE = "clause"
    PARAGRAPH = "paragraph"
    LIST_ITEM = "list_item"


class ParseMode(str, Enum):
    STRUCTURAL = "structural"
    FALLBACK_FLAT = "fallback_flat"


@dataclass(frozen=True)
class SectionNode:
    id: str
    kind: NodeKind
    label: str  # numbering or heading marker, "" when absent
    text: str  # the node's own text, excluding descendants
    span: tuple[int, int]  # half-open [start, end) into the source
    depth: int
    children: tuple[str, ...] = ()
    parent: Optional[str] = None


@dataclass
class DocumentTree:
    root: str
    nodes: dict[str, SectionNode]
    filename: str
    source_text: str
    summary: Optional[str] = None
    parse_mode: ParseMode = ParseMode.STRUCTURAL
    warnings: list[str] = field(default_factory=list)

    def node(self, node_id: str) -> SectionNode:
        return self.nodes[node_id]

    def document_order(self) -> list[SectionNode]:
        """All non-root nodes in document order (pre-order traversal)."""
        out: list[SectionNode] = []

        def visit(nid: str) -> None:
            node = self.nodes[nid]
            if node.kind is not NodeKind.ROOT:
                out.append(node)
            for cid in node.children:
                visit(cid)

        visit(self.root)
        return out

    def ancestors(self, node_id: str) -> list[SectionNode]:
        """Ancestors of a node from root-child down to its parent (root excluded)."""
        chain: list[SectionNode] = []
        cur = self.nodes[node_id].parent
        while cur is not None:
            node = self.nodes[cur]
            if node.kind is not NodeKind.ROOT:
                chain.append(node)
            cur = node.parent
        chain.reverse()
        return chain

    def descendants(self, node_id: str) -> list[SectionNode]:
        out: list[SectionNode] = []

        def visit(nid: str) -> None:
            for cid in self.nodes[nid].children:
                out.append(self.nodes[cid])
                visit(cid)

        visit(node_id)
        return out

    def to_json(self) -> str:
        """Stable serialization for golden tests."""
        nodes = []
        ordered = [self.nodes[self.root]] + self.document_order()
        for n in ordered:
            nodes.append(
                {
                    "id": n.id,
                    "kind": n.kind.value,
                    "label": n.label,
                    "span": [n.span[0], n.span[1]],
                    "depth": n.depth,
                    "parent": n.parent,
                }
            )
        payload = {
            "filename": self.filename,
            "parse_mode": self.parse_mode.value,
            "summary": self.summary,
            "nodes": nodes,
        }
        return json.dumps(payload, ensure_ascii=False, sort_keys=False)


@dataclass
class ParseOptions:
    numbering: bool = True
    headings: bool = True
    indentation: bool = True
    fallback_chunk_chars: int = 1000
    min_sections_for_structural: int = 2


@dataclass(frozen=True)
class SectionBoundary:
    span: tuple[int, int]
    kind: NodeKind
    label: str
    # structural nesting hint; smaller = shallower. None for paragraphs.
    level: Optional[int] = None
    indent: int = 0
    style: str = ""  # cue family: dotted / keyword / paren / roman / bullet / heading / caps


def normalize_ws(text: str) -> str:
    return " ".join(text.split())


def _roman_value(s: str) -> int:
    total, prev = 0, 0
    for ch in reversed(s.lower()):
        v = _ROMAN_VALUES.get(ch, 0)
        total = total - v if v < prev else total + v
        prev = max(prev, v)
    return total


def _is_caps_heading(line: str) -> bool:
    s = line.strip()
    if not (3 <= len(s) <= 80):
        return False
    letters = [c for c in s if c.isalpha()]
    if len(letters) < 3:
        return False
    return all(c.isupper() for c in letters) and not s.endswith(".")


def _match_cue(stripped: str, indent: int, options: ParseOptions):
    """Return (kind, label, level, style) if the line opens a section, else None."""
    if options.numbering:
        m = _DOTTED_RE.match(stripped)
        if m:
            label = m.group(1)
            components = [c for c in label.rstrip(".").split(".") if c]
            return NodeKind.CLAUSE, label, len(components), "dotted"
        m = _KEYWORD_RE.match(stripped)
        if m:
            components = m.group(2).split(".")
            return NodeKind.CLAUSE, m.group(0), len(components), "keyword"
        m = _ROMAN_RE.match(stripped)
        if m and _roman_value(m.group(1)) > 0:
            return NodeKind.LIST_ITEM, m.group(1) + ".", None, "roman"
        m = _PAREN_RE.match(stripped)
        if m:
            return NodeKind.LIST_ITEM, "(" + m.group(1) + ")", None, "paren"
        m = _BULLET_RE.match(stripped)
        if m:
            return NodeKind.LIST_ITEM, m.group(1), None, "bullet"
    if options.headings:
        m = _MD_HEADING_RE.match(stripped)
        if m:
            return NodeKind.TITLE, m.group(1), len(m.group(1)), "heading"
        if _is_caps_heading(stripped):
            return NodeKind.TITLE, "", 1, "caps"
    return None


def detect_sections(text: str, options: ParseOptions | None = None) -> list[SectionBoundary]:
    """Scan line starts for structural cues and emit ordered, non-overlapping
    boundaries covering all non-whitespace text.

    Text between cues (including any preamble before the first cue) becomes
    paragraph boundaries, split on blank lines.
    """
    options = options or ParseOptions()
    if not text.strip():
        return []

    # (offset, kind, label, level, indent, style) per opened section
    starts: list[tuple[int, NodeKind, str, Optional[int], int, str]] = []
    offset = 0
    in_paragraph = False
    for line in text.splitlines(keepends=True):
        stripped = line.lstrip()
        indent = len(line) - len(stripped)
        if not stripped.strip():
            in_paragraph = False  # blank line closes the current paragraph
            offset += len(line)
            continue
        cue = _match_cue(stripped.rstrip("\n"), indent, options)
        if cue is not None:
            kind, label, level, style = cue
            starts.append((offset + indent, kind, label, level, indent, style))
            in_paragraph = True
        elif not in_paragraph:
            starts.append((offset + indent, NodeKind.PARAGRAPH, "", None, indent, ""))
            in_paragraph = True
        offset += len(line)

    boundaries: list[SectionBoundary] = []
    end_of_text = len(text)
    for i, (start, kind, label, level, indent, style) in enumerate(starts):
        end = starts[i + 1][0] if i + 1 < len(starts) else end_of_text
        boundaries.append(
            SectionBoundary(span=(start, end), kind=kind, label=label, level=level, indent=indent, style=style)
        )
    return boundaries


def _numeric_tuple(label: str) -> Optional[tuple[int, ...]]:
    body = label.rstrip(".")
    m = re.match(r"^(?:Article|Section)\s+", body, re.IGNORECASE)
    if m:
        body = body[m.end():]
    if re.fullmatch(r"\d+(\.\d+)*", body):
        return tuple(int(p) for p in body.split("."))
    return None


def build_hierarchy(
    boundaries: list[SectionBoundary],
    text: str,
    filename: str = "",
    warnings: list[str] | None = None,
) -> DocumentTree:
    """Nest boundaries into a tree: each section becomes the child of the
    nearest preceding section of strictly shallower structural depth.

    Non-monotone numbering is attached as a sibling under the last coherent
    ancestor and recorded as a parse warning rather than failing.
    """
    warnings = warnings if warnings is not None else []
    nodes: dict[str, SectionNode] = {}
    root = SectionNode(
        id="n0000", kind=NodeKind.ROOT, label="", text="", span=(0, len(text)), depth=0
    )
    nodes[root.id] = root

    # stack entries: (node_id, kind, level, style, indent)
    stack: list[tuple[str, NodeKind, Optional[int], str, int]] = [
        (root.id, NodeKind.ROOT, 0, "", -1)
    ]
    last_clause_label: dict[str, str] = {}  # parent id -> last clause label seen

    def attach(node: SectionNode) -> SectionNode:
        parent_id = stack[-1][0]
        parent = nodes[parent_id]
        node = replace(node, parent=parent_id, depth=parent.depth + 1)
        nodes[node.id] = node
        nodes[parent_id] = replace(parent, children=parent.children + (node.id,))
        return node

    counter = 0
    for b in boundaries:
        counter += 1
        nid = f"n{counter:04d}"
        own_text = text[b.span[0]:b.span[1]].strip()
        node = SectionNode(
            id=nid, kind=b.kind, label=b.label, text=own_text, span=b.span, depth=0
        )

        if b.kind is NodeKind.TITLE:
            while stack[-1][1] is not NodeKind.ROOT and not (
                stack[-1][1] is NodeKind.TITLE and (stack[-1][2] or 0) < (b.level or 1)
            ):
                stack.pop()
            node = attach(node)
            stack.append((nid, b.kind, b.level, b.style, b.indent))
        elif b.kind is NodeKind.CLAUSE:
            while stack[-1][1] is NodeKind.PARAGRAPH or stack[-1][1] is NodeKind.LIST_ITEM or (
                stack[-1][1] is NodeKind.CLAUSE and (stack[-1][2] or 0) >= (b.level or 1)
            ):
                stack.pop()
            node = attach(node)
            # monotonicity check against the previous clause sibling
            parent_id = node.parent or root.id
            prev = last_clause_label.get(parent_id)
            if prev is not None:
                pt, nt = _numeric_tuple(prev), _numeric_tuple(b.label)
                if pt is not None and nt is not None and nt <= pt:
                    warnings.append(
                        f"non-monotone numbering: {b.label!r} after {prev!r}"
                    )
            last_clause_label[parent_id] = b.label
            stack.append((nid, b.kind, b.level, b.style, b.indent))
        elif b.kind is NodeKind.LIST_ITEM:
            # one deeper than the nearest numbered ancestor; consecutive items
            # of the same cue family are siblings
            while stack[-1][1] is NodeKind.PARAGRAPH or (
                stack[-1][1] is NodeKind.LIST_ITEM
                and (stack[-1][3] == b.style or stack[-1][4] >= b.indent)
            ):
                stack.pop()
            node = attach(node)
            stack.append((nid, b.kind, None, b.style, b.indent))
        else:  # paragraph: a leaf under the current section
            if stack[-1][1] is NodeKind.PARAGRAPH:
                stack.pop()
            node = attach(node)
            stack.append((nid, b.kind, None, "", b.indent))

    return DocumentTree(
        root=root.id,
        nodes=nodes,
        filename=filename,
        source_text=text,
        parse_mode=ParseMode.STRUCTURAL,
        warnings=warnings,
    )


def _fallback_tree(text: str, filename: str, window: int) -> DocumentTree:
    nodes: dict[str, SectionNode] = {}
    root = SectionNode(
        id="n0000", kind=NodeKind.ROOT, label="", text="", span=(0, len(text)), depth=0
    )
    children: list[str] = []
    counter = 0
    for start in range(0, len(text), window):
        chunk = text[start:start + window]
        if not chunk.strip():
            continue
        counter += 1
        nid = f"n{counter:04d}"
        nodes[nid] = SectionNode(
            id=nid,
            kind=NodeKind.PARAGRAPH,
            label="",
            text=chunk,
            span=(start, min(start + window, len(text))),
            depth=1,
            parent=root.id,
        )
        children.append(nid)
    nodes[root.id] = replace(root, children=tuple(children))
    return DocumentTree(
        root=root.id,
        nodes=nodes,
        filename=filename,
        source_text=text,
        parse_mode=ParseMode.FALLBACK_FLAT,
    )


def parse_document(
    raw: str, filename: str = "", options: ParseOptions | None = None
) -> DocumentTree:
    """Parse text into a structural tree, or fall back to flat fixed-size
    windows when fewer than two structural sections are detected."""
    options = options or ParseOptions()
    boundaries = detect_sections(raw, options)
    structural = [b for b in boundaries if b.kind is not NodeKind.PARAGRAPH]
    if len(structural) >= options.min_sections_for_structural:
        return build_hierarchy(boundaries, raw, filename=filename)
    return _fallback_tree(raw, filename, options.fallback_chunk_chars)


def summarize_document(tree: DocumentTree, chat_client) -> DocumentTree:
    """Populate the contract-level summary via one chat call.

    On upstream failure the error propagates and the tree is left unchanged.
    """
    head = tree.source_text[:4000]
    completion = chat_client.complete(
        [
            {
                "role": "system",
                "content": (
                    "You summarize contracts. Reply with a one-paragraph summary "
                    "of the document: parties, subject matter, and key obligations."
                ),
            },
            {"role": "user", "content": head},
        ],
        role="summarize",
    )
    summary = completion.strip()
    return DocumentTree(
        root=tree.root,
        nodes=tree.nodes,
        filename=tree.filename,
        source_text=tree.source_text,
        summary=summary or None,
        parse_mode=tree.parse_mode,
        warnings=list(tree.warnings),
    )


def llm_parse_sections(text: str, chat_client, options: ParseOptions | None = None) -> DocumentTree:
    """Zero-shot model-based parsing: one chat call proposing section
    boundaries as JSON; falls back to structural parsing when the completion
    cannot be used."""
    options = options or ParseOptions()
    completion = chat_client.complete(
        [
            {
                "role": "system",
                "content": (
                    "Split the document into sections. Reply with a JSON array of "
                    'objects {"start": int, "end": int, "kind": "title|clause|'
                    'paragraph|list_item", "label": str, "level": int|null}.'
                ),
            },
            {"role": "user", "content": text},
        ],
        role="llm_parse",
    )
    warnings: list[str] = []
    try:
        spec = json.loads(completion)
        boundaries = [
            SectionBoundary(
                span=(int(b["start"]), int(b["end"])),
                kind=NodeKind(b.get("kind", "paragraph")),
                label=str(b.get("label", "")),
                level=b.get("level"),
            )
            for b in spec
        ]
        if not boundaries:
            raise ValueError("empty boundary list")
    except (ValueError, KeyError, TypeError) as exc:
        warnings.append(f"model parse unusable ({exc}); structural fallback")
        tree = parse_document(text, options=options)
        tree.warnings.extend(warnings)
        return tree
    return build_hierarchy(boundaries, text, warnings=warnings)
