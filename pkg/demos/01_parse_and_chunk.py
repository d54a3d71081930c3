"""
Parsing a contract into a section tree and a contextual chunk set
=================================================================

Walks a small services agreement through structural parsing and the
three-way chunk expansion, printing what the engine sees at each step.
Run with: python3 demos/01_parse_and_chunk.py
"""

from contractengine import ChunkKind, assemble_chunk_set, make_chunks, parse_document

CONTRACT = """\
SERVICES AGREEMENT

This agreement is made between the Client and the Provider.

1. Scope of services
1.1 The provider delivers monthly analytics reports to the client.
1.2 Additional work requires a signed statement of work.
(a) Each statement of work states fees and milestones.
(b) Milestones bind both parties once countersigned.
2. Payment
2.1 Invoices are payable within thirty days of receipt.
3. Termination
3.1 Either party may terminate upon sixty days written notice.
"""

# structural parsing: numbering beats headings beats indentation
tree = parse_document(CONTRACT, filename="services.txt")
print(f"parse mode: {tree.parse_mode.value}")
for node in tree.document_order():
    indent = "  " * (node.depth - 1)
    first_line = node.text.splitlines()[0] if node.text else ""
    print(f"{indent}{node.kind.value:<10} [{node.span[0]:>4}:{node.span[1]:<4}] {first_line}")

# each node yields three chunk flavors; duplicates are removed afterwards
print("\nancestor-aware chunk for clause 1.2(a):")
chunk = next(c for c in make_chunks(tree, ChunkKind.ANCESTOR_AWARE) if "(a)" in c.text)
print(chunk.text)

survivors = assemble_chunk_set(tree)
print(f"\nchunk set after dedup: {len(survivors)} chunks")
for c in survivors[:5]:
    print(f"  {c.id:<40} core={c.core_span}")
