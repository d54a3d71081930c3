import random

import pytest

from contractengine.doctree import parse_document


WORDS = (
    "party seller buyer goods payment delivery notice term breach remedy "
    "confidential information disclosure liability indemnity warranty "
    "assignment governing law termination renewal obligation consideration"
).split()


def random_sentence(rng: random.Random, n_words: int = 8) -> str:
    return " ".join(rng.choice(WORDS) for _ in range(n_words)).capitalize() + "."


def synthetic_contract(seed: int) -> str:
    """Randomized numbered contract with titles, clauses, sub-clauses,
    paragraphs, and list items."""
    rng = random.Random(seed)
    lines = ["MASTER SERVICES AGREEMENT", ""]
    lines.append(random_sentence(rng, 12))
    lines.append("")
    for major in range(1, rng.randint(3, 6)):
        lines.append(f"{major}. {random_sentence(rng, 4)}")
        for minor in range(1, rng.randint(2, 5)):
            lines.append(f"{major}.{minor} {random_sentence(rng, 10)}")
            if rng.random() < 0.4:
                for item in "abc"[: rng.randint(1, 3)]:
                    lines.append(f"({item}) {random_sentence(rng, 6)}")
        if rng.random() < 0.3:
            lines.append("")
            lines.append(random_sentence(rng, 9))
            lines.append("")
    return "\n".join(lines) + "\n"


@pytest.fixture
def structured_tree():
    text = (
        "NON-DISCLOSURE AGREEMENT\n"
        "1. Definitions\n"
        "1.1 Seller means the party selling goods under this agreement.\n"
        "1.2 Buyer means the party purchasing goods under this agreement.\n"
        "2. Term\n"
        "\n"
        "This agreement remains in force for two years from signature.\n"
        "\n"
        "3. Confidentiality\n"
        "3.1 The receiving party shall keep all confidential information secret.\n"
        "(a) except as required by law\n"
        "(b) except with prior written consent\n"
    )
    return parse_document(text, filename="nda.txt")
