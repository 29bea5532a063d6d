from functools import lru_cache
from importlib.resources import files

from crnlyap.formats import certificate_from_document, read_json
from crnlyap.network import parse_network

CORPUS = files("crnlyap") / "corpus"


def corpus_path(name: str) -> str:
    return str(CORPUS / name)


def load(name: str):
    return parse_network((CORPUS / f"{name}.crn").read_text(), source=f"{name}.crn")


def load_cert(name: str, net):
    return certificate_from_document(read_json(corpus_path(f"{name}.json")), net)


def network_from_columns(alpha, beta, species=None):
    """Build a network from per-reaction reactant/product coefficient lists."""
    n = len(alpha[0]) if alpha else 0
    species = species or [f"X{i + 1}" for i in range(n)]

    def side(coefs):
        terms = [(f"{c} " if c > 1 else "") + species[i] for i, c in enumerate(coefs) if c]
        return " + ".join(terms) or "0"

    lines = ["species: " + " ".join(species)]
    lines += [f"{side(a)} -> {side(b)}" for a, b in zip(alpha, beta)]
    return parse_network("\n".join(lines))


def random_network_strategy(max_species=4, max_reactions=4, max_coef=2):
    from hypothesis import strategies as st

    @st.composite
    def build(draw):
        n = draw(st.integers(1, max_species))
        nu = draw(st.integers(1, max_reactions))
        alpha, beta = [], []
        for _ in range(nu):
            a = [draw(st.integers(0, max_coef)) for _ in range(n)]
            b = [0 if a[i] else draw(st.integers(0, max_coef)) for i in range(n)]
            if not any(a) and not any(b):
                b[draw(st.integers(0, n - 1))] = 1
            alpha.append(a)
            beta.append(b)
        return network_from_columns(alpha, beta)

    return build()


def random_network(rng, max_species=4, max_reactions=5):
    """Seeded random network without autocatalysis, from a ``random.Random``."""
    n = rng.randint(2, max_species)
    nu = rng.randint(2, max_reactions)
    alpha, beta = [], []
    for _ in range(nu):
        a = [rng.choice((0, 0, 1, 1, 2)) for _ in range(n)]
        b = [0 if a[i] else rng.choice((0, 0, 1, 1, 2)) for i in range(n)]
        if not any(a) and not any(b):
            b[rng.randrange(n)] = 1
        alpha.append(a)
        beta.append(b)
    return network_from_columns(alpha, beta)


@lru_cache(maxsize=None)
def certified_networks(count=50, seed=0):
    """First ``count`` random networks whose construction passes the full checker."""
    import random

    from crnlyap.construct import construct_any
    from crnlyap.network import positive_kernel_vector

    rng = random.Random(seed)
    found = []
    while len(found) < count:
        net = random_network(rng)
        if positive_kernel_vector(net.gamma, net.nu) is None:
            continue
        outcome = construct_any(net)
        if outcome.success and outcome.report.passed:
            found.append((net, outcome.certificate))
    return tuple(found)
