"""Contracts, canonical contract spaces and extension relations.

A contract maps each message of a finite alphabet to a nonempty subset of
the owner's actions. Subsets are stored as bit masks over action indices.
Messages are small tuples so that canonical classes carry their payload:

* ``("y", a)``          menu message naming action ``a``
* ``("E", mask)``       plain subset message
* ``("R", mask, a)``    subset with a recommended action ``a``
* ``("m", name)``       opaque message of a general contract
"""

from __future__ import annotations

import itertools
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence

Token = tuple


class ContractError(ValueError):
    """Malformed contract or contract space."""


class CapError(ContractError):
    """A space is too large to enumerate without an explicit cap."""

    def __init__(self, message: str, required: int | None = None) -> None:
        super().__init__(message)
        self.required = required


# -- subsets as masks -------------------------------------------------------------


def mask_of(actions: Iterable[int]) -> int:
    m = 0
    for a in actions:
        m |= 1 << a
    return m


def members(mask: int) -> tuple[int, ...]:
    out = []
    a = 0
    while mask:
        if mask & 1:
            out.append(a)
        mask >>= 1
        a += 1
    return tuple(out)


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def subset_masks(n: int) -> list[int]:
    """Nonempty subsets of ``range(n)``, by size then lexicographically."""
    return [mask_of(s) for r in range(1, n + 1) for s in itertools.combinations(range(n), r)]


def recommendation_messages(n: int) -> list[Token]:
    """All ``[E, y]`` with ``y`` in ``E``; there are ``n * 2**(n-1)`` of them."""
    return [("R", E, y) for E in subset_masks(n) for y in members(E)]


def universal_alphabet(n: int) -> tuple[Token, ...]:
    """Every plain-subset and recommendation message (the alphabet of constants)."""
    return tuple([("E", E) for E in subset_masks(n)] + recommendation_messages(n))


# -- contracts ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Contract:
    """A total map from an ordered alphabet to nonempty action subsets.

    Equality ignores ``kind``: two contracts are the same map iff owner,
    alphabet and images agree.
    """

    owner: int
    alphabet: tuple[Token, ...]
    images: tuple[int, ...]
    kind: str = "general"
    _lookup: dict = field(default=None, repr=False)
    _hash: int = field(default=0, repr=False)

    def __post_init__(self) -> None:
        if len(self.alphabet) != len(self.images):
            raise ContractError("alphabet and images differ in length")
        if not self.alphabet:
            raise ContractError("contract alphabet is empty")
        if any(m <= 0 for m in self.images):
            raise ContractError("contract images must be nonempty")
        lookup = {m: i for i, m in enumerate(self.alphabet)}
        if len(lookup) != len(self.alphabet):
            raise ContractError("duplicate messages in contract alphabet")
        object.__setattr__(self, "_lookup", lookup)
        object.__setattr__(self, "_hash", hash((self.owner, self.alphabet, self.images)))

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Contract):
            return NotImplemented
        return (
            self._hash == other._hash
            and self.owner == other.owner
            and self.images == other.images
            and self.alphabet == other.alphabet
        )

    def __hash__(self) -> int:
        return self._hash

    def __call__(self, message: Token) -> int:
        try:
            return self.images[self._lookup[message]]
        except KeyError:
            raise ContractError(f"message {message!r} is not in the alphabet") from None

    def accepts(self, message: Token) -> bool:
        return message in self._lookup

    def index(self, message: Token) -> int:
        return self._lookup[message]

    @property
    def image_set(self) -> frozenset[int]:
        return frozenset(self.images)

    @property
    def delegated(self) -> bool:
        return all(popcount(m) == 1 for m in self.images)

    def fibers(self) -> Counter:
        return Counter(self.images)

    def messages_for(self, mask: int) -> list[Token]:
        return [m for m, img in zip(self.alphabet, self.images) if img == mask]

    def __lt__(self, other: Contract) -> bool:
        return (self.owner, self.alphabet, self.images) < (other.owner, other.alphabet, other.images)


def menu(owner: int, items: Iterable[int]) -> Contract:
    items = sorted(set(items))
    if not items:
        raise ContractError("a menu needs at least one action")
    return Contract(owner, tuple(("y", a) for a in items), tuple(1 << a for a in items), "menu")


def rec_contract(owner: int, K: Iterable[Token]) -> Contract:
    K = sorted(set(K), key=_token_order)
    if not K:
        raise ContractError("K must be nonempty")
    for tok in K:
        if tok[0] != "R" or not (tok[1] >> tok[2]) & 1:
            raise ContractError(f"{tok!r} is not a recommendation message")
    return Contract(owner, tuple(K), tuple(tok[1] for tok in K), "rec")


def full_rec_contract(owner: int, E: int, L: Iterable[int]) -> Contract:
    L = sorted(set(L), key=_mask_order)
    if E <= 0 or any(m <= 0 for m in L):
        raise ContractError("menus must be nonempty")
    if E in L:
        raise ContractError("the recommended menu E may not also appear in L")
    alphabet = tuple(("E", m) for m in L) + tuple(("R", E, y) for y in members(E))
    images = tuple(L) + tuple(E for _ in members(E))
    return Contract(owner, alphabet, images, "full_rec")


def constant_contract(owner: int, y: int, n_actions: int) -> Contract:
    alphabet = universal_alphabet(n_actions)
    return Contract(owner, alphabet, tuple(1 << y for _ in alphabet), "const")


def general_contract(owner: int, mapping: Mapping[Any, int] | Sequence[tuple[Any, int]]) -> Contract:
    items = list(mapping.items()) if isinstance(mapping, Mapping) else list(mapping)
    alphabet = tuple(("m", name) for name, _ in items)
    return Contract(owner, alphabet, tuple(mask for _, mask in items), "general")


def _mask_order(mask: int) -> tuple:
    return (popcount(mask), members(mask))


def _token_order(tok: Token) -> tuple:
    kind = tok[0]
    if kind == "y":
        return (0, tok[1])
    if kind == "E":
        return (1, _mask_order(tok[1]))
    if kind == "R":
        return (2, _mask_order(tok[1]), tok[2])
    return (3, str(tok[1]))


def token_order(tok: Token) -> tuple:
    """Deterministic order used for every lexicographic selection."""
    return _token_order(tok)


# -- rendering -------------------------------------------------------------------------


def subset_str(mask: int, labels: Sequence) -> str:
    return "{" + ",".join(str(labels[a]) for a in members(mask)) + "}"


def token_str(tok: Token, labels: Sequence) -> str:
    kind = tok[0]
    if kind == "y":
        return str(labels[tok[1]])
    if kind == "E":
        return subset_str(tok[1], labels)
    if kind == "R":
        return f"[{subset_str(tok[1], labels)},{labels[tok[2]]}]"
    return str(tok[1])


def contract_str(c: Contract, labels: Sequence) -> str:
    if c.kind == "const":
        return f"const{{{labels[members(c.images[0])[0]]}}}"
    body = ", ".join(f"{token_str(m, labels)}->{subset_str(img, labels)}" for m, img in zip(c.alphabet, c.images))
    return f"{c.kind}({body})"


def contract_to_literal(c: Contract, labels: Sequence) -> dict:
    """File-format literal for a contract."""
    if c.kind == "menu":
        return {"class": "menu", "items": [labels[tok[1]] for tok in c.alphabet]}
    if c.kind == "rec":
        return {"class": "rec", "K": [[[labels[a] for a in members(tok[1])], labels[tok[2]]] for tok in c.alphabet]}
    if c.kind == "full_rec":
        E = next(tok[1] for tok in c.alphabet if tok[0] == "R")
        L = [tok[1] for tok in c.alphabet if tok[0] == "E"]
        return {
            "class": "full_rec",
            "E": [labels[a] for a in members(E)],
            "L": [[labels[a] for a in members(m)] for m in L],
        }
    if c.kind == "const":
        return {"class": "const", "y": labels[members(c.images[0])[0]]}
    return {
        "class": "general",
        "map": {token_str(tok, labels): [labels[a] for a in members(img)] for tok, img in zip(c.alphabet, c.images)},
    }


def contract_from_literal(owner: int, data: Mapping, labels: Sequence) -> Contract:
    def idx(label: Any) -> int:
        for i, existing in enumerate(labels):
            if existing == label or str(existing) == str(label):
                return i
        raise ContractError(f"unknown action {label!r}")

    def mask(items: Iterable) -> int:
        return mask_of(idx(a) for a in items)

    try:
        cls = data["class"]
        if cls == "menu":
            return menu(owner, [idx(a) for a in data["items"]])
        if cls == "rec":
            return rec_contract(owner, [("R", mask(E), idx(y)) for E, y in data["K"]])
        if cls == "full_rec":
            return full_rec_contract(owner, mask(data["E"]), [mask(L) for L in data.get("L", [])])
        if cls == "const":
            return constant_contract(owner, idx(data["y"]), len(labels))
        if cls == "general":
            return general_contract(owner, [(name, mask(img)) for name, img in data["map"].items()])
    except (KeyError, TypeError) as exc:
        raise ContractError(f"malformed contract literal {data!r}") from exc
    raise ContractError(f"unknown contract class {data.get('class')!r}")


# -- generators ---------------------------------------------------------------------


def gen_menus(owner: int, n: int) -> list[Contract]:
    return [menu(owner, members(m)) for m in subset_masks(n)]


def gen_R_space(owner: int, n: int, cap: int | None = None, limit: int = 1 << 20) -> Iterator[Contract]:
    """Contracts for every nonempty K of recommendation messages, |K| <= cap."""
    msgs = recommendation_messages(n)
    top = len(msgs) if cap is None else min(cap, len(msgs))
    total = sum(math.comb(len(msgs), r) for r in range(1, top + 1))
    if cap is None and total > limit:
        required = max(r for r in range(1, len(msgs) + 1) if sum(math.comb(len(msgs), s) for s in range(1, r + 1)) <= limit)
        raise CapError(
            f"C^R has {total} contracts for {n} actions; pass a cap on |K| (largest within limit: {required})",
            required,
        )
    for r in range(1, top + 1):
        for K in itertools.combinations(msgs, r):
            yield Contract(owner, K, tuple(tok[1] for tok in K), "rec")


def gen_F_space(owner: int, n: int) -> Iterator[Contract]:
    subsets = subset_masks(n)
    for E in subsets:
        rest = [m for m in subsets if m != E]
        for r in range(len(rest) + 1):
            for L in itertools.combinations(rest, r):
                yield full_rec_contract(owner, E, L)


def gen_Fstar_space(owner: int, n: int) -> Iterator[Contract]:
    yield from gen_F_space(owner, n)
    for y in range(n):
        yield constant_contract(owner, y, n)


def general_names(k: int, names: Sequence[str] | None = None) -> tuple[str, ...]:
    names = list(names or [])
    i = 1
    while len(names) < k:
        cand = f"m{i}"
        if cand not in names:
            names.append(cand)
        i += 1
    return tuple(names[:k])


def gen_general_space(owner: int, n: int, k: int, names: Sequence[str] | None = None, delegated: bool = False) -> Iterator[Contract]:
    names = general_names(k, names)
    alphabet = tuple(("m", name) for name in names)
    choices = [1 << a for a in range(n)] if delegated else subset_masks(n)
    for images in itertools.product(choices, repeat=k):
        yield Contract(owner, alphabet, images, "general")


# -- spaces -----------------------------------------------------------------------------


class ContractSpace:
    """A per-principal family of contracts with streaming enumeration."""

    tag = "?"

    def __init__(self, n_actions: Sequence[int]) -> None:
        self.n_actions = tuple(n_actions)

    def iter(self, j: int) -> Iterator[Contract]:
        raise NotImplementedError

    def contains(self, c: Contract) -> bool:
        raise NotImplementedError

    def size(self, j: int) -> int:
        return sum(1 for _ in self.iter(j))

    def label(self) -> str:
        return self.tag

    def caps(self) -> dict:
        return {}

    def __repr__(self) -> str:
        return f"<{self.label()}>"


class MenuSpace(ContractSpace):
    tag = "P"

    def iter(self, j: int) -> Iterator[Contract]:
        return iter(gen_menus(j, self.n_actions[j]))

    def contains(self, c: Contract) -> bool:
        return c.kind == "menu" and c == menu(c.owner, [tok[1] for tok in c.alphabet])

    def size(self, j: int) -> int:
        return 2 ** self.n_actions[j] - 1


class RecSpace(ContractSpace):
    tag = "R"

    def __init__(self, n_actions: Sequence[int], cap: int | None = None) -> None:
        super().__init__(n_actions)
        self.cap = cap

    def iter(self, j: int) -> Iterator[Contract]:
        return gen_R_space(j, self.n_actions[j], self.cap)

    def contains(self, c: Contract) -> bool:
        if c.kind != "rec":
            return False
        if self.cap is not None and len(c.alphabet) > self.cap:
            return False
        return all(tok[0] == "R" and img == tok[1] for tok, img in zip(c.alphabet, c.images))

    def size(self, j: int) -> int:
        m = self.n_actions[j] * 2 ** (self.n_actions[j] - 1)
        top = m if self.cap is None else min(m, self.cap)
        return sum(math.comb(m, r) for r in range(1, top + 1))

    def label(self) -> str:
        return "R" if self.cap is None else f"R(cap={self.cap})"

    def caps(self) -> dict:
        return {} if self.cap is None else {"R_cap": self.cap}


class FullRecSpace(ContractSpace):
    tag = "F"

    def iter(self, j: int) -> Iterator[Contract]:
        return gen_F_space(j, self.n_actions[j])

    def contains(self, c: Contract) -> bool:
        return c.kind == "full_rec"

    def size(self, j: int) -> int:
        n = self.n_actions[j]
        return (2**n - 1) * 2 ** (2**n - 2)


class FullRecStarSpace(ContractSpace):
    tag = "F*"

    def iter(self, j: int) -> Iterator[Contract]:
        return gen_Fstar_space(j, self.n_actions[j])

    def contains(self, c: Contract) -> bool:
        return c.kind in ("full_rec", "const") and (c.kind != "const" or len(c.alphabet) == len(universal_alphabet(self.n_actions[c.owner])))

    def size(self, j: int) -> int:
        n = self.n_actions[j]
        return (2**n - 1) * 2 ** (2**n - 2) + n


class GeneralSpace(ContractSpace):
    """Every map from a fixed k-message alphabet (the C^A(k) truncation)."""

    tag = "A"

    def __init__(self, n_actions: Sequence[int], k: int, names: Sequence[str] | None = None, delegated: bool = False) -> None:
        super().__init__(n_actions)
        if k < 1:
            raise ContractError("alphabet size k must be positive")
        self.k = k
        self.names = general_names(k, names)
        self.delegated = delegated
        self.alphabet = tuple(("m", name) for name in self.names)

    def iter(self, j: int) -> Iterator[Contract]:
        return gen_general_space(j, self.n_actions[j], self.k, self.names, self.delegated)

    def contains(self, c: Contract) -> bool:
        if c.alphabet != self.alphabet:
            return False
        return not self.delegated or c.delegated

    def size(self, j: int) -> int:
        base = self.n_actions[j] if self.delegated else 2 ** self.n_actions[j] - 1
        return base**self.k

    def make(self, j: int, images: Sequence[int]) -> Contract:
        return Contract(j, self.alphabet, tuple(images), "general")

    def constant(self, j: int, y: int) -> Contract:
        return self.make(j, [1 << y] * self.k)

    def label(self) -> str:
        return f"A{'-delegated' if self.delegated else ''}({self.k})"

    def caps(self) -> dict:
        return {"k": self.k}


class UnionSpace(ContractSpace):
    """Union of spaces, deduplicated in order of first appearance."""

    def __init__(self, parts: Sequence[ContractSpace], tag: str | None = None) -> None:
        super().__init__(parts[0].n_actions)
        self.parts = list(parts)
        self.tag = tag or "+".join(p.label() for p in parts)

    def iter(self, j: int) -> Iterator[Contract]:
        seen: set = set()
        for part in self.parts:
            for c in part.iter(j):
                if c not in seen:
                    seen.add(c)
                    yield c

    def contains(self, c: Contract) -> bool:
        return any(p.contains(c) for p in self.parts)

    def caps(self) -> dict:
        out: dict = {}
        for p in self.parts:
            out.update(p.caps())
        return out


class ExplicitSpace(ContractSpace):
    """A space given by explicit contract lists."""

    def __init__(self, n_actions: Sequence[int], contracts: Sequence[Sequence[Contract]], tag: str = "explicit") -> None:
        super().__init__(n_actions)
        self.contracts = [list(cs) for cs in contracts]
        self._sets = [set(cs) for cs in self.contracts]
        self.tag = tag

    def iter(self, j: int) -> Iterator[Contract]:
        return iter(self.contracts[j])

    def contains(self, c: Contract) -> bool:
        return c in self._sets[c.owner]

    def size(self, j: int) -> int:
        return len(self.contracts[j])


class ConstantsSpace(ContractSpace):
    """Degenerate constants over the universal subset/recommendation alphabet."""

    tag = "const"

    def iter(self, j: int) -> Iterator[Contract]:
        return (constant_contract(j, y, self.n_actions[j]) for y in range(self.n_actions[j]))

    def contains(self, c: Contract) -> bool:
        return c.kind == "const" or (
            len(set(c.images)) == 1 and c.alphabet == universal_alphabet(self.n_actions[c.owner]) and popcount(c.images[0]) == 1
        )

    def size(self, j: int) -> int:
        return self.n_actions[j]


def make_space(tag: str, n_actions: Sequence[int], k: int | None = None, r_cap: int | None = None, names: Sequence[str] | None = None) -> ContractSpace:
    """Space from a tag: P, R, F, F*, const, A(k), A-delegated(k), A(k)+const."""
    t = tag.strip().upper().replace("C^", "")
    if t == "P":
        return MenuSpace(n_actions)
    if t == "R":
        return RecSpace(n_actions, r_cap)
    if t == "F":
        return FullRecSpace(n_actions)
    if t in ("F*", "FSTAR"):
        return FullRecStarSpace(n_actions)
    if t in ("CONST", "CONSTANTS"):
        return ConstantsSpace(n_actions)
    m = re.fullmatch(r"A(-DELEGATED|D)?(?:\((\d+)\))?(\+CONST|\*)?", t)
    if m:
        if m.group(2) is not None:
            k = int(m.group(2))
        if k is None:
            raise ContractError("general space needs an alphabet size k")
        base = GeneralSpace(n_actions, k, names, delegated=m.group(1) is not None)
        if m.group(3):
            return UnionSpace([base, ConstantsSpace(n_actions)], f"{base.label()}+const")
        return base
    raise ContractError(f"unknown contract space {tag!r}")


# -- extension relations ----------------------------------------------------------------------


def _check_owner(c1: Contract, c2: Contract) -> None:
    if c1.owner != c2.owner:
        raise ContractError("extension compares contracts of the same principal only")


def is_extension(c1: Contract, c2: Contract) -> bool:
    """Whether c1 >= c2: some surjection from c1's alphabet onto c2's preserves images.

    Such a surjection exists iff both contracts have the same image set and
    every image has at least as many c1-messages as c2-messages.
    """
    _check_owner(c1, c2)
    f1, f2 = c1.fibers(), c2.fibers()
    if f1.keys() != f2.keys():
        return False
    return all(f1[d] >= f2[d] for d in f2)


def extension_map(c1: Contract, c2: Contract) -> dict[Token, Token] | None:
    """A surjection iota with c1(m) == c2(iota(m)), chosen lexicographically.

    Within each image class the i-th c1-message goes to the i-th c2-message
    and the surplus goes to the first c2-message of the class.
    """
    if not is_extension(c1, c2):
        return None
    iota: dict[Token, Token] = {}
    for d in c2.fibers():
        src = c1.messages_for(d)
        dst = c2.messages_for(d)
        for i, m in enumerate(src):
            iota[m] = dst[i] if i < len(dst) else dst[0]
    return iota


def section_map(c1: Contract, c2: Contract) -> dict[Token, Token] | None:
    """An injective right inverse of ``extension_map``: c2-message -> c1-message."""
    iota = extension_map(c1, c2)
    if iota is None:
        return None
    inverse: dict[Token, Token] = {}
    for m in c1.alphabet:
        inverse.setdefault(iota[m], m)
    return inverse


def find_surjection(c1: Contract, c2: Contract) -> dict[Token, Token] | None:
    """Brute-force search for an image-preserving surjection (test oracle)."""
    _check_owner(c1, c2)
    targets = c2.alphabet
    for choice in itertools.product(range(len(targets)), repeat=len(c1.alphabet)):
        if len(set(choice)) != len(targets):
            continue
        if all(c1.images[i] == c2.images[t] for i, t in enumerate(choice)):
            return {c1.alphabet[i]: targets[t] for i, t in enumerate(choice)}
    return None


@dataclass
class RelationResult:
    holds: bool
    kind: str
    witness: dict = field(default_factory=dict)
    counterexample: Contract | None = None


def relation_check(space1: ContractSpace, space2: ContractSpace, kind: str, principals: Sequence[int] | None = None) -> RelationResult:
    """Decide ``space1 ]* space2`` or ``space1 ]** space2``.

    ``*``: every contract of space2 has an extension in space1.
    ``**``: every contract of space1 extends some contract of space2.
    The witness maps each quantified contract to its partner.
    """
    if kind not in ("*", "**"):
        raise ContractError("relation kind must be '*' or '**'")
    principals = range(len(space1.n_actions)) if principals is None else principals
    witness: dict = {}
    for j in principals:
        if kind == "*":
            outer, inner = space2, space1
        else:
            outer, inner = space1, space2
        index: dict[frozenset, list[Contract]] = {}
        for c in inner.iter(j):
            index.setdefault(c.image_set, []).append(c)
        for c in outer.iter(j):
            partner = None
            for cand in index.get(c.image_set, []):
                if (kind == "*" and is_extension(cand, c)) or (kind == "**" and is_extension(c, cand)):
                    partner = cand
                    break
            if partner is None:
                return RelationResult(False, kind, witness, c)
            witness[c] = partner
    return RelationResult(True, kind, witness)


def pad_extension(c: Contract, alphabet: Sequence[Token]) -> Contract | None:
    """Extension of c over a larger alphabet: copy images, repeat the first for the rest."""
    if len(alphabet) < len(c.alphabet):
        return None
    images = list(c.images) + [c.images[0]] * (len(alphabet) - len(c.alphabet))
    return Contract(c.owner, tuple(alphabet), tuple(images), "general")
