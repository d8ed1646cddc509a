"""Free-group words and basis maps.

A word in the free group F_n is a tuple of nonzero ints: letter k stands for
the k-th generator (1 = a, 2 = b, ...) and -k for its inverse.  Everything
downstream (markings, automorphisms, inverse markings) reduces to a handful
of exact operations on these tuples, kept here free of any graph structure.
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

Word = tuple  # tuple of nonzero ints


class NotBasisError(ValueError):
    """The given words do not form a free basis of the ambient free group."""


def reduce_word(letters: Iterable[int]) -> Word:
    """Free reduction: cancel adjacent inverse pairs."""
    out: list = []
    for x in letters:
        if x == 0:
            raise ValueError("0 is not a letter")
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def invert_word(w: Sequence) -> Word:
    return tuple(-x for x in reversed(w))


def concat(*ws: Sequence) -> Word:
    """Reduced product of words."""
    out: list = []
    for w in ws:
        for x in w:
            if out and out[-1] == -x:
                out.pop()
            else:
                out.append(x)
    return tuple(out)


def cyclic_reduce(w: Sequence) -> Word:
    """Strip matching first/last letters of a reduced word."""
    w = reduce_word(w)
    i, j = 0, len(w)
    while j - i >= 2 and w[i] == -w[j - 1]:
        i += 1
        j -= 1
    return tuple(w[i:j])


def substitute(images: Sequence[Word], w: Sequence) -> Word:
    """Apply the endomorphism generator k -> images[k-1] to w, reduced."""
    out: list = []
    for x in w:
        img = images[x - 1] if x > 0 else invert_word(images[-x - 1])
        for y in img:
            if out and out[-1] == -y:
                out.pop()
            else:
                out.append(y)
    return tuple(out)


def identity_images(rank: int) -> tuple:
    return tuple((i,) for i in range(1, rank + 1))


def compose(outer: Sequence[Word], inner: Sequence[Word]) -> tuple:
    """Images of the composite map w -> outer(inner(w))."""
    return tuple(substitute(outer, w) for w in inner)


def is_identity(images: Sequence[Word]) -> bool:
    return all(w == (i + 1,) for i, w in enumerate(images))


# ---------------------------------------------------------------------------
# text form: generators a..z, inverses A..Z


def parse_word(text: str, rank: Optional[int] = None) -> Word:
    letters = []
    for ch in text.strip():
        if ch in " .":
            continue
        if "a" <= ch <= "z":
            k = ord(ch) - ord("a") + 1
        elif "A" <= ch <= "Z":
            k = -(ord(ch) - ord("A") + 1)
        else:
            raise ValueError(f"bad letter {ch!r} in word {text!r}")
        if rank is not None and abs(k) > rank:
            raise ValueError(f"letter {ch!r} exceeds rank {rank}")
        letters.append(k)
    return reduce_word(letters)


def format_word(w: Sequence) -> str:
    out = []
    for x in w:
        if abs(x) > 26:
            raise ValueError("cannot format generator beyond z")
        out.append(chr(ord("a") + x - 1) if x > 0 else chr(ord("A") - x - 1))
    return "".join(out)


# ---------------------------------------------------------------------------
# conjugation bookkeeping


def common_conjugator(vs: Sequence[Word]) -> Optional[Word]:
    """Word g with vs[i] == g x_{i+1} g^-1 for all i, if one exists.

    The reduced form of g x g^-1 for a single letter x displays as
    c0 x c0^-1 with c0 not ending in x^{+-1}; the residual ambiguity
    g = c0 x^k is pinned down by the second word.
    """
    if not vs:
        return None
    v1 = reduce_word(vs[0])
    if len(v1) % 2 == 0:
        return None
    m = len(v1) // 2
    c0 = v1[:m]
    if v1 != c0 + (1,) + invert_word(c0):
        return None
    if len(vs) == 1:
        g = c0
    else:
        v2 = reduce_word(vs[1])
        body = concat(invert_word(c0), v2, c0)  # should be 1^k 2 1^-k
        k = 0
        while k < len(body) and body[k] == 1:
            k += 1
        if k == 0:
            while k < len(body) and body[k] == -1:
                k += 1
            k = -k
        g = concat(c0, (1,) * k if k >= 0 else (-1,) * (-k))
    for i, v in enumerate(vs):
        if reduce_word(v) != concat(g, (i + 1,), invert_word(g)):
            return None
    return g


def is_conjugate_identity(images: Sequence[Word]) -> bool:
    return common_conjugator(images) is not None


# ---------------------------------------------------------------------------
# inverting a basis map by folding
#
# Given words y_1..y_n generating F_n, build a wedge of n subdivided loops
# labelled by the y_i, and fold edges carrying the same letter away from a
# shared endpoint.  Each fold is a homotopy equivalence whenever the far
# endpoints differ (otherwise the words were not a basis), so a word in the
# y-alphabet can be carried along for every surviving edge.  The fully
# folded graph must be the rose on the ambient generators; reading off the
# carried words and normalizing away one inner conjugation yields the exact
# inverse map.


def invert_images(images: Sequence[Word], rank: Optional[int] = None) -> tuple:
    """Images of the inverse of the automorphism k -> images[k-1].

    The result psi satisfies substitute(psi, images[k-1]) == (k,) exactly.
    Raises NotBasisError when the images do not form a basis.
    """
    n = len(images)
    if rank is None:
        rank = n
    if rank != n:
        raise NotBasisError(f"{n} images for rank {rank}")
    imgs = [reduce_word(w) for w in images]
    if any(not w for w in imgs) or any(abs(x) > n for w in imgs for x in w):
        raise NotBasisError("images must be nonempty words in the ambient letters")

    # edge record: [init, term, label>0, h-word]; read init->term spells +label
    edges: dict = {}
    next_v = 1
    next_e = 0
    for i, w in enumerate(imgs, start=1):
        cur = 0
        for j, letter in enumerate(w):
            nxt = 0 if j == len(w) - 1 else next_v
            if j < len(w) - 1:
                next_v += 1
            h: Word = (i,) if j == 0 else ()
            if letter > 0:
                edges[next_e] = [cur, nxt, letter, h]
            else:
                edges[next_e] = [nxt, cur, -letter, invert_word(h)]
            next_e += 1
            cur = nxt

    def find_fold():
        germs: dict = {}
        for e in sorted(edges):
            u, v, lab, _ = edges[e]
            for key in ((u, lab), (v, -lab)):
                if key in germs:
                    return germs[key], e, key
                germs[key] = e
        return None

    while True:
        hit = find_fold()
        if hit is None:
            break
        e1, e2, (z, slab) = hit

        def read(e):
            u, v, lab, h = edges[e]
            if slab > 0:  # read from init
                return v, h
            return u, invert_word(h)

        far1, h1 = read(e1)
        far2, h2 = read(e2)
        if far1 == far2:
            raise NotBasisError("fold collapses a loop: images are not a basis")
        if far2 == 0 or (far1 != 0 and far2 < far1):
            far1, far2 = far2, far1
            h1, h2 = h2, h1
        # far1 survives; omega carries the detour far1 -> z -> far2
        omega = concat(invert_word(h1), h2)
        del edges[e2]
        for e in edges:
            u, v, lab, h = edges[e]
            if u == far2:
                h = concat(omega, h)
                u = far1
            if v == far2:
                h = concat(h, invert_word(omega))
                v = far1
            edges[e] = [u, v, lab, h]

    # prune hanging trees away from the basepoint
    changed = True
    while changed:
        changed = False
        degree: dict = {}
        for u, v, _, _ in edges.values():
            degree[u] = degree.get(u, 0) + 1
            degree[v] = degree.get(v, 0) + 1
        for e in sorted(edges):
            u, v, _, _ = edges[e]
            if (degree.get(u, 0) == 1 and u != 0) or (degree.get(v, 0) == 1 and v != 0):
                del edges[e]
                changed = True
                break

    loops = {}
    for u, v, lab, h in edges.values():
        if u != 0 or v != 0 or lab in loops:
            raise NotBasisError("folded graph is not the standard rose")
        loops[lab] = h
    if sorted(loops) != list(range(1, n + 1)):
        raise NotBasisError("folded graph is not the standard rose")

    psi = [loops[k] for k in range(1, n + 1)]
    vs = [substitute(psi, w) for w in imgs]
    g = common_conjugator(vs)
    if g is None:
        raise NotBasisError("inverse candidate fails the conjugacy check")
    gi = invert_word(g)
    psi = [concat(gi, p, g) for p in psi]
    for k, w in enumerate(imgs, start=1):
        if substitute(psi, w) != (k,):
            raise NotBasisError("inverse verification failed")
    return tuple(psi)
