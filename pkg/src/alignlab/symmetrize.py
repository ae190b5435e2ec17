"""Bidirectional alignment merging."""
from __future__ import annotations

from .corpus import AlignmentSet

NEIGHBOURS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def transpose_alignment(a: AlignmentSet) -> AlignmentSet:
    return a.transposed()


def intersect(fwd: AlignmentSet, rev: AlignmentSet) -> AlignmentSet:
    return AlignmentSet.of(fwd.links & rev.links)


def union(fwd: AlignmentSet, rev: AlignmentSet) -> AlignmentSet:
    return AlignmentSet.of(fwd.links | rev.links)


def grow_diag(fwd: AlignmentSet, rev_transposed: AlignmentSet) -> AlignmentSet:
    """grow-diag (no final step) over two same-orientation link sets.

    Starts from the intersection and repeatedly adds union links that touch a
    current link (8-neighbourhood) and cover an unaligned source or target word.
    Current links are visited in sorted order, neighbours in sorted order, until
    a full pass adds nothing.
    """
    alignment = set(fwd.links & rev_transposed.links)
    candidates = fwd.links | rev_transposed.links
    src_aligned = {s for s, _ in alignment}
    tgt_aligned = {t for _, t in alignment}
    grew = True
    while grew:
        grew = False
        for s, t in sorted(alignment):
            for ds, dt in NEIGHBOURS:
                link = (s + ds, t + dt)
                if link in alignment or link not in candidates:
                    continue
                if link[0] not in src_aligned or link[1] not in tgt_aligned:
                    alignment.add(link)
                    src_aligned.add(link[0])
                    tgt_aligned.add(link[1])
                    grew = True
    return AlignmentSet.of(alignment)
