"""Levenshtein alignment and phone/phoneme error rates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence


@dataclass(frozen=True)
class ErrorBreakdown:
    substitutions: int
    insertions: int
    deletions: int
    reference_length: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def error_rate(self) -> float:
        return self.errors / self.reference_length


def edit_distance(hyp: Sequence[Hashable], ref: Sequence[Hashable]) -> ErrorBreakdown:
    """Unit-cost alignment of ``hyp`` against ``ref``.

    Among minimum-cost alignments the one with the fewest insertions plus
    deletions wins, i.e. substitutions are preferred. Error rates can exceed 1.
    """
    if len(ref) == 0:
        raise ValueError("empty reference: error rate is undefined")
    n, m = len(ref), len(hyp)
    # cell = (cost, indels, S, I, D); min() compares cost, then indels
    prev = [(j, j, 0, j, 0) for j in range(m + 1)]
    for i in range(1, n + 1):
        cur = [(i, i, 0, 0, i)]
        for j in range(1, m + 1):
            c, x, s, ins, d = prev[j - 1]
            if ref[i - 1] == hyp[j - 1]:
                diag = (c, x, s, ins, d)
            else:
                diag = (c + 1, x, s + 1, ins, d)
            c, x, s, ins, d = prev[j]
            dele = (c + 1, x + 1, s, ins, d + 1)
            c, x, s, ins, d = cur[j - 1]
            inse = (c + 1, x + 1, s, ins + 1, d)
            cur.append(min(diag, dele, inse, key=lambda cell: cell[:2]))
        prev = cur
    _, _, s, ins, d = prev[m]
    return ErrorBreakdown(s, ins, d, n)


def corpus_error_rate(pairs: Sequence[tuple[Sequence, Sequence]]) -> float:
    """Micro-averaged error rate: total edits over total reference length."""
    if not pairs:
        raise ValueError("no hypothesis/reference pairs")
    errors = length = 0
    for hyp, ref in pairs:
        b = edit_distance(hyp, ref)
        errors += b.errors
        length += b.reference_length
    return errors / length


def format_report(ids: Sequence[str], pairs: Sequence[tuple[Sequence, Sequence]]) -> str:
    """Per-utterance TSV breakdown followed by a ``#total`` summary line."""
    lines = ["id\tsubstitutions\tinsertions\tdeletions\treference_length\terror_rate"]
    totals = [0, 0, 0, 0]
    for uid, (hyp, ref) in zip(ids, pairs):
        b = edit_distance(hyp, ref)
        lines.append(f"{uid}\t{b.substitutions}\t{b.insertions}\t{b.deletions}\t{b.reference_length}\t{b.error_rate:.6f}")
        for k, v in enumerate((b.substitutions, b.insertions, b.deletions, b.reference_length)):
            totals[k] += v
    total = ErrorBreakdown(*totals)
    lines.append(
        f"#total\t{total.substitutions}\t{total.insertions}\t{total.deletions}\t"
        f"{total.reference_length}\t{total.error_rate:.6f}"
    )
    return "\n".join(lines) + "\n"
