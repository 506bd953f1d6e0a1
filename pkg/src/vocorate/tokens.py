"""Structural token-sequence expansion: one placeholder becomes K compression tokens.

Tokens are plain strings. "<ph>" is the placeholder, "<voco>" the compression
token, anything else is ordinary text. Sequences serialize to one line of
whitespace-separated tokens.
"""

from __future__ import annotations

from .errors import ValidationError

PLACEHOLDER = "<ph>"
VOCO = "<voco>"


def validate_tokens(tokens) -> list:
    toks = list(tokens)
    for t in toks:
        if not isinstance(t, str) or not t or any(ch.isspace() for ch in t):
            raise ValidationError(f"invalid token {t!r}: tokens are nonempty, whitespace-free strings")
    return toks


def expand(sequence, count: int) -> list:
    """Replace the unique placeholder with `count` consecutive compression tokens.

    The prefix and suffix around the placeholder are preserved verbatim, so
    the result has length len(sequence) - 1 + count.
    """
    toks = validate_tokens(sequence)
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    positions = [i for i, t in enumerate(toks) if t == PLACEHOLDER]
    if len(positions) != 1:
        raise ValidationError(
            f"sequence must contain exactly one {PLACEHOLDER}, found {len(positions)}"
        )
    at = positions[0]
    return toks[:at] + [VOCO] * count + toks[at + 1:]


def sequence_cost(sequence, costs=None, default_cost: float = 1.0) -> float:
    """Total cost of an expanded sequence under a per-token cost table.

    `costs` maps token spellings to costs; unlisted tokens pay default_cost.
    The sequence must already be expanded (no placeholder left).
    """
    toks = validate_tokens(sequence)
    if PLACEHOLDER in toks:
        raise ValidationError("sequence still contains a placeholder; expand it first")
    costs = dict(costs or {})
    if default_cost < 0 or any(v < 0 for v in costs.values()):
        raise ValidationError("token costs must be >= 0")
    if costs.get(VOCO, default_cost) <= 0:
        raise ValidationError("compression-token cost must be > 0 so cost grows with count")
    return float(sum(costs.get(t, default_cost) for t in toks))


def format_tokens(sequence) -> str:
    return " ".join(validate_tokens(sequence))


def parse_tokens(line: str) -> list:
    return validate_tokens(line.split())
