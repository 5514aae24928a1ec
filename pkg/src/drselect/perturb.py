"""Query text perturbation: masking a proportion of whitespace tokens.

A query with n tokens gets max(1, floor(p * n)) tokens replaced by the mask
token (none when p = 0). Mask positions are drawn without replacement from a
generator keyed by (seed, query id, trial), so each trial of each query is
reproducible on its own, independent of processing order. Reassembly joins
tokens with single spaces, which canonicalizes any original run of
whitespace.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from drselect.corpusio import read_query_texts, write_query_texts
from drselect.errors import DataValidationError
from drselect.seeding import derive_rng

MASK_TOKEN = "[MASK]"

_TRIAL_SUFFIX = re.compile(r"#t(\d+)$")


@dataclass(frozen=True)
class PerturbConfig:
    p: float
    seed: int
    trials: int = 3
    mask_token: str = MASK_TOKEN

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise DataValidationError(f"mask proportion {self.p} outside [0, 1]")
        if self.trials < 1:
            raise DataValidationError("trials must be at least 1")
        if not self.mask_token or any(c.isspace() for c in self.mask_token):
            raise DataValidationError("mask token must be non-empty and unspaced")


def mask_count(p: float, n_tokens: int) -> int:
    """max(1, floor(p * n)) masked tokens; zero only when p is zero."""
    if n_tokens <= 0:
        raise DataValidationError("query has no tokens")
    if p == 0.0:
        return 0
    return max(1, math.floor(p * n_tokens))


def mask_query(text: str, cfg: PerturbConfig, query_id: str, trial: int) -> str:
    """One masked variant of a query text."""
    tokens = text.split()
    if not tokens:
        raise DataValidationError(f"query {query_id!r} has no tokens")
    m = mask_count(cfg.p, len(tokens))
    if m:
        rng = derive_rng(cfg.seed, "mask", query_id, trial)
        positions = rng.choice(len(tokens), size=m, replace=False)
        for pos in positions:
            tokens[pos] = cfg.mask_token
    return " ".join(tokens)


def perturbed_id(query_id: str, trial: int) -> str:
    return f"{query_id}#t{trial}"


def parse_perturbed_id(pid: str) -> tuple[str, int]:
    """Split ``qid#t<trial>`` back into (qid, trial)."""
    match = _TRIAL_SUFFIX.search(pid)
    if not match or match.start() == 0:
        raise DataValidationError(f"id {pid!r} lacks a #t<trial> suffix")
    return pid[: match.start()], int(match.group(1))


def perturb_queries(queries: Mapping[str, str], cfg: PerturbConfig) -> dict[str, str]:
    """All trials for all queries, keyed ``qid#t<trial>`` with trials 1-based.

    Output order: queries in input order, trials innermost. Original ids must
    not already end in a trial suffix, otherwise the mapping back would be
    ambiguous.
    """
    if not queries:
        raise DataValidationError("no queries to perturb")
    out: dict[str, str] = {}
    for qid, text in queries.items():
        if _TRIAL_SUFFIX.search(qid):
            raise DataValidationError(
                f"query id {qid!r} collides with the trial-suffix scheme"
            )
        for trial in range(1, cfg.trials + 1):
            out[perturbed_id(qid, trial)] = mask_query(text, cfg, qid, trial)
    return out


def perturb_file(
    in_path: str | Path,
    out_path: str | Path,
    cfg: PerturbConfig,
    header_comment: str = "",
) -> dict[str, str]:
    """Read a query TSV, write the perturbed TSV, return the perturbed map."""
    queries = read_query_texts(in_path)
    perturbed = perturb_queries(queries, cfg)
    write_query_texts(perturbed, out_path, header_comment=header_comment)
    return perturbed
