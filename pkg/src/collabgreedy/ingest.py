"""Build dense replay matrices from raw star-rating dumps.

Keeps the most-rated items, then the users with the most ratings among
those items, and quantizes stars to +1 (>= threshold) / -1. Unobserved
cells are 0.
"""
from __future__ import annotations

import enum
import hashlib
import json
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigurationError, FormatError

log = logging.getLogger(__name__)

MAX_MALFORMED_FRACTION = 0.01


class RatingFormat(str, enum.Enum):
    COMMA = "comma"  # user,item,stars[,...]
    DOUBLE_COLON = "double_colon"  # user::item::stars::timestamp (MovieLens .dat)


@dataclass(frozen=True)
class RatingTriple:
    user_id: str
    item_id: str
    stars: float


@dataclass
class ParsedRatings:
    triples: list[RatingTriple]
    n_lines: int
    n_malformed: int


@dataclass
class RatingMatrix:
    values: np.ndarray  # (n, m) int8 over {-1, 0, +1}
    row_ids: list[str]
    col_ids: list[str]
    threshold: float = 4.0
    n_duplicates: int = 0

    @property
    def density(self) -> float:
        return float(np.count_nonzero(self.values) / self.values.size)


def _parse_line(line: str, sep: str) -> RatingTriple | None:
    parts = line.split(sep)
    if len(parts) < 3 or not parts[0] or not parts[1]:
        return None
    try:
        stars = float(parts[2])
    except ValueError:
        return None
    if not np.isfinite(stars) or stars < 0:
        return None
    return RatingTriple(parts[0].strip(), parts[1].strip(), stars)


def parse_ratings_csv(path, fmt: RatingFormat | str = RatingFormat.COMMA) -> ParsedRatings:
    """Parse a ratings dump, skipping a header line and counting malformed lines.

    Raises :class:`FormatError` when more than 1% of the non-blank lines are
    malformed.
    """
    fmt = RatingFormat(fmt)
    sep = "," if fmt is RatingFormat.COMMA else "::"
    triples: list[RatingTriple] = []
    n_lines = n_bad = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh):
            line = raw.strip()
            if not line:
                continue
            parsed = _parse_line(line, sep)
            if parsed is None and lineno == 0:
                continue  # header
            n_lines += 1
            if parsed is None:
                n_bad += 1
                log.debug("malformed line %d: %r", lineno + 1, line)
                continue
            triples.append(parsed)
    if n_lines and n_bad / n_lines > MAX_MALFORMED_FRACTION:
        raise FormatError(f"{n_bad} of {n_lines} lines in {path} are malformed")
    if n_bad:
        log.warning("skipped %d malformed lines in %s", n_bad, path)
    return ParsedRatings(triples, n_lines, n_bad)


def quantize(stars: float, threshold: float = 4.0) -> int:
    return 1 if stars >= threshold else -1


def _top(counts: Counter, size: int) -> list[str]:
    return [key for key, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:size]]


def dense_submatrix(triples: Iterable[RatingTriple], n_top: int, m_top: int,
                    threshold: float = 4.0) -> RatingMatrix:
    """Top ``n_top`` users by top ``m_top`` items, quantized.

    Items are ranked first by how many users rated them; users are then
    ranked by how many of the chosen items they rated. Count ties go to the
    lexicographically smaller id and a repeated (user, item) pair keeps its
    last rating.
    """
    latest: dict[tuple[str, str], float] = {}
    n_dup = 0
    for tr in triples:
        key = (tr.user_id, tr.item_id)
        if key in latest:
            n_dup += 1
        latest[key] = tr.stars

    item_counts = Counter(item for _, item in latest)
    if len(item_counts) < m_top:
        raise ConfigurationError(f"dataset has {len(item_counts)} items, need {m_top}")
    items = _top(item_counts, m_top)
    chosen = set(items)
    user_counts = Counter(user for user, item in latest if item in chosen)
    # users with no rating among the chosen items still count toward availability
    for user, _ in latest:
        user_counts.setdefault(user, 0)
    if len(user_counts) < n_top:
        raise ConfigurationError(f"dataset has {len(user_counts)} users, need {n_top}")
    users = _top(user_counts, n_top)

    row = {u: r for r, u in enumerate(users)}
    col = {i: c for c, i in enumerate(items)}
    values = np.zeros((n_top, m_top), dtype=np.int8)
    for (user, item), stars in latest.items():
        if user in row and item in col:
            values[row[user], col[item]] = quantize(stars, threshold)
    if n_dup:
        log.info("%d duplicate (user, item) ratings resolved by last occurrence", n_dup)
    return RatingMatrix(values, users, items, threshold, n_dup)


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_matrix(matrix: RatingMatrix, out_dir, source_hash: str = "") -> Path:
    """Write ``matrix.csv`` (rows of -1/0/1) and ``manifest.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "matrix.csv", matrix.values, fmt="%d", delimiter=",")
    manifest = {
        "n": int(matrix.values.shape[0]),
        "m": int(matrix.values.shape[1]),
        "density": matrix.density,
        "threshold": matrix.threshold,
        "source_hash": source_hash,
        "row_ids": matrix.row_ids,
        "col_ids": matrix.col_ids,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return out


def load_matrix(path) -> RatingMatrix:
    """Load a matrix directory (or a bare ``matrix.csv``) and verify its manifest."""
    path = Path(path)
    folder = path if path.is_dir() else path.parent
    csv_path = folder / "matrix.csv" if path.is_dir() else path
    values = np.loadtxt(csv_path, delimiter=",", dtype=np.int64, ndmin=2).astype(np.int8)
    manifest_path = folder / "manifest.json"
    if not manifest_path.exists():
        n, m = values.shape
        return RatingMatrix(values, [str(i) for i in range(n)], [str(j) for j in range(m)])
    manifest = json.loads(manifest_path.read_text())
    matrix = RatingMatrix(values, manifest.get("row_ids", []), manifest.get("col_ids", []),
                          manifest.get("threshold", 4.0))
    if values.shape != (manifest["n"], manifest["m"]):
        raise ConfigurationError(f"{csv_path} shape {values.shape} disagrees with its manifest")
    if abs(matrix.density - manifest["density"]) > 1e-12:
        raise ConfigurationError(f"{csv_path} density {matrix.density} disagrees with its manifest")
    return matrix
