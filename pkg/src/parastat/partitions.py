"""Partition counts p_k(n) and exactly uniform sampling of partitions.

p_k(n) counts partitions of n into exactly k positive parts and obeys

    p_k(n) = p_k(n - k) + p_{k-1}(n - 1).

Unrolling the first term gives p_k(n) = sum_j p_{k-1}(n - 1 - j k), a
stride-k cumulative sum of the previous row, so each row is one numpy
reduction.  Counts are exact Python integers up to n = 3000 and log
values beyond.
"""

import math
import os
import random
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import BudgetExceeded, OutOfRange

EXACT_LIMIT = 3000
MAX_CELLS = 2 * 10**8
_MAGIC = b"PKTB"
_FORMAT_VERSION = 1


@dataclass
class PartitionTable:
    """Row k holds p_k(0..n_max).  With ``column_only`` just p_k(n_max) is kept."""

    n_max: int
    k_max: int
    mode: str
    rows: object = field(repr=False)
    column_only: bool = False

    def __post_init__(self):
        if self.mode not in ("exact", "log_space"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def _check(self, n, k):
        if not (0 <= n <= self.n_max):
            raise OutOfRange(f"n = {n} outside table range [0, {self.n_max}]")
        if not (0 <= k <= self.k_max):
            raise OutOfRange(f"k = {k} outside table range [0, {self.k_max}]")
        if self.column_only and n != self.n_max:
            raise OutOfRange("column-only table only answers n = n_max")

    def count(self, n, k):
        """p_k(n): an int in exact mode, a float log count in log mode."""
        self._check(n, k)
        if self.column_only:
            return self.rows[k]
        return self.rows[k][n]

    def log_count(self, n, k):
        v = self.count(n, k)
        if self.mode == "log_space":
            return float(v)
        return math.log(v) if v > 0 else -math.inf


def _row_step(prev, k, exact):
    """Row k from row k-1: shift by one then cumulative-sum with stride k."""
    size = prev.shape[0]
    length = -(-size // k) * k
    if exact:
        q = np.zeros(length, dtype=object)
        q[:] = 0
        q[1:size] = prev[:-1]
        out = np.cumsum(q.reshape(-1, k), axis=0).ravel()[:size]
    else:
        q = np.full(length, -np.inf)
        q[1:size] = prev[:-1]
        out = np.logaddexp.accumulate(q.reshape(-1, k), axis=0).ravel()[:size]
    return out


def build_table(n_max, k_max=None, mode=None, column_only=False, max_cells=MAX_CELLS):
    """Tabulate p_k(n) for 0 <= k <= k_max, 0 <= n <= n_max.

    ``mode`` defaults to exact up to n = 3000 and log_space above.
    """
    if k_max is None:
        k_max = n_max
    if n_max < 0 or k_max < 0:
        raise OutOfRange("table bounds must be non-negative")
    k_max = min(k_max, n_max) if n_max > 0 else 0
    if mode is None:
        mode = "exact" if n_max <= EXACT_LIMIT else "log_space"
    if mode == "exact" and n_max > EXACT_LIMIT:
        raise OutOfRange(f"exact mode is limited to n <= {EXACT_LIMIT}")
    cells = (n_max + 1) * (k_max + 1)
    if not column_only and cells > max_cells:
        raise BudgetExceeded(f"table of {cells} cells exceeds the budget of {max_cells}")
    if column_only and (n_max + 1) * 2 > max_cells:
        raise BudgetExceeded("column exceeds the budget")
    exact = mode == "exact"
    if exact:
        row = np.zeros(n_max + 1, dtype=object)
        row[:] = 0
        row[0] = 1
    else:
        row = np.full(n_max + 1, -np.inf)
        row[0] = 0.0
    if column_only:
        col = [row[n_max]]
        for k in range(1, k_max + 1):
            row = _row_step(row, k, exact)
            col.append(row[n_max])
        rows = col if exact else np.array(col)
    else:
        rows = [row]
        for k in range(1, k_max + 1):
            row = _row_step(row, k, exact)
            rows.append(row)
    return PartitionTable(n_max, k_max, mode, rows, column_only)


def count_at_most_k(table, n, k):
    """Number of partitions of n into at most k parts (log value in log mode)."""
    table._check(n, k)
    vals = [table.count(n, j) for j in range(0, k + 1)]
    if table.mode == "exact":
        return sum(vals)
    return float(logsumexp(vals))


def most_probable_parts(table, n):
    """argmax over k of p_k(n), ties broken toward the smaller k."""
    top = min(n, table.k_max)
    vals = [table.log_count(n, k) for k in range(0, top + 1)]
    if table.mode == "exact":
        exact = [table.count(n, k) for k in range(0, top + 1)]
        best = max(exact)
        return exact.index(best)
    return int(np.argmax(vals))


def parts_column(n, mode=None):
    """p_k(n) for k = 0..n with rolling rows; returns a column-only table."""
    return build_table(n, n, mode=mode, column_only=True)


# ---------------------------------------------------------------- sampling

@dataclass(frozen=True)
class OccupancyVector:
    """Multiplicities N_i of each part size i, plus the unused budget N_0."""

    counts: dict
    parts_total: int
    sum_total: int
    n0: int

    def __post_init__(self):
        if any(v < 0 for v in self.counts.values()) or self.n0 < 0:
            raise ValueError("occupation numbers must be non-negative")

    @classmethod
    def from_parts(cls, parts, k):
        counts = {}
        for p in parts:
            counts[p] = counts.get(p, 0) + 1
        total = len(parts)
        return cls(dict(sorted(counts.items())), total, int(sum(parts)), k - total)

    def parts(self):
        """Parts in non-increasing order."""
        out = []
        for size in sorted(self.counts, reverse=True):
            out.extend([size] * self.counts[size])
        return tuple(out)

    def as_array(self, length):
        arr = np.zeros(length + 1, dtype=np.int64)
        for i, v in self.counts.items():
            if i <= length:
                arr[i] = v
        return arr


def _sample_exact(table, n, k, rng, exactly):
    # choose the number of parts, then peel parts off smallest first:
    # a partition into j parts either contains a 1 (drop it) or has all
    # parts >= 2 (subtract 1 from each, raising the offset)
    if exactly:
        j = k
    else:
        weights = [table.count(n, j) for j in range(k + 1)]
        r = rng.randrange(sum(weights))
        j = 0
        while r >= weights[j]:
            r -= weights[j]
            j += 1
    parts = []
    offset = 0
    m = n
    while j > 0:
        total = table.count(m, j)
        with_one = table.count(m - 1, j - 1)
        if rng.randrange(total) < with_one:
            parts.append(1 + offset)
            m -= 1
            j -= 1
        else:
            m -= j
            offset += 1
    return parts


def _sample_log(table, n, k, rng, exactly):
    if exactly:
        j = k
    else:
        logs = np.array([table.log_count(n, j) for j in range(k + 1)])
        p = np.exp(logs - logs.max())
        c = np.cumsum(p)
        j = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
        j = min(j, k)
    parts = []
    offset = 0
    m = n
    rows = table.rows
    while j > 0:
        lt = rows[j][m]
        l1 = rows[j - 1][m - 1]
        if math.log(rng.random()) < l1 - lt:
            parts.append(1 + offset)
            m -= 1
            j -= 1
        else:
            m -= j
            offset += 1
    return parts


def _child_seeds(seed, count, chunk):
    nchunks = -(-count // chunk)
    return np.random.SeedSequence(seed).spawn(nchunks)


def sample_partitions(table, n, k, count, seed, exactly_k=False, chunk=64, threads=1):
    """Draw ``count`` partitions of n into at most k parts (or exactly k).

    Samples are split into fixed chunks with their own spawned seeds, so
    the output depends only on ``seed``, never on ``threads``.
    """
    if table.column_only:
        raise OutOfRange("sampling needs a full table")
    table._check(n, k)
    if (table.count(n, k) if exactly_k else count_at_most_k(table, n, k)) in (0, -math.inf):
        raise OutOfRange(f"no partitions of {n} into {'exactly' if exactly_k else 'at most'} {k} parts")
    seeds = _child_seeds(seed, count, chunk)

    def run(ci):
        ss = seeds[ci]
        size = min(chunk, count - ci * chunk)
        if table.mode == "exact":
            rng = random.Random(int(ss.generate_state(2, np.uint64)[0]))
            draw = _sample_exact
        else:
            rng = _NumpyUniform(np.random.default_rng(ss))
            draw = _sample_log
        return [OccupancyVector.from_parts(draw(table, n, k, rng, exactly_k), k) for _ in range(size)]

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            chunks = list(ex.map(run, range(len(seeds))))
    else:
        chunks = [run(i) for i in range(len(seeds))]
    return [s for c in chunks for s in c]


def sample_partition(table, n, k, seed, exactly_k=False):
    return sample_partitions(table, n, k, 1, seed, exactly_k)[0]


class _NumpyUniform:
    """Buffered uniforms from a numpy Generator."""

    def __init__(self, gen, block=4096):
        self.gen = gen
        self.block = block
        self.buf = gen.random(block)
        self.pos = 0

    def random(self):
        if self.pos == self.block:
            self.buf = self.gen.random(self.block)
            self.pos = 0
        v = self.buf[self.pos]
        self.pos += 1
        return v if v > 0 else 5e-324


# ---------------------------------------------------------------- condensate

@dataclass(frozen=True)
class CondensateSummary:
    k: int
    k0: float
    n0_values: tuple
    median_abs_deviation: float
    band_width: float
    fraction_outside_band: float
    tail_bound: float
    band_checked: bool


def condensate_statistics(samples, k, k0, delta=0.1, delta1=0.15):
    """Distribution of the unused budget N_0 = k - parts against k - k0.

    The band |N_0 - (k - k0)| <= delta1 k0 is only meaningful when k > k0;
    otherwise ``band_checked`` is False and no band test is implied.
    """
    n0 = np.array([s.n0 for s in samples], dtype=float)
    dev = np.abs(n0 - (k - k0))
    checked = k > k0
    bound = math.exp(-((k - k0) ** (0.5 - delta))) if checked else 1.0
    width = delta1 * k0
    return CondensateSummary(
        k=k, k0=k0, n0_values=tuple(int(v) for v in n0),
        median_abs_deviation=float(np.median(dev)) if n0.size else math.nan,
        band_width=width,
        fraction_outside_band=float(np.mean(dev > width)) if n0.size else math.nan,
        tail_bound=bound,
        band_checked=checked,
    )


# ---------------------------------------------------------------- cache files

def save_table(table, path):
    """Binary layout: magic, version, n_max, k_max, mode, column flag, payload.

    Exact payload stores each count as a u32 byte length and little-endian
    magnitude bytes; log payload is little-endian float64.
    """
    mode = 0 if table.mode == "exact" else 1
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HIIBB", _FORMAT_VERSION, table.n_max, table.k_max, mode,
                             int(table.column_only)))
        rows = [table.rows] if table.column_only else table.rows
        for row in rows:
            if mode == 0:
                for v in row:
                    v = int(v)
                    raw = v.to_bytes(max(1, (v.bit_length() + 7) // 8), "little")
                    fh.write(struct.pack("<I", len(raw)))
                    fh.write(raw)
            else:
                fh.write(np.asarray(row, dtype="<f8").tobytes())


def load_table(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise ValueError("not a partition table file")
    version, n_max, k_max, mode, column = struct.unpack_from("<HIIBB", data, 4)
    if version != _FORMAT_VERSION:
        raise ValueError(f"unsupported table format version {version}")
    pos = 4 + struct.calcsize("<HIIBB")
    nrows = 1 if column else k_max + 1
    width = k_max + 1 if column else n_max + 1
    rows = []
    for _ in range(nrows):
        if mode == 0:
            row = np.zeros(width, dtype=object)
            for i in range(width):
                (ln,) = struct.unpack_from("<I", data, pos)
                pos += 4
                row[i] = int.from_bytes(data[pos:pos + ln], "little")
                pos += ln
        else:
            row = np.frombuffer(data, dtype="<f8", count=width, offset=pos).astype(float)
            pos += 8 * width
        rows.append(row)
    table_rows = (list(rows[0]) if mode == 0 else rows[0]) if column else rows
    return PartitionTable(n_max, k_max, "exact" if mode == 0 else "log_space", table_rows, bool(column))


def cached_table(n_max, k_max, mode=None, cache_dir=None):
    """build_table with an on-disk cache under ``cache_dir`` or $PARASTAT_CACHE_DIR."""
    cache_dir = cache_dir or os.environ.get("PARASTAT_CACHE_DIR")
    if not cache_dir:
        return build_table(n_max, k_max, mode)
    resolved = mode or ("exact" if n_max <= EXACT_LIMIT else "log_space")
    path = os.path.join(cache_dir, f"pk_{resolved}_{n_max}_{min(k_max, n_max)}.pktb")
    if os.path.exists(path):
        try:
            return load_table(path)
        except (ValueError, struct.error) as exc:
            warnings.warn(f"ignoring unreadable cache file {path}: {exc}", RuntimeWarning, stacklevel=2)
    table = build_table(n_max, k_max, resolved)
    os.makedirs(cache_dir, exist_ok=True)
    save_table(table, path)
    return table
