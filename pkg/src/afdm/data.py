"""Transaction records, feature encoding, CSV I/O and dataset preprocessing."""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, NamedTuple, Sequence

import numpy as np

LEGAL = 0
FRAUD = 1
CLASS_NAMES = ("Legal", "Fraud")

CSV_COLUMNS = (
    "step",
    "type",
    "amount",
    "nameOrig",
    "oldbalanceOrg",
    "newbalanceOrig",
    "nameDest",
    "oldbalanceDest",
    "newbalanceDest",
    "isFraud",
    "isFlaggedFraud",
)


class DataError(ValueError):
    """Base class for data ingestion and preprocessing errors."""


class SchemaError(DataError):
    def __init__(self, message: str, column: str | None = None):
        super().__init__(message)
        self.column = column


class RowError(DataError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class TxType(str, enum.Enum):
    CASH_IN = "CASH_IN"
    CASH_OUT = "CASH_OUT"
    DEBIT = "DEBIT"
    PAYMENT = "PAYMENT"
    TRANSFER = "TRANSFER"


TX_TYPES = tuple(TxType)
_TX_INDEX = {t: i for i, t in enumerate(TX_TYPES)}


@dataclass(frozen=True, slots=True)
class Transaction:
    step: int
    tx_type: TxType
    amount: float
    orig_id: str
    old_balance_orig: float
    new_balance_orig: float
    dest_id: str
    old_balance_dest: float
    new_balance_dest: float
    is_fraud: bool
    is_flagged: bool = False

    def __post_init__(self):
        if self.step < 0:
            raise ValueError("step must be >= 0")
        for name in ("amount", "old_balance_orig", "new_balance_orig",
                     "old_balance_dest", "new_balance_dest"):
            v = getattr(self, name)
            if not v >= 0 or math.isinf(v):
                raise ValueError(f"{name} must be a finite non-negative number, got {v!r}")
        if not isinstance(self.tx_type, TxType):
            object.__setattr__(self, "tx_type", TxType(self.tx_type))


# ---------------------------------------------------------------------------
# schema and feature vectors


@dataclass(frozen=True)
class Attribute:
    name: str
    kind: str  # "categorical" or "numeric"
    values: tuple[str, ...] = ()

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"


@dataclass(frozen=True)
class DatasetSchema:
    attributes: tuple[Attribute, ...]
    class_attribute: str = "class"
    class_values: tuple[str, ...] = CLASS_NAMES

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names) or self.class_attribute in names:
            raise SchemaError("attribute names must be unique")
        for a in self.attributes:
            if a.kind not in ("categorical", "numeric"):
                raise SchemaError(f"unknown attribute kind {a.kind!r}", a.name)
            if a.is_categorical and not a.values:
                raise SchemaError("categorical attribute needs a value set", a.name)
        if len(self.class_values) != 2:
            raise SchemaError("class attribute must be binary")

    def __len__(self) -> int:
        return len(self.attributes)

    @property
    def cat_positions(self) -> tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.attributes) if a.is_categorical)

    @property
    def num_positions(self) -> tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.attributes) if not a.is_categorical)

    @property
    def cat_sizes(self) -> tuple[int, ...]:
        return tuple(len(self.attributes[i].values) for i in self.cat_positions)

    def to_dict(self) -> dict:
        return {
            "attributes": [
                {"name": a.name, "kind": a.kind, "values": list(a.values)}
                for a in self.attributes
            ],
            "class_attribute": self.class_attribute,
            "class_values": list(self.class_values),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSchema":
        attrs = tuple(
            Attribute(a["name"], a["kind"], tuple(a.get("values", ())))
            for a in d["attributes"]
        )
        return cls(attrs, d.get("class_attribute", "class"),
                   tuple(d.get("class_values", CLASS_NAMES)))


TRANSACTION_SCHEMA = DatasetSchema((
    Attribute("type", "categorical", tuple(t.value for t in TX_TYPES)),
    Attribute("step", "numeric"),
    Attribute("amount", "numeric"),
    Attribute("oldbalanceOrg", "numeric"),
    Attribute("newbalanceOrig", "numeric"),
    Attribute("oldbalanceDest", "numeric"),
    Attribute("newbalanceDest", "numeric"),
))


class FeatureVector(NamedTuple):
    values: tuple
    label: int | None = None


def check_vector(x: FeatureVector, schema: DatasetSchema) -> None:
    if len(x.values) != len(schema.attributes):
        raise ValueError(
            f"feature vector has arity {len(x.values)}, schema expects {len(schema.attributes)}")
    for a, v in zip(schema.attributes, x.values):
        if a.is_categorical and not 0 <= v < len(a.values):
            raise ValueError(f"categorical index {v!r} out of range for {a.name}")


def to_features(tx: Transaction, schema: DatasetSchema = TRANSACTION_SCHEMA) -> FeatureVector:
    """Encode a transaction against the canonical transaction schema.

    Account identifiers and the upstream rule flag are dropped.
    """
    if schema is not TRANSACTION_SCHEMA and schema != TRANSACTION_SCHEMA:
        raise SchemaError("to_features only supports the canonical transaction schema")
    return FeatureVector(
        (_TX_INDEX[tx.tx_type], float(tx.step), tx.amount, tx.old_balance_orig,
         tx.new_balance_orig, tx.old_balance_dest, tx.new_balance_dest),
        FRAUD if tx.is_fraud else LEGAL,
    )


class LabeledDataset:
    """A schema plus labeled rows, with a cached columnar view for kernels."""

    def __init__(self, schema: DatasetSchema, rows: Sequence[FeatureVector]):
        self.schema = schema
        self.rows = tuple(rows)
        for r in self.rows:
            if r.label not in (LEGAL, FRAUD):
                raise DataError("every row of a labeled dataset needs a label")
            check_vector(r, schema)
        self._arrays = None

    @classmethod
    def from_transactions(cls, txs: Iterable[Transaction]) -> "LabeledDataset":
        return cls(TRANSACTION_SCHEMA, [to_features(t) for t in txs])

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[FeatureVector]:
        return iter(self.rows)

    def __eq__(self, other) -> bool:
        return (isinstance(other, LabeledDataset) and self.schema == other.schema
                and self.rows == other.rows)

    @property
    def labels(self) -> np.ndarray:
        return self.arrays()[2]

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(cat, num, labels)`` as C-contiguous int64/float64/int8 arrays."""
        if self._arrays is None:
            cp, np_ = self.schema.cat_positions, self.schema.num_positions
            n = len(self.rows)
            cat = np.zeros((n, len(cp)), dtype=np.int64)
            num = np.zeros((n, len(np_)), dtype=np.float64)
            if n:
                vals = [r.values for r in self.rows]
                if cp:
                    cat[:] = [[v[i] for i in cp] for v in vals]
                if np_:
                    num[:] = [[v[i] for i in np_] for v in vals]
            labels = np.fromiter((r.label for r in self.rows), dtype=np.int8, count=n)
            self._arrays = (cat, num, labels)
        return self._arrays

    def subset(self, indices: Iterable[int]) -> "LabeledDataset":
        idx = np.asarray(list(indices) if not isinstance(indices, np.ndarray) else indices,
                         dtype=np.int64)
        out = LabeledDataset.__new__(LabeledDataset)
        out.schema = self.schema
        out.rows = tuple(self.rows[i] for i in idx)
        cat, num, labels = self.arrays()
        out._arrays = (np.ascontiguousarray(cat[idx]), np.ascontiguousarray(num[idx]),
                       np.ascontiguousarray(labels[idx]))
        return out


# ---------------------------------------------------------------------------
# CSV


def _parse_amount(text: str, column: str, line: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise RowError(line, f"{column}: not a number: {text!r}") from None
    if not v >= 0 or math.isinf(v):
        raise RowError(line, f"{column}: must be a finite non-negative number, got {text!r}")
    return v


def _parse_flag(text: str, column: str, line: int) -> bool:
    if text == "1":
        return True
    if text == "0":
        return False
    raise RowError(line, f"{column}: expected 0 or 1, got {text!r}")


def _parse_row(row: list[str], line: int) -> Transaction:
    if len(row) != len(CSV_COLUMNS):
        raise RowError(line, f"expected {len(CSV_COLUMNS)} fields, got {len(row)}")
    try:
        step = int(row[0])
    except ValueError:
        raise RowError(line, f"step: not an integer: {row[0]!r}") from None
    if step < 0:
        raise RowError(line, f"step: negative value {step}")
    try:
        tx_type = TxType(row[1])
    except ValueError:
        raise RowError(line, f"type: unknown transaction type {row[1]!r}") from None
    return Transaction(
        step=step,
        tx_type=tx_type,
        amount=_parse_amount(row[2], "amount", line),
        orig_id=row[3],
        old_balance_orig=_parse_amount(row[4], "oldbalanceOrg", line),
        new_balance_orig=_parse_amount(row[5], "newbalanceOrig", line),
        dest_id=row[6],
        old_balance_dest=_parse_amount(row[7], "oldbalanceDest", line),
        new_balance_dest=_parse_amount(row[8], "newbalanceDest", line),
        is_fraud=_parse_flag(row[9], "isFraud", line),
        is_flagged=_parse_flag(row[10], "isFlaggedFraud", line),
    )


def iter_csv(source: IO, skip_bad_rows: bool = False,
             bad_rows: list | None = None) -> Iterator[Transaction]:
    """Yield transactions from a CSV byte (or text) stream in file order.

    With ``skip_bad_rows`` malformed rows are skipped and their
    :class:`RowError` appended to ``bad_rows`` when given; otherwise the first
    one is raised.
    """
    wrapped = not isinstance(source, io.TextIOBase)
    text = io.TextIOWrapper(source, encoding="utf-8", newline="") if wrapped else source
    try:
        yield from _iter_rows(csv.reader(text), skip_bad_rows, bad_rows)
    finally:
        if wrapped:
            text.detach()


def _iter_rows(reader, skip_bad_rows: bool, bad_rows: list | None) -> Iterator[Transaction]:
    header = next(reader, None)
    if header is None:
        raise SchemaError("missing header row")
    for i, expected in enumerate(CSV_COLUMNS):
        got = header[i] if i < len(header) else None
        if got != expected:
            raise SchemaError(
                f"header column {i + 1}: expected {expected!r}, got {got!r}", expected)
    if len(header) != len(CSV_COLUMNS):
        raise SchemaError(f"unexpected extra column {header[len(CSV_COLUMNS)]!r}",
                          header[len(CSV_COLUMNS)])
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        try:
            yield _parse_row(row, line)
        except RowError as err:
            if not skip_bad_rows:
                raise
            if bad_rows is not None:
                bad_rows.append(err)


def parse_csv(source: IO, skip_bad_rows: bool = False,
              bad_rows: list | None = None) -> list[Transaction]:
    return list(iter_csv(source, skip_bad_rows, bad_rows))


def _fmt(v: float) -> str:
    return repr(float(v))


def write_csv(transactions: Iterable[Transaction], out: IO) -> int:
    """Write transactions in the canonical column layout; returns the row count."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    n = 0
    for t in transactions:
        writer.writerow((
            t.step, t.tx_type.value, _fmt(t.amount), t.orig_id,
            _fmt(t.old_balance_orig), _fmt(t.new_balance_orig), t.dest_id,
            _fmt(t.old_balance_dest), _fmt(t.new_balance_dest),
            int(t.is_fraud), int(t.is_flagged),
        ))
        n += 1
    return n


# ---------------------------------------------------------------------------
# preprocessing


def balance_indices(labels: Sequence[int], legal_per_fraud: float, seed: int) -> np.ndarray:
    """Indices kept by majority undersampling, in seeded shuffled order."""
    labels = np.asarray(labels)
    if not legal_per_fraud > 0:
        raise DataError("legal_per_fraud must be positive")
    fraud = np.flatnonzero(labels == FRAUD)
    legal = np.flatnonzero(labels != FRAUD)
    if fraud.size == 0:
        raise DataError("cannot balance a dataset without fraud rows")
    rng = np.random.Generator(np.random.PCG64(seed))
    n_legal = min(legal.size, math.ceil(legal_per_fraud * fraud.size))
    kept_legal = rng.choice(legal, size=n_legal, replace=False) if n_legal else legal[:0]
    keep = np.concatenate([fraud, np.sort(kept_legal)])
    return keep[rng.permutation(keep.size)]


def balance_dataset(ds: LabeledDataset, legal_per_fraud: float = 3.0,
                    seed: int = 0) -> LabeledDataset:
    """Keep every fraud row and subsample legal rows to ``ceil(ratio * #fraud)``."""
    return ds.subset(balance_indices(ds.labels, legal_per_fraud, seed))


def split_stratified_folds(ds: LabeledDataset | Sequence[int], k: int,
                           seed: int) -> list[np.ndarray]:
    """Partition row indices into ``k`` folds with per-class sizes differing by at most one."""
    labels = ds.labels if isinstance(ds, LabeledDataset) else np.asarray(ds)
    if k < 2:
        raise DataError("k must be >= 2")
    rng = np.random.Generator(np.random.PCG64(seed))
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for cls in (FRAUD, LEGAL):
        idx = np.flatnonzero(labels == cls)
        if idx.size < k:
            raise DataError(
                f"class {CLASS_NAMES[cls]} has {idx.size} rows, fewer than k={k}")
        idx = idx[rng.permutation(idx.size)]
        # rotate the starting fold so remainders don't pile up in fold 0
        for j, i in enumerate(idx):
            folds[(offset + j) % k].append(int(i))
        offset = (offset + idx.size) % k
    return [np.sort(np.asarray(f, dtype=np.int64)) for f in folds]
