"""User and item embedding matrices: initialization, lookup, serialization.

One store serves every model variant; the variant tag only switches which
distance and update rule the trainer applies, so controlled comparisons can
start from bit-identical matrices.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, TextIO

import numpy as np

from .errors import ConfigError, DataFormatError, InvalidInputError
from .gyrovector import BALL_EPS, check_curvature

# Norm slack when asserting the clipped-unit-ball invariant of the
# Euclidean variant (rows are clipped to norm 1, rounding included).
_UNIT_TOL = 1e-12


class Variant(str, Enum):
    """Which geometry the trainer and evaluator use."""

    HYPERBOLIC = "hyperbolic"  # trained and ranked directly in the ball
    TANGENT = "tangent"        # optimized in the tangent space at the origin
    EUCLIDEAN = "euclidean"    # plain Euclidean triplet metric learning

    @classmethod
    def coerce(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value))
        except ValueError:
            names = ", ".join(v.value for v in cls)
            raise ConfigError(f"variant: expected one of {names}, got {value!r}") from None


@dataclass
class InitConfig:
    """Near-origin uniform initialization: components ~ U(-alpha, alpha)."""

    dim: int
    beta: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.dim <= 0:
            raise ConfigError(f"dim: must be a positive integer, got {self.dim}")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ConfigError(f"beta: must be a positive real, got {self.beta}")

    @property
    def alpha(self) -> float:
        return float((3.0 * self.beta ** 2 / (2.0 * self.dim)) ** (1.0 / 3.0))


@dataclass
class EmbeddingStore:
    """Dense user and item embedding matrices plus geometry metadata."""

    user_vectors: np.ndarray
    item_vectors: np.ndarray
    dim: int
    curvature: float
    variant: Variant

    @property
    def n_users(self) -> int:
        return self.user_vectors.shape[0]

    @property
    def n_items(self) -> int:
        return self.item_vectors.shape[0]

    def lookup_triplet(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Rows (user, positive item, negative item) for a triplet of indices."""
        user, pos, neg = int(t[0]), int(t[1]), int(t[2])
        if not 0 <= user < self.n_users:
            raise IndexError(f"user index {user} out of range [0, {self.n_users})")
        for name, idx in (("positive item", pos), ("negative item", neg)):
            if not 0 <= idx < self.n_items:
                raise IndexError(f"{name} index {idx} out of range [0, {self.n_items})")
        return self.user_vectors[user], self.item_vectors[pos], self.item_vectors[neg]

    def copy(self) -> "EmbeddingStore":
        return EmbeddingStore(
            user_vectors=self.user_vectors.copy(),
            item_vectors=self.item_vectors.copy(),
            dim=self.dim,
            curvature=self.curvature,
            variant=self.variant,
        )

    def max_row_norm(self) -> float:
        norms_u = np.linalg.norm(self.user_vectors, axis=-1)
        norms_i = np.linalg.norm(self.item_vectors, axis=-1)
        return float(max(norms_u.max(initial=0.0), norms_i.max(initial=0.0)))

    def check_rows(self) -> None:
        """Assert the storage invariant for this variant; raises on violation."""
        top = self.max_row_norm()
        if self.variant is Variant.EUCLIDEAN:
            if top > 1.0 + _UNIT_TOL:
                raise InvalidInputError(f"row norm {top} exceeds the clipped unit ball")
        elif self.curvature > 0:
            bound = (1.0 - BALL_EPS) / np.sqrt(self.curvature)
            if top > bound * (1.0 + _UNIT_TOL):
                raise InvalidInputError(
                    f"row norm {top} exceeds ball bound {bound} at curvature {self.curvature}"
                )


def init_embeddings(
    n_users: int,
    n_items: int,
    cfg: InitConfig,
    variant: Variant = Variant.HYPERBOLIC,
    curvature: float = 1.0,
) -> EmbeddingStore:
    """Seeded uniform initialization of all embeddings close to the origin.

    Every component is drawn i.i.d. from U(-alpha, alpha) with
    alpha = (3 beta^2 / (2 d))^(1/3); the same seed reproduces the matrices
    bit for bit. Users are drawn before items.
    """
    if n_users <= 0 or n_items <= 0:
        raise InvalidInputError(f"counts must be positive, got {n_users} users / {n_items} items")
    variant = Variant.coerce(variant)
    curvature = check_curvature(curvature)
    alpha = cfg.alpha
    max_norm = alpha * np.sqrt(cfg.dim)
    if variant is Variant.EUCLIDEAN:
        if max_norm > 1.0:
            raise ConfigError(f"beta: initialization radius {max_norm:.4g} exceeds the unit ball")
    elif curvature > 0 and max_norm >= (1.0 - BALL_EPS) / np.sqrt(curvature):
        raise ConfigError(
            f"beta: initialization radius {max_norm:.4g} reaches the ball of curvature {curvature}"
        )
    rng = np.random.default_rng(cfg.seed)
    users = rng.uniform(-alpha, alpha, size=(n_users, cfg.dim))
    items = rng.uniform(-alpha, alpha, size=(n_items, cfg.dim))
    return EmbeddingStore(users, items, cfg.dim, curvature, variant)


def save_embeddings(
    store: EmbeddingStore,
    target: str | TextIO,
    user_ids: Sequence[str],
    item_ids: Sequence[str],
) -> None:
    """Write embeddings as UTF-8 text.

    Header line `n_users n_items dim c variant`, then one row per entity:
    `u <id> <floats>` for users and `i <id> <floats>` for items, with floats
    printed to 9 significant digits. Ids must not contain whitespace.
    """
    if len(user_ids) != store.n_users or len(item_ids) != store.n_items:
        raise InvalidInputError("id lists do not match the store shape")

    def _write(fh: TextIO) -> None:
        fh.write(f"{store.n_users} {store.n_items} {store.dim} "
                 f"{store.curvature!r} {store.variant.value}\n")
        for prefix, ids, matrix in (("u", user_ids, store.user_vectors),
                                    ("i", item_ids, store.item_vectors)):
            for ext_id, row in zip(ids, matrix):
                vals = " ".join(f"{v:.9g}" for v in row)
                fh.write(f"{prefix} {ext_id} {vals}\n")

    if isinstance(target, str):
        with open(target, "w", encoding="utf-8", newline="\n") as fh:
            _write(fh)
    else:
        _write(target)


def load_embeddings(source: str | TextIO) -> tuple[EmbeddingStore, list[str], list[str]]:
    """Read an embedding file written by save_embeddings.

    Returns the store plus the external user and item ids in row order.
    """
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
    lines = text.splitlines()
    if not lines:
        raise DataFormatError("embedding file is empty")
    head = lines[0].split()
    if len(head) != 5:
        raise DataFormatError("embedding header must be 'n_users n_items dim c variant'")
    try:
        n_users, n_items, dim = int(head[0]), int(head[1]), int(head[2])
        curvature = float(head[3])
    except ValueError as exc:
        raise DataFormatError(f"bad embedding header: {exc}") from None
    variant = Variant.coerce(head[4])
    users = np.empty((n_users, dim))
    items = np.empty((n_items, dim))
    user_ids: list[str] = []
    item_ids: list[str] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 2 + dim:
            raise DataFormatError(f"line {lineno}: expected 'u|i <id> <{dim} floats>'")
        kind, ext_id = fields[0], fields[1]
        row = np.array([float(v) for v in fields[2:]])
        if kind == "u":
            if len(user_ids) >= n_users:
                raise DataFormatError(f"line {lineno}: more user rows than the header declares")
            users[len(user_ids)] = row
            user_ids.append(ext_id)
        elif kind == "i":
            if len(item_ids) >= n_items:
                raise DataFormatError(f"line {lineno}: more item rows than the header declares")
            items[len(item_ids)] = row
            item_ids.append(ext_id)
        else:
            raise DataFormatError(f"line {lineno}: unknown row kind {kind!r}")
    if len(user_ids) != n_users or len(item_ids) != n_items:
        raise DataFormatError("embedding file is truncated")
    store = EmbeddingStore(users, items, dim, curvature, variant)
    return store, user_ids, item_ids


def dump_embeddings_text(store: EmbeddingStore, user_ids, item_ids) -> str:
    """Serialized embedding text (same bytes save_embeddings would write)."""
    buf = io.StringIO()
    save_embeddings(store, buf, user_ids, item_ids)
    return buf.getvalue()
