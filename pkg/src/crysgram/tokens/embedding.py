"""Element embedding table, (N, 201) formula matrices, and assembly of the
embedded input consumed by the encoder."""

from dataclasses import dataclass

import numpy as np

from ..errors import EmbeddingError
from ..grammar import SYMBOLS
from ..nn.tensor import Tensor, as_tensor, gather_rows, matmul
from .tokenizer import N_FORMULA_SLOTS

D_ELEMENT = 200


class ElementEmbeddingTable:
    """Element symbol -> fixed-dimension real vector.

    The on-disk format is one line per element: the symbol followed by
    the vector components. The default table is a deterministic seeded
    surrogate with the same shape as published literature embeddings;
    point ``from_file`` at a real embedding file to replace it.
    """

    def __init__(self, vectors):
        if not vectors:
            raise EmbeddingError("empty element embedding table")
        self._vectors = {}
        self._dim = None
        for symbol, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.ndim != 1:
                raise EmbeddingError(f"{symbol}: vector must be 1-D")
            if self._dim is None:
                self._dim = arr.size
            elif arr.size != self._dim:
                raise EmbeddingError(
                    f"{symbol}: dimension {arr.size} != {self._dim}")
            self._vectors[symbol] = arr

    @property
    def dimension(self):
        return self._dim

    def __contains__(self, symbol):
        return symbol in self._vectors

    def __len__(self):
        return len(self._vectors)

    def vector(self, symbol):
        try:
            return self._vectors[symbol]
        except KeyError:
            raise EmbeddingError(f"no embedding vector for element {symbol!r}") \
                from None

    @classmethod
    def deterministic(cls, dimension=D_ELEMENT, seed=7, symbols=SYMBOLS):
        rng = np.random.default_rng(np.random.PCG64(seed))
        scale = 1.0 / np.sqrt(dimension)
        return cls({s: rng.normal(0.0, scale, size=dimension) for s in symbols})

    @classmethod
    def from_file(cls, path, dimension=None):
        vectors = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.split()
                if not parts or parts[0].startswith("#"):
                    continue
                symbol, values = parts[0], parts[1:]
                if dimension is not None and len(values) != dimension:
                    raise EmbeddingError(
                        f"{path}:{lineno}: {symbol} has {len(values)} "
                        f"components, expected {dimension}")
                vectors[symbol] = np.array([float(v) for v in values])
        return cls(vectors)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for symbol, vec in self._vectors.items():
                fh.write(symbol + " "
                         + " ".join(repr(float(v)) for v in vec) + "\n")


def embed_formula(composition, table):
    """(20, d_el + 1) matrix: row i = [fraction_i, element vector_i].

    Rows beyond the element count are zero padding.
    """
    out = np.zeros((N_FORMULA_SLOTS, table.dimension + 1), dtype=np.float64)
    for i, (symbol, fraction) in enumerate(composition.items()):
        out[i, 0] = fraction
        out[i, 1:] = table.vector(symbol)
    return out


@dataclass
class EmbeddedInput:
    """L x d_model matrix (or B x L x d_model batch) plus attention mask."""

    matrix: Tensor
    attention_mask: np.ndarray
    token_labels: tuple = ()
    provenance: object = None

    @property
    def numpy(self):
        return np.asarray(self.matrix.data)


def assemble_batch(sequences, formula_matrices, token_embedding,
                   formula_projection_w, formula_projection_b,
                   positional_table):
    """Embed a batch of token sequences.

    Discrete positions pull rows from the token-embedding table; formula
    slots holding real elements get linearly projected (fraction || vector)
    rows; [PAD] rows stay all-zero; learned positional embeddings are added
    at every non-[PAD] position. Tables may be Tensors (training) or
    plain arrays.
    """
    token_embedding = as_tensor(token_embedding)
    w = as_tensor(formula_projection_w)
    b = as_tensor(formula_projection_b)
    positional = as_tensor(positional_table)
    dtype = token_embedding.data.dtype

    lengths = {len(seq) for seq in sequences}
    if len(lengths) != 1:
        raise EmbeddingError(f"mixed sequence lengths in one batch: {lengths}")
    (L,) = lengths
    if w.data.shape[1] != token_embedding.data.shape[1]:
        raise EmbeddingError(
            f"projection output {w.data.shape[1]} != d_model "
            f"{token_embedding.data.shape[1]}")
    if positional.data.shape[0] < L:
        raise EmbeddingError(
            f"positional table covers {positional.data.shape[0]} positions, "
            f"sequence needs {L}")

    ids = np.array([seq.ids for seq in sequences], dtype=np.intp)
    mask = np.array([seq.attention_mask for seq in sequences], dtype=np.int8)
    formula = np.stack([np.asarray(m, dtype=dtype) for m in formula_matrices])
    if formula.shape[1] != N_FORMULA_SLOTS:
        raise EmbeddingError(
            f"formula matrix has {formula.shape[1]} rows, "
            f"expected {N_FORMULA_SLOTS}")
    if formula.shape[2] != w.data.shape[0]:
        raise EmbeddingError(
            f"formula feature width {formula.shape[2]} != projection input "
            f"{w.data.shape[0]}")

    is_formula = np.zeros(L, dtype=bool)
    is_formula[L - N_FORMULA_SLOTS:] = True
    realmask = mask.astype(bool)
    discrete_sel = (~is_formula & realmask)[..., None].astype(dtype)
    formula_sel = (is_formula & realmask)[..., None].astype(dtype)
    nonpad = realmask[..., None].astype(dtype)

    discrete = gather_rows(token_embedding, ids)
    projected = matmul(formula, w) + b
    # constant 0/1 placement matrix scatters the 20 projected rows into
    # their sequence positions without a concat primitive
    place = np.zeros((L, N_FORMULA_SLOTS), dtype=dtype)
    place[L - N_FORMULA_SLOTS:, :] = np.eye(N_FORMULA_SLOTS, dtype=dtype)
    placed = matmul(Tensor(place), projected)

    combined = discrete * discrete_sel + placed * formula_sel
    combined = combined + positional[0:L] * nonpad

    labels = tuple(getattr(seq, "token_labels", ()) for seq in sequences)
    provenance = [getattr(seq, "provenance", None) for seq in sequences]
    return EmbeddedInput(matrix=combined, attention_mask=mask,
                         token_labels=labels, provenance=provenance)


def assemble_input(seq, formula_matrix, token_embedding,
                   formula_projection, positional_table):
    """Single-sequence assembly; ``formula_projection`` is a (w, b) pair."""
    w, b = formula_projection
    batch = assemble_batch([seq], [formula_matrix], token_embedding,
                           w, b, positional_table)
    matrix = batch.matrix.reshape(*batch.matrix.shape[1:])
    return EmbeddedInput(
        matrix=matrix,
        attention_mask=batch.attention_mask[0],
        token_labels=batch.token_labels[0],
        provenance=getattr(seq, "provenance", None),
    )
