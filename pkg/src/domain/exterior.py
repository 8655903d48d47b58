"""
Exterior algebra of an oriented 7-dimensional inner-product space.

Forms are stored densely: a degree-k form is an array whose last axis has
C(7, k) entries in lexicographic multi-index order. Any leading axes are
treated as a batch (points of a lattice, random samples, ...), so every
operation here works pointwise on whole fields at once.

Sign bookkeeping for wedge, interior product and Hodge star is precomputed
into tables at import time.
"""
from __future__ import annotations

import itertools
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Tuple, Union

import numpy as np
from scipy.special import comb

from src.errors import DegreeError, NonFiniteError, PositivityError

logger = logging.getLogger(__name__)

DIM = 7

Scalar = Union[float, np.ndarray]

BASIS: Tuple[Tuple[Tuple[int, ...], ...], ...] = tuple(
    tuple(itertools.combinations(range(DIM), k)) for k in range(DIM + 1)
)
POSITION: Tuple[Dict[Tuple[int, ...], int], ...] = tuple(
    {index: n for n, index in enumerate(basis)} for basis in BASIS
)


def n_components(degree: int) -> int:
    if not 0 <= degree <= DIM:
        raise DegreeError(f"degree must lie in 0..{DIM}, got {degree}")
    return int(comb(DIM, degree, exact=True))


def permutation_sign(sequence: Tuple[int, ...]) -> int:
    inversions = 0
    for i in range(len(sequence)):
        for j in range(i + 1, len(sequence)):
            if sequence[i] > sequence[j]:
                inversions += 1
    return -1 if inversions % 2 else 1


@dataclass(frozen=True)
class _ProductTable:
    # products[..., p] = sign[p] * left[..., left_index[p]] * right[..., right_index[p]]
    # and the result is products @ scatter
    left_index: np.ndarray
    right_index: np.ndarray
    sign: np.ndarray
    scatter: np.ndarray


def _scatter_matrix(targets: List[int], size: int) -> np.ndarray:
    scatter = np.zeros((len(targets), size))
    scatter[np.arange(len(targets)), targets] = 1.0
    return scatter


def _build_wedge_table(k: int, l: int) -> _ProductTable:
    left, right, signs, targets = [], [], [], []
    for a, I in enumerate(BASIS[k]):
        for b, J in enumerate(BASIS[l]):
            if set(I) & set(J):
                continue
            joined = I + J
            left.append(a)
            right.append(b)
            signs.append(permutation_sign(joined))
            targets.append(POSITION[k + l][tuple(sorted(joined))])
    return _ProductTable(
        np.array(left, dtype=int),
        np.array(right, dtype=int),
        np.array(signs, dtype=float),
        _scatter_matrix(targets, n_components(k + l)),
    )


def _build_interior_table(k: int) -> _ProductTable:
    axes, sources, signs, targets = [], [], [], []
    for a, I in enumerate(BASIS[k]):
        for p, axis in enumerate(I):
            axes.append(axis)
            sources.append(a)
            signs.append(-1.0 if p % 2 else 1.0)
            targets.append(POSITION[k - 1][I[:p] + I[p + 1:]])
    return _ProductTable(
        np.array(axes, dtype=int),
        np.array(sources, dtype=int),
        np.array(signs, dtype=float),
        _scatter_matrix(targets, n_components(k - 1)),
    )


def _build_star_signs(k: int) -> np.ndarray:
    signs = np.zeros((n_components(DIM - k), n_components(k)))
    for a, I in enumerate(BASIS[k]):
        complement = tuple(i for i in range(DIM) if i not in I)
        signs[POSITION[DIM - k][complement], a] = permutation_sign(I + complement)
    return signs


@dataclass(frozen=True)
class _CompoundTable:
    first: np.ndarray
    rest: np.ndarray
    column: np.ndarray
    drop: np.ndarray


def _build_compound_table(k: int) -> _CompoundTable:
    size = n_components(k)
    first = np.zeros(size, dtype=int)
    rest = np.zeros(size, dtype=int)
    column = np.zeros((size, k), dtype=int)
    drop = np.zeros((size, k), dtype=int)
    for a, I in enumerate(BASIS[k]):
        first[a] = I[0]
        rest[a] = POSITION[k - 1][I[1:]]
        for p in range(k):
            column[a, p] = I[p]
            drop[a, p] = POSITION[k - 1][I[:p] + I[p + 1:]]
    return _CompoundTable(first, rest, column, drop)


_WEDGE_TABLES: Dict[Tuple[int, int], _ProductTable] = {
    (k, l): _build_wedge_table(k, l)
    for k in range(DIM + 1)
    for l in range(DIM + 1 - k)
}
_INTERIOR_TABLES: Dict[int, _ProductTable] = {
    k: _build_interior_table(k) for k in range(1, DIM + 1)
}
_STAR_SIGNS: Dict[int, np.ndarray] = {k: _build_star_signs(k) for k in range(DIM + 1)}
_COMPOUND_TABLES: Dict[int, _CompoundTable] = {
    k: _build_compound_table(k) for k in range(2, DIM + 1)
}
logger.debug("built exterior sign tables for dimension %d", DIM)


@contextmanager
def corrupted_star_signs(degree: int = 0) -> Iterator[None]:
    """Flip the star sign table of one degree while the block runs (test mode)."""
    original = _STAR_SIGNS[degree]
    _STAR_SIGNS[degree] = -original
    logger.warning("star sign table for degree %d corrupted", degree)
    try:
        yield
    finally:
        _STAR_SIGNS[degree] = original


@dataclass(frozen=True)
class MultiIndex:
    """Strictly increasing axis labels in 1..7."""

    indices: Tuple[int, ...]

    def __post_init__(self) -> None:
        labels = tuple(int(i) for i in self.indices)
        if len(labels) > DIM or any(not 1 <= i <= DIM for i in labels):
            raise DegreeError(f"invalid multi-index {labels}")
        if any(a >= b for a, b in zip(labels, labels[1:])):
            raise DegreeError(f"multi-index must be strictly increasing: {labels}")
        object.__setattr__(self, "indices", labels)

    @property
    def degree(self) -> int:
        return len(self.indices)

    @property
    def position(self) -> int:
        return POSITION[self.degree][tuple(i - 1 for i in self.indices)]

    @classmethod
    def all(cls, degree: int) -> List["MultiIndex"]:
        return [cls(tuple(i + 1 for i in I)) for I in BASIS[degree]]


@dataclass(frozen=True)
class AltForm:
    """
    Alternating form of fixed degree.

    Attributes:
        degree: Form degree, 0..7.
        coeffs: Array whose last axis holds the C(7, degree) coefficients;
                leading axes, if any, index a batch of points.
    """

    degree: int
    coeffs: np.ndarray

    # lets ndarray * AltForm dispatch to __rmul__
    __array_ufunc__ = None

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs, dtype=float)
        size = n_components(self.degree)
        if coeffs.ndim == 0 or coeffs.shape[-1] != size:
            raise DegreeError(
                f"degree-{self.degree} form needs {size} coefficients, got shape {coeffs.shape}"
            )
        if not np.all(np.isfinite(coeffs)):
            raise NonFiniteError("form coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zero(cls, degree: int, batch: Tuple[int, ...] = ()) -> "AltForm":
        return cls(degree, np.zeros(batch + (n_components(degree),)))

    @classmethod
    def basis(cls, *labels: int) -> "AltForm":
        """e^{i1...ik} from 1-based labels, e.g. AltForm.basis(1, 2) is e^12."""
        index = MultiIndex(tuple(labels))
        coeffs = np.zeros(n_components(index.degree))
        coeffs[index.position] = 1.0
        return cls(index.degree, coeffs)

    @classmethod
    def from_terms(cls, degree: int, terms: Dict[Tuple[int, ...], float]) -> "AltForm":
        coeffs = np.zeros(n_components(degree))
        for labels, value in terms.items():
            index = MultiIndex(labels)
            if index.degree != degree:
                raise DegreeError(f"term {labels} does not have degree {degree}")
            coeffs[index.position] += value
        return cls(degree, coeffs)

    @property
    def batch_shape(self) -> Tuple[int, ...]:
        return self.coeffs.shape[:-1]

    def top(self) -> np.ndarray:
        if self.degree != DIM:
            raise DegreeError("top coefficient only exists for 7-forms")
        return self.coeffs[..., 0]

    def _check_same_degree(self, other: "AltForm") -> None:
        if other.degree != self.degree:
            raise DegreeError(f"degree mismatch: {self.degree} vs {other.degree}")

    def __add__(self, other: "AltForm") -> "AltForm":
        self._check_same_degree(other)
        return AltForm(self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other: "AltForm") -> "AltForm":
        self._check_same_degree(other)
        return AltForm(self.degree, self.coeffs - other.coeffs)

    def __neg__(self) -> "AltForm":
        return AltForm(self.degree, -self.coeffs)

    def __mul__(self, scalar: Scalar) -> "AltForm":
        return AltForm(self.degree, np.asarray(scalar)[..., None] * self.coeffs)

    __rmul__ = __mul__

    def wedge(self, other: "AltForm") -> "AltForm":
        return wedge(self, other)


def compound(matrix: np.ndarray, degree: int, lower: np.ndarray | None = None) -> np.ndarray:
    """
    k-th compound matrix: entry (I, J) is the minor det(matrix[I, J]).

    Built by Laplace expansion along the first row of each minor, reusing the
    (k-1)-th compound when it is passed in.
    """
    batch = matrix.shape[:-2]
    if degree == 0:
        return np.ones(batch + (1, 1))
    if degree == 1:
        return np.array(matrix, dtype=float)
    if lower is None:
        lower = compound(matrix, degree - 1)
    table = _COMPOUND_TABLES[degree]
    size = n_components(degree)
    out = np.zeros(batch + (size, size))
    rows = table.first[:, None]
    minors = table.rest[:, None]
    for p in range(degree):
        sign = -1.0 if p % 2 else 1.0
        out += sign * matrix[..., rows, table.column[None, :, p]] * lower[..., minors, table.drop[None, :, p]]
    return out


@dataclass(frozen=True)
class Metric:
    """
    Positive definite metric, possibly batched over points.

    Attributes:
        g:         Symmetric matrices, shape (..., 7, 7).
        g_inv:     Their inverses.
        vol_scale: sqrt(det g), shape (...).
    """

    g: np.ndarray
    g_inv: np.ndarray
    vol_scale: np.ndarray
    _raised: Dict[int, np.ndarray] = field(default_factory=dict, repr=False, compare=False)
    _lowered: Dict[int, np.ndarray] = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_matrix(cls, g: np.ndarray) -> "Metric":
        g = np.asarray(g, dtype=float)
        if g.shape[-2:] != (DIM, DIM):
            raise ValueError(f"metric must have shape (..., 7, 7), got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("metric entries must be finite")
        scale = max(1.0, float(np.max(np.abs(g))))
        if np.max(np.abs(g - np.swapaxes(g, -1, -2))) > 1e-12 * scale:
            raise ValueError("metric must be symmetric")
        try:
            chol = np.linalg.cholesky(g)
        except np.linalg.LinAlgError as exc:
            raise PositivityError("metric is not positive definite") from exc
        vol_scale = np.asarray(np.prod(np.diagonal(chol, axis1=-2, axis2=-1), axis=-1))
        g_inv = np.linalg.inv(g)
        g_inv = 0.5 * (g_inv + np.swapaxes(g_inv, -1, -2))
        return cls(g=g, g_inv=g_inv, vol_scale=vol_scale)

    @classmethod
    def identity(cls) -> "Metric":
        return cls.from_matrix(np.eye(DIM))

    def raised(self, degree: int) -> np.ndarray:
        """Compound of g_inv: the Gram matrix of degree-k forms."""
        if degree not in self._raised:
            lower = self.raised(degree - 1) if degree >= 2 else None
            self._raised[degree] = compound(self.g_inv, degree, lower)
        return self._raised[degree]

    def lowered(self, degree: int) -> np.ndarray:
        """Compound of g, the inverse of raised(degree)."""
        if degree not in self._lowered:
            lower = self.lowered(degree - 1) if degree >= 2 else None
            self._lowered[degree] = compound(self.g, degree, lower)
        return self._lowered[degree]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.g)

    def condition_number(self) -> np.ndarray:
        eig = self.eigenvalues()
        return eig[..., -1] / eig[..., 0]

    def scaled(self, factor: float) -> "Metric":
        return Metric.from_matrix(factor * self.g)


def _apply(matrix: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...j->...i", matrix, coeffs)


def wedge(a: AltForm, b: AltForm) -> AltForm:
    k, l = a.degree, b.degree
    if k + l > DIM:
        raise DegreeError(f"wedge of degrees {k} and {l} overflows dimension {DIM}")
    table = _WEDGE_TABLES[k, l]
    products = a.coeffs[..., table.left_index] * b.coeffs[..., table.right_index] * table.sign
    return AltForm(k + l, products @ table.scatter)


def interior(v: np.ndarray, a: AltForm) -> AltForm:
    """Contraction v ⌟ a of a vector (last axis of length 7) into a form."""
    if a.degree == 0:
        raise DegreeError("cannot contract a vector into a 0-form")
    v = np.asarray(v, dtype=float)
    table = _INTERIOR_TABLES[a.degree]
    products = v[..., table.left_index] * a.coeffs[..., table.right_index] * table.sign
    return AltForm(a.degree - 1, products @ table.scatter)


def hodge_star_matrix(degree: int, m: Metric) -> np.ndarray:
    """Matrix of * from degree-k to degree-(7-k) forms, batched like the metric."""
    signs = _STAR_SIGNS[degree]
    return m.vol_scale[..., None, None] * np.einsum("ij,...jk->...ik", signs, m.raised(degree))


def hodge_star(a: AltForm, m: Metric) -> AltForm:
    raised = _apply(m.raised(a.degree), a.coeffs)
    star = np.einsum("ij,...j->...i", _STAR_SIGNS[a.degree], raised)
    return AltForm(DIM - a.degree, m.vol_scale[..., None] * star)


def form_inner(a: AltForm, b: AltForm, m: Metric) -> np.ndarray:
    if a.degree != b.degree:
        raise DegreeError(f"inner product needs equal degrees, got {a.degree} and {b.degree}")
    return np.einsum("...i,...ij,...j->...", a.coeffs, m.raised(a.degree), b.coeffs)


def form_norm_squared(a: AltForm, m: Metric) -> np.ndarray:
    return form_inner(a, a, m)


def volume_form(m: Metric) -> AltForm:
    return AltForm(DIM, np.asarray(m.vol_scale)[..., None])


def lower_index(v: np.ndarray, m: Metric) -> AltForm:
    """v♭ as a 1-form."""
    return AltForm(1, _apply(m.g, v))


def raise_index(alpha: AltForm, m: Metric) -> np.ndarray:
    """α♯ as a vector."""
    if alpha.degree != 1:
        raise DegreeError("only 1-forms can be raised to vectors")
    return _apply(m.g_inv, alpha.coeffs)


def basis_one_forms() -> AltForm:
    """The seven coordinate 1-forms stacked along a leading axis."""
    return AltForm(1, np.eye(DIM))


def wedge_operator(b: AltForm, degree: int) -> np.ndarray:
    """Matrix of x -> b ∧ x on degree-k forms, shape (..., C(7, k+l), C(7, k))."""
    size = n_components(degree)
    lifted = AltForm(b.degree, b.coeffs[..., None, :])
    images = wedge(lifted, AltForm(degree, np.eye(size)))
    return np.swapaxes(images.coeffs, -1, -2)


def interior_operator(v: np.ndarray, degree: int) -> np.ndarray:
    """Matrix of x -> v ⌟ x on degree-k forms."""
    size = n_components(degree)
    images = interior(np.asarray(v)[..., None, :], AltForm(degree, np.eye(size)))
    return np.swapaxes(images.coeffs, -1, -2)


def derivation_operators(degree: int) -> np.ndarray:
    """
    Matrices E[n, a] of e^a ∧ (e_n ⌟ .) on degree-k forms, shape (7, 7, C, C).

    A matrix A acting on covectors by e^n -> sum_a A[n, a] e^a extends to
    k-forms as the derivation sum_{n,a} A[n, a] E[n, a].
    """
    size = n_components(degree)
    out = np.zeros((DIM, DIM, size, size))
    if degree == 0:
        return out
    eye = np.eye(DIM)
    for n in range(DIM):
        contract = interior_operator(eye[n], degree)
        for a in range(DIM):
            out[n, a] = wedge_operator(AltForm(1, eye[a]), degree - 1) @ contract
    return out
