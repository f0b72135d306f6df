"""Sparse containers and direct solvers with an explicit residual contract.

Storage and factorizations are delegated to :mod:`scipy.sparse`; this module
pins down the two behaviours the solver relies on and scipy does not promise:

* triplet assembly sums duplicates in a deterministic order (stable sort by
  row, then column, then insertion order), so assembled matrices are
  bitwise reproducible;
* every solve verifies the relative residual
  ``||A x - b|| / max(||b||, tiny)`` and raises :class:`SolverError` instead
  of silently returning garbage.
"""

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

#: Relative residual every solve must meet.
RESIDUAL_TOL = 1e-10


class SolverError(RuntimeError):
    """A linear solve failed or missed the residual contract."""


def triplets_to_csr(rows, cols, values, shape):
    """Build a CSR matrix from COO triplets with deterministic summation.

    Duplicate ``(row, col)`` entries are summed in insertion order (stable
    lexicographic sort), which makes the result bitwise reproducible for a
    given triplet stream.

    Parameters
    ----------
    rows, cols : array_like of int
    values : array_like of float
    shape : tuple of int

    Returns
    -------
    scipy.sparse.csr_matrix
    """
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    values = np.asarray(values, dtype=np.float64).ravel()
    if not (rows.shape == cols.shape == values.shape):
        raise ValueError("rows, cols and values must have matching lengths")
    if rows.size and (
        rows.min() < 0 or rows.max() >= shape[0] or cols.min() < 0 or cols.max() >= shape[1]
    ):
        raise ValueError(f"triplet indices out of bounds for shape {shape}")

    order = np.lexsort((cols, rows))  # stable: ties keep insertion order
    rows = rows[order]
    cols = cols[order]
    values = values[order]
    if rows.size:
        first = np.empty(rows.size, dtype=bool)
        first[0] = True
        np.logical_or(rows[1:] != rows[:-1], cols[1:] != cols[:-1], out=first[1:])
        starts = np.flatnonzero(first)
        data = np.add.reduceat(values, starts)
        rows = rows[starts]
        cols = cols[starts]
    else:
        data = values

    indptr = np.zeros(shape[0] + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=shape[0]), out=indptr[1:])
    return sp.csr_matrix((data, cols.astype(np.int64), indptr), shape=shape)


class TripletPattern:
    """Frozen sparsity pattern for repeated triplet assembly.

    Precomputes the stable (row, col, insertion) sort of a fixed triplet
    stream so later assemblies only reorder and sum the new values.  The
    result is bitwise identical to :func:`triplets_to_csr` on the same
    stream.
    """

    def __init__(self, rows, cols, shape):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        self.shape = shape
        self.order = np.lexsort((cols, rows))
        rows = rows[self.order]
        cols = cols[self.order]
        first = np.empty(rows.size, dtype=bool)
        first[0] = True
        np.logical_or(rows[1:] != rows[:-1], cols[1:] != cols[:-1], out=first[1:])
        self.starts = np.flatnonzero(first)
        self.indices = cols[self.starts].astype(np.int64)
        self.indptr = np.zeros(shape[0] + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows[self.starts], minlength=shape[0]), out=self.indptr[1:])

    def build(self, values):
        data = np.add.reduceat(values.ravel()[self.order], self.starts)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=self.shape)


def solve(matrix, rhs, assume_spd=False, method="direct"):
    """Solve ``matrix @ x = rhs`` and enforce the residual contract.

    Parameters
    ----------
    matrix : scipy sparse matrix, square
    rhs : ndarray
    assume_spd : bool
        Hint that the matrix is symmetric positive definite; the direct
        factorization then uses a symmetric-pattern ordering.
    method : {"direct", "iterative"}
        "direct" runs a sparse LU; "iterative" runs ILU-preconditioned
        LGMRES and still has to meet the same residual tolerance.

    Returns
    -------
    ndarray

    Raises
    ------
    SolverError
        On factorization failure, non-finite entries, or a relative residual
        above :data:`RESIDUAL_TOL`.
    """
    n = matrix.shape[0]
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"matrix must be square, got shape {matrix.shape}")
    rhs = np.asarray(rhs, dtype=np.float64).ravel()
    if rhs.size != n:
        raise ValueError(f"rhs length {rhs.size} does not match matrix size {n}")

    csc = matrix.tocsc()
    if method == "direct":
        permc = "MMD_AT_PLUS_A" if assume_spd else "COLAMD"
        try:
            x = spla.splu(csc, permc_spec=permc).solve(rhs)
        except RuntimeError as exc:  # singular factor
            raise SolverError(f"sparse LU factorization failed: {exc}") from exc
    elif method == "iterative":
        try:
            precond = spla.spilu(csc, drop_tol=1e-8, fill_factor=20.0)
        except RuntimeError as exc:
            raise SolverError(f"ILU preconditioner failed: {exc}") from exc
        op = spla.LinearOperator((n, n), precond.solve)
        x, info = spla.lgmres(csc, rhs, M=op, rtol=1e-13, atol=0.0, maxiter=500)
        if info != 0:
            raise SolverError(f"LGMRES did not converge (info={info})")
    else:
        raise ValueError(f"unknown solve method {method!r}")

    if not np.all(np.isfinite(x)):
        raise SolverError("solution contains non-finite entries")
    residual = relative_residual(matrix, x, rhs)
    if residual > RESIDUAL_TOL:
        raise SolverError(
            f"linear solve missed the residual contract: "
            f"relative residual {residual:.3e} > {RESIDUAL_TOL:.1e}"
        )
    return x


def relative_residual(matrix, x, rhs):
    """``||A x - b||_2 / max(||b||_2, 1e-300)``."""
    num = np.linalg.norm(matrix @ x - rhs)
    return float(num / max(np.linalg.norm(rhs), 1e-300))


def dump_matrix_market(matrix, path, comment=""):
    """Write a sparse matrix in Matrix Market coordinate format."""
    scipy.io.mmwrite(str(path), matrix.tocoo(), comment=comment)


class RefreshingSolver:
    """Direct solver that recycles its factorization across nearby systems.

    Time stepping produces a sequence of matrices that differ only in the
    extrapolated coupling blocks, so a factorization of one step is an
    excellent preconditioner for the next few.  ``solve`` runs iterative
    refinement against the frozen LU and refactors (deterministically) when
    the iteration stalls or becomes too long.  Every returned solution meets
    the same residual contract as :func:`solve`.
    """

    #: refinement target; well below RESIDUAL_TOL to leave safety margin
    REFINE_TOL = 5e-12

    def __init__(self, refresh_after=10, max_refine=30):
        self.refresh_after = refresh_after
        self.max_refine = max_refine
        self._lu = None
        self.factorizations = 0

    def _factorize(self, matrix):
        try:
            self._lu = spla.splu(matrix.tocsc(), permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError(f"sparse LU factorization failed: {exc}") from exc
        self.factorizations += 1

    def _refine(self, matrix, rhs, x):
        """Iterative refinement with the current LU; None if it stalls."""
        b_norm = max(np.linalg.norm(rhs), 1e-300)
        previous = np.inf
        for iteration in range(self.max_refine + 1):
            residual = rhs - matrix @ x
            relative = np.linalg.norm(residual) / b_norm
            if relative <= self.REFINE_TOL:
                return x, iteration
            if relative > 0.5 * previous or iteration == self.max_refine:
                return None, iteration  # stalled or budget exhausted
            x = x + self._lu.solve(residual)
            previous = relative
        return None, self.max_refine

    def solve(self, matrix, rhs, x0=None):
        rhs = np.asarray(rhs, dtype=np.float64).ravel()
        refreshed = self._lu is None
        if refreshed:
            self._factorize(matrix)
        start = self._lu.solve(rhs) if x0 is None else np.asarray(x0, dtype=np.float64)
        x, used = self._refine(matrix, rhs, start)
        if x is None:
            if refreshed:
                raise SolverError(
                    "iterative refinement stalled on a fresh factorization"
                )
            self._factorize(matrix)
            x, used = self._refine(matrix, rhs, self._lu.solve(rhs))
            if x is None:
                raise SolverError(
                    "iterative refinement stalled on a fresh factorization"
                )
        elif used > self.refresh_after:
            # converged but slowly: refresh now so later steps start close
            self._factorize(matrix)

        if not np.all(np.isfinite(x)):
            raise SolverError("solution contains non-finite entries")
        residual = relative_residual(matrix, x, rhs)
        if residual > RESIDUAL_TOL:
            raise SolverError(
                f"linear solve missed the residual contract: "
                f"relative residual {residual:.3e} > {RESIDUAL_TOL:.1e}"
            )
        return x


class BlockSystem:
    """Square block-structured linear system over named fields.

    Fields are declared once with their sizes; matrix blocks address
    ``(row_field, col_field)`` pairs and scalar multiplier columns add a
    single Lagrange unknown whose constraint row is the exact transpose of
    the coupling column.  ``assemble`` produces the monolithic CSR matrix
    and right-hand side in declaration order (fields first, multipliers
    last).
    """

    def __init__(self, fields):
        # fields: ordered (name, size) pairs
        self.names = [name for name, _ in fields]
        sizes = {name: int(size) for name, size in fields}
        if len(self.names) != len(set(self.names)):
            raise ValueError("duplicate field names")
        self.sizes = sizes
        self.offsets = {}
        pos = 0
        for name in self.names:
            self.offsets[name] = pos
            pos += sizes[name]
        self.field_total = pos
        self.blocks = {}
        self.multipliers = []  # (field, vector) in declaration order
        self.rhs = {name: np.zeros(sizes[name]) for name in self.names}

    def set_block(self, row_field, col_field, matrix):
        expected = (self.sizes[row_field], self.sizes[col_field])
        if matrix.shape != expected:
            raise ValueError(
                f"block ({row_field}, {col_field}) has shape {matrix.shape}, "
                f"expected {expected}"
            )
        self.blocks[(row_field, col_field)] = matrix

    def add_multiplier(self, field, vector, rhs=0.0):
        vector = np.asarray(vector, dtype=np.float64).ravel()
        if vector.size != self.sizes[field]:
            raise ValueError(
                f"multiplier on {field!r} has length {vector.size}, "
                f"expected {self.sizes[field]}"
            )
        self.multipliers.append((field, vector, float(rhs)))

    def set_rhs(self, field, vector):
        vector = np.asarray(vector, dtype=np.float64).ravel()
        if vector.size != self.sizes[field]:
            raise ValueError(
                f"rhs for {field!r} has length {vector.size}, "
                f"expected {self.sizes[field]}"
            )
        self.rhs[field] = vector

    @property
    def total_size(self):
        return self.field_total + len(self.multipliers)

    def assemble(self):
        """Return ``(matrix, rhs)`` for the monolithic system."""
        nf = len(self.names)
        nm = len(self.multipliers)
        grid = [[None] * (nf + nm) for _ in range(nf + nm)]
        index = {name: k for k, name in enumerate(self.names)}
        for (rf, cf), block in self.blocks.items():
            grid[index[rf]][index[cf]] = block
        for k, (field, vector, _) in enumerate(self.multipliers):
            col = sp.csc_matrix(vector.reshape(-1, 1))
            grid[index[field]][nf + k] = col
            grid[nf + k][index[field]] = col.T
        matrix = sp.bmat(grid, format="csr")
        rhs = np.concatenate(
            [self.rhs[name] for name in self.names]
            + [np.array([mrhs for _, _, mrhs in self.multipliers])]
        )
        return matrix, rhs

    def extract(self, name, solution):
        """Slice the sub-vector of field ``name`` out of a solution vector."""
        start = self.offsets[name]
        return solution[start : start + self.sizes[name]]
