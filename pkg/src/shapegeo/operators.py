"""Bochner Laplacian along a curve, its powers, and the metric operator.

The Laplacian is assembled in weak form from edge terms,

    a^T L b = sum_e (h / s_e) <Pi_e da_e, Pi_e db_e>,

with ``da_e`` the forward difference on edge ``e``, ``s_e`` its length and
``Pi_e`` the projection to the sphere's tangent space at the edge foot
(identity in flat space).  ``Delta = W^{-1} L`` with ``W = diag(w)``, so the
discrete metric matrix ``M = W P = sum Phi_i(Vol) L (W^{-1} L)^{i-1}`` is
exactly symmetric.

Matrices are kept block-banded on the periodic node index:
``blocks[o + bb, j] = A[j, j + o]`` with ``d x d`` blocks, where ``d = 1``
in flat space (the same scalar operator acts on every component) and
``d = 3`` on the sphere.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from . import kernels
from .errors import SolverError, SpecError
from .geometry import Immersion, check_field
from .metric_spec import CurvatureWeighted, MetricSpec

__all__ = [
    "laplacian",
    "laplacian_power",
    "laplacian_blocks",
    "assemble_P",
    "OperatorHandle",
    "BlockBanded",
    "laplacian_spectrum",
]

CG_TOL = 1e-12


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def laplacian(f: Immersion, h) -> np.ndarray:
    """Weak-form Bochner Laplacian ``Delta h`` (positive semidefinite)."""
    h = check_field(f, h, "h")
    geo = f.geometry
    amb = f.ambient
    dh = (np.roll(h, -1, axis=0) - h) / geo.h
    if not amb.flat:
        dh = amb.project(geo.edge_foot, dh)
    q = dh / geo.edge_speed[:, None]
    Lh = np.roll(q, 1, axis=0) - q
    if not amb.flat:
        Lh = amb.project(f.nodes, Lh)
    return Lh / geo.w[:, None]


def laplacian_power(f: Immersion, h, i: int) -> np.ndarray:
    """``Delta^i h``; ``i = 0`` returns ``h``."""
    if int(i) != i or i < 0:
        raise SpecError(f"Laplacian power must be a nonnegative integer, got {i}")
    h = check_field(f, h, "h")
    out = h
    for _ in range(int(i)):
        out = laplacian(f, out)
    return out


class BlockBanded:
    """Periodic block-banded matrix ``blocks[o + bb, j] = A[j, (j + o) % N]``."""

    def __init__(self, blocks):
        self.blocks = blocks
        self.bb = (blocks.shape[0] - 1) // 2
        self.N = blocks.shape[1]
        self.d = blocks.shape[2]

    @classmethod
    def diagonal(cls, diag, d):
        N = diag.shape[0]
        blocks = np.zeros((1, N, d, d), dtype=diag.dtype)
        blocks[0] = diag[:, None, None] * np.eye(d, dtype=diag.dtype)
        return cls(blocks)

    def __add__(self, other):
        bb = max(self.bb, other.bb)
        out = np.zeros((2 * bb + 1, self.N, self.d, self.d), dtype=np.result_type(self.blocks, other.blocks))
        out[bb - self.bb : bb + self.bb + 1] += self.blocks
        out[bb - other.bb : bb + other.bb + 1] += other.blocks
        return BlockBanded(out)

    def scale(self, c):
        return BlockBanded(c * self.blocks)

    def row_scale(self, r):
        """``diag(r) @ A``."""
        return BlockBanded(self.blocks * r[None, :, None, None])

    def matmul(self, other):
        a, b = self.bb, other.bb
        bb = a + b
        N = self.N
        out = np.zeros((2 * bb + 1, N, self.d, self.d), dtype=np.result_type(self.blocks, other.blocks))
        for e in range(-a, a + 1):
            A_e = self.blocks[e + a]
            for o2 in range(-b, b + 1):
                # C[j, j+e+o2] += A[j, j+e] B[j+e, j+e+o2]
                B_o = np.roll(other.blocks[o2 + b], -e, axis=0)
                out[e + o2 + bb] += np.einsum("jab,jbc->jac", A_e, B_o)
        return BlockBanded(out)

    def apply(self, x):
        """Multiply by an (N, n) nodal field."""
        y = np.zeros(np.broadcast_shapes(x.shape), dtype=np.result_type(self.blocks, x))
        for o in range(-self.bb, self.bb + 1):
            xs = np.roll(x, -o, axis=0)
            blk = self.blocks[o + self.bb]
            if self.d == 1:
                y += blk[:, 0, 0][:, None] * xs
            else:
                y += np.einsum("jab,jb->ja", blk, xs)
        return y

    def to_sparse(self):
        N, d = self.N, self.d
        idx = np.arange(N)
        rows, cols, vals = [], [], []
        for o in range(-self.bb, self.bb + 1):
            for c in range(d):
                for c2 in range(d):
                    rows.append(d * idx + c)
                    cols.append(d * ((idx + o) % N) + c2)
                    vals.append(self.blocks[o + self.bb, :, c, c2])
        A = scipy.sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N * d, N * d)
        )
        return A.tocsc()

    def to_dense(self):
        N, d = self.N, self.d
        A = np.zeros((N * d, N * d), dtype=self.blocks.dtype)
        idx = np.arange(N)
        for o in range(-self.bb, self.bb + 1):
            cols = (idx + o) % N
            for c in range(d):
                for c2 in range(d):
                    np.add.at(A, (d * idx + c, d * cols + c2), self.blocks[o + self.bb, :, c, c2])
        return A

    def scalar_bandwidth(self):
        return self.d * self.bb + self.d - 1

    def sym_bands(self):
        """Upper symmetric band storage on the interleaved index ``d*j + c``."""
        N, d = self.N, self.d
        b = self.scalar_bandwidth()
        n = N * d
        if n < 2 * b + 1:
            return None
        bands = np.zeros((b + 1, n), dtype=self.blocks.dtype)
        for o in range(-self.bb, self.bb + 1):
            for c in range(d):
                for c2 in range(d):
                    D = d * o + c2 - c
                    if D < 0:
                        continue
                    bands[D, c::d] += self.blocks[o + self.bb, :, c, c2]
        return bands

    def symmetry_defect(self):
        """Relative max-norm of ``A - A^T`` (computed from the blocks)."""
        bb = self.bb
        worst = 0.0
        scale = np.max(np.abs(self.blocks))
        for o in range(-bb, bb + 1):
            # A[j, j+o]^T should equal A[j+o, j] = blocks[-o, j+o]
            lhs = np.swapaxes(self.blocks[o + bb], 1, 2)
            rhs = np.roll(self.blocks[-o + bb], -o, axis=0)
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        return worst / scale if scale > 0 else 0.0


def laplacian_blocks(f: Immersion) -> BlockBanded:
    """Weak-form ``L`` (so that ``Delta = W^{-1} L``) as a block-banded matrix."""
    geo = f.geometry
    amb = f.ambient
    N = f.N
    hh = geo.h
    dtype = f.nodes.dtype
    if amb.flat:
        d = 1
        B = (1 / geo.edge_speed)[:, None, None] / hh
    else:
        d = 3
        xe = geo.edge_foot
        Pe = np.eye(3, dtype=dtype)[None] - xe[:, :, None] * xe[:, None, :] / amb.radius**2
        B = Pe / geo.edge_speed[:, None, None] / hh
    blocks = np.zeros((3, N, d, d), dtype=dtype)
    blocks[1] = B + np.roll(B, 1, axis=0)
    blocks[2] = -B  # A[j, j+1] from edge j
    blocks[0] = -np.roll(B, 1, axis=0)  # A[j, j-1] from edge j-1
    if not amb.flat:
        x = f.nodes
        Pn = np.eye(3, dtype=dtype)[None] - x[:, :, None] * x[:, None, :] / amb.radius**2
        for o in (-1, 0, 1):
            Pr = np.roll(Pn, -o, axis=0)
            blocks[o + 1] = np.einsum("jab,jbc,jcd->jad", Pn, blocks[o + 1], Pr)
    return BlockBanded(blocks)


def _curvature_weight(f, A):
    k = f.geometry.traceS
    return 1 + A * _dot(k, k)


class OperatorHandle:
    """Metric operator ``P`` at a fixed immersion.

    ``apply`` realizes ``P``, ``apply_weighted`` the symmetric matrix
    ``M = W P`` (a momentum density), and ``solve`` / ``solve_weighted`` their
    inverses.  Non-order-zero solves use Jacobi-preconditioned CG on the
    assembled band storage (``solver="cg"``, dense Cholesky when the grid is
    too coarse for the band layout) or a sparse LU factorization
    (``solver="direct"``), which stays accurate when high Laplacian powers
    make the system too ill-conditioned for the CG tolerance.
    """

    def __init__(self, spec: MetricSpec, f: Immersion, cg_tol=CG_TOL, max_iter=None, solver="cg"):
        if solver not in ("cg", "direct"):
            raise SpecError(f"solver must be 'cg' or 'direct', got {solver!r}")
        self.solver = solver
        self.spec = spec
        self.f = f
        self.geometry = f.geometry
        self.cg_tol = cg_tol
        n = f.ambient.dim
        self.max_iter = max_iter if max_iter is not None else 50 * n * f.N
        self.iterations = 0
        self.last_residual = 0.0
        V = self.geometry.Vol
        if isinstance(spec, CurvatureWeighted):
            self.terms = []
            self.pointwise = _curvature_weight(f, spec.A)
        else:
            self.terms = [(w(V), i) for w, i in spec.terms()]
            for c, i in self.terms:
                if not c > 0:
                    raise SpecError(f"weight of Delta^{i} is not positive at Vol={V}")
            self.pointwise = None
            if spec.order_zero:
                self.pointwise = sum(c for c, i in self.terms) + 0 * self.geometry.w
        self._matrix = None
        self._bands = None
        self._dense_chol = None
        self._lu = None

    @property
    def order_zero(self):
        return self.pointwise is not None

    def apply(self, h):
        h = check_field(self.f, h, "h")
        if self.order_zero:
            return self.pointwise[:, None] * h
        out = 0
        cur = h
        done = 0
        for c, i in sorted(self.terms, key=lambda t: t[1]):
            while done < i:
                cur = laplacian(self.f, cur)
                done += 1
            out = out + c * cur
        return out

    def apply_weighted(self, h):
        return self.geometry.w[:, None] * self.apply(h)

    def matrix(self) -> BlockBanded:
        """Assembled symmetric ``M = W P`` as a :class:`BlockBanded`."""
        if self._matrix is None:
            f = self.f
            geo = self.geometry
            d = 1 if f.ambient.flat else 3
            if self.order_zero:
                self._matrix = BlockBanded.diagonal(geo.w * self.pointwise, d)
            else:
                L = laplacian_blocks(f)
                winv = 1 / geo.w
                total = None
                Mi = None
                for i in range(0, max(i for _, i in self.terms) + 1):
                    if i == 0:
                        Mi = BlockBanded.diagonal(geo.w, d)
                    elif i == 1:
                        Mi = L
                    else:
                        Mi = Mi.matmul(L.row_scale(winv))
                    c = sum(c for c, k in self.terms if k == i)
                    if c:
                        term = Mi.scale(c)
                        total = term if total is None else total + term
                self._matrix = total
        return self._matrix

    def solve_weighted(self, p):
        """Return ``x`` with ``M x = p``."""
        p = np.asarray(p)
        f = self.f
        if self.order_zero:
            return p / (self.geometry.w * self.pointwise)[:, None]
        M = self.matrix()
        if f.ambient.flat:
            rhs = p
        else:
            rhs = p.reshape(-1, 1)
        if self.solver == "direct":
            if self._lu is None:
                self._lu = scipy.sparse.linalg.splu(M.to_sparse())
            x = self._lu.solve(np.asarray(rhs, dtype=float))
            x = x.reshape(p.shape)
            return x if f.ambient.flat else f.ambient.project(f.nodes, x)
        if self._bands is None and self._dense_chol is None:
            bands = M.sym_bands()
            if bands is None:
                self._dense_chol = scipy.linalg.cho_factor(M.to_dense())
            else:
                self._bands = bands
        if self._bands is not None:
            x, it, res = kernels.banded_pcg(self._bands, rhs, self.cg_tol, self.max_iter)
            self.iterations = it
            self.last_residual = res
            if not res <= self.cg_tol:
                raise SolverError(
                    f"CG did not converge in {it} iterations (relative residual {res:.3e})",
                    residual=res,
                )
        else:
            x = scipy.linalg.cho_solve(self._dense_chol, rhs)
        x = x.reshape(p.shape)
        if not f.ambient.flat:
            x = f.ambient.project(f.nodes, x)
        return x

    def solve(self, k):
        """Return ``h`` with ``P h = k``."""
        k = check_field(self.f, k, "k")
        return self.solve_weighted(self.geometry.w[:, None] * k)

    def inner(self, h, k):
        """Discrete metric ``sum_j <(W P h)_j, k_j>``."""
        return np.sum(self.apply_weighted(h) * k)


def assemble_P(spec: MetricSpec, f: Immersion, **kw) -> OperatorHandle:
    """Metric operator handle for ``spec`` at ``f``."""
    return OperatorHandle(spec, f, **kw)


def laplacian_spectrum(f: Immersion) -> np.ndarray:
    """Eigenvalues of the discrete Laplacian (generalized problem ``L v = lam W v``).

    In flat space the scalar spectrum is returned (each value has
    multiplicity ``n`` on vector fields).  On the sphere the problem is
    restricted to tangent fields.
    """
    geo = f.geometry
    L = laplacian_blocks(f).to_dense()
    if f.ambient.flat:
        return scipy.linalg.eigh(L, np.diag(geo.w), eigvals_only=True)
    x = f.nodes / f.ambient.radius
    tau = geo.unit_tangent
    nu = np.cross(x, tau)
    N = f.N
    Q = np.zeros((3 * N, 2 * N))
    for j in range(N):
        Q[3 * j : 3 * j + 3, 2 * j] = tau[j]
        Q[3 * j : 3 * j + 3, 2 * j + 1] = nu[j]
    Wd = np.repeat(geo.w, 2)
    return scipy.linalg.eigh(Q.T @ L @ Q, np.diag(Wd), eigvals_only=True)
