"""Sparse spin operators and vectorization helpers for n two-level emitters.

Conventions shared by every module:

* emitter 0 is the slowest-varying tensor factor (leftmost Kronecker slot);
* the local basis is ordered |e>, |g> with sigma^z = diag(+1, -1);
* density matrices are vectorized column-major (stacked columns), so the
  superoperator of rho -> A rho B is kron(B.T, A).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)


def site_operator(n: int, m: int, op: np.ndarray) -> sp.csr_matrix:
    """Embed a single-emitter operator at site m of an n-emitter register."""
    left = sp.identity(2**m, format="csr", dtype=complex)
    right = sp.identity(2 ** (n - m - 1), format="csr", dtype=complex)
    return sp.kron(sp.kron(left, sp.csr_matrix(op)), right, format="csr")


@lru_cache(maxsize=16)
def spin_ops(n: int):
    """Cached per-size operator set.

    Returns a dict with per-site lists ``sm``/``sp_``/``sz`` and collective
    ``SX``/``SZ``/``Splus``/``Sminus``, all sparse CSR of dimension 2**n.
    """
    sm = [site_operator(n, m, SIGMA_MINUS) for m in range(n)]
    sp_ = [site_operator(n, m, SIGMA_PLUS) for m in range(n)]
    sz = [site_operator(n, m, SIGMA_Z) for m in range(n)]
    sx = [site_operator(n, m, SIGMA_X) for m in range(n)]
    SX = sum(sx[1:], start=sx[0])
    SZ = sum(sz[1:], start=sz[0])
    Splus = sum(sp_[1:], start=sp_[0])
    Sminus = sum(sm[1:], start=sm[0])
    return {
        "sm": sm,
        "sp": sp_,
        "sz": sz,
        "sx": sx,
        "SX": SX.tocsr(),
        "SZ": SZ.tocsr(),
        "Splus": Splus.tocsr(),
        "Sminus": Sminus.tocsr(),
    }


@lru_cache(maxsize=16)
def pair_products(n: int):
    """Cached sigma_m^+ sigma_n^- products for all ordered pairs (m, n)."""
    ops = spin_ops(n)
    return {
        (m, k): (ops["sp"][m] @ ops["sm"][k]).tocsr()
        for m in range(n)
        for k in range(n)
    }


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-major vectorization."""
    return np.asarray(rho).flatten(order="F")


def unvec(x: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(x.size)))
    return np.asarray(x).reshape((d, d), order="F")


def left_multiply(op: sp.spmatrix) -> sp.csr_matrix:
    """Superoperator of rho -> op @ rho."""
    d = op.shape[0]
    return sp.kron(sp.identity(d, format="csr", dtype=complex), op, format="csr")


def right_multiply(op: sp.spmatrix) -> sp.csr_matrix:
    """Superoperator of rho -> rho @ op."""
    d = op.shape[0]
    return sp.kron(op.T, sp.identity(d, format="csr", dtype=complex), format="csr")


def sandwich(a: sp.spmatrix, b: sp.spmatrix) -> sp.csr_matrix:
    """Superoperator of rho -> a @ rho @ b."""
    return sp.kron(b.T, a, format="csr")


def commutator_super(h: sp.spmatrix) -> sp.csr_matrix:
    """Superoperator of rho -> -i [h, rho]."""
    return -1.0j * (left_multiply(h) - right_multiply(h))


def dissipator_super(lop: sp.spmatrix) -> sp.csr_matrix:
    """Lindblad dissipator rho -> L rho L+ - (L+L rho + rho L+L)/2."""
    ldl = (lop.conj().T @ lop).tocsr()
    return sandwich(lop, lop.conj().T) - 0.5 * (left_multiply(ldl) + right_multiply(ldl))


@lru_cache(maxsize=8)
def emission_superop_pieces(n: int):
    """Per-pair superoperator blocks of the correlated-emission generator.

    The full emission term is sum_mn gamma[m, n] * piece[(m, n)] with
    piece = 2 (sigma_n^+ )^T (x) sigma_m^-  -  1 (x) sigma_m^+ sigma_n^-
            - (sigma_m^+ sigma_n^-)^T (x) 1.
    """
    ops = spin_ops(n)
    prods = pair_products(n)
    pieces = {}
    for m in range(n):
        for k in range(n):
            pmk = prods[(m, k)]
            pieces[(m, k)] = (
                2.0 * sandwich(ops["sm"][m], ops["sp"][k])
                - left_multiply(pmk)
                - right_multiply(pmk)
            ).tocsr()
    return pieces


@lru_cache(maxsize=8)
def dephasing_superop(n: int) -> sp.csr_matrix:
    """Superoperator of rho -> -[Sz, [Sz, rho]]/4 (unit collective rate)."""
    SZ = spin_ops(n)["SZ"]
    SZ2 = (SZ @ SZ).tocsr()
    return (
        -0.25
        * (left_multiply(SZ2) - 2.0 * sandwich(SZ, SZ) + right_multiply(SZ2))
    ).tocsr()


@lru_cache(maxsize=16)
def excitation_sectors(n: int):
    """Basis states grouped by excitation number.

    Returns a list of index arrays; entry k holds the computational-basis
    indices with k excited emitters.  Bit (n-1-m) of the index corresponds
    to emitter m, and a 0 bit means excited (|e> is local index 0).
    """
    counts = [[] for _ in range(n + 1)]
    for idx in range(2**n):
        excited = n - bin(idx).count("1")
        counts[excited].append(idx)
    return [np.array(c, dtype=np.int64) for c in counts]
