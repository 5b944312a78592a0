"""Certified dense Hermitian matrices and their spectral calculus.

Construction validates hermiticity once; everything downstream (spectral
functions, Loewner-order tests, traces) can then rely on real spectra.
All operations are pure functions of immutable inputs and are safe to
share across parallel workers.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

HERMITICITY_RTOL = 1e-12     # asymmetry tolerance, relative to max |entry|
RECONSTRUCTION_RTOL = 1e-10  # U diag(w) U* accuracy, relative to d * max |w|
TRACE_IMAG_RTOL = 1e-10      # imaginary residue allowed when extracting a real trace

ENSEMBLE_KINDS = (
    "gaussian-hermitian",
    "diagonal",
    "psd",
    "low-rank",
    "commuting-pair",
    "integer-entry",
)


class HermiticityError(ValueError):
    """Raised when an input matrix is not Hermitian within tolerance."""

    def __init__(self, max_asymmetry: float, tolerance: float):
        self.max_asymmetry = float(max_asymmetry)
        self.tolerance = float(tolerance)
        super().__init__(
            f"matrix is not Hermitian: max |A - A*| = {self.max_asymmetry:.6e} "
            f"exceeds tolerance {self.tolerance:.6e}"
        )


class SpectralDomainError(ValueError):
    """Raised when a scalar function is undefined at an eigenvalue."""

    def __init__(self, eigenvalue: float, detail: str = ""):
        self.eigenvalue = float(eigenvalue)
        msg = f"scalar function undefined at eigenvalue {self.eigenvalue!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class LoewnerCheck(NamedTuple):
    """Outcome of a semidefinite-order test; min_eigenvalue certifies failures."""

    holds: bool
    min_eigenvalue: float


class HermitianMatrix:
    """Dense complex square matrix certified Hermitian at construction.

    Entries with asymmetry below ``HERMITICITY_RTOL * max|entry|`` are
    symmetrized to (A + A*)/2; anything worse is rejected so that real-trace
    extraction stays honest downstream.  The stored array is read-only.
    """

    __slots__ = ("mat",)

    def __init__(self, entries):
        arr = np.array(entries, dtype=np.complex128, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise ValueError("dimension must be >= 1")
        scale = float(np.abs(arr).max()) if arr.size else 0.0
        asym = float(np.abs(arr - arr.conj().T).max())
        tol = HERMITICITY_RTOL * scale
        if asym > tol:
            raise HermiticityError(asym, tol)
        sym = (arr + arr.conj().T) / 2.0
        sym.setflags(write=False)
        self.mat = sym

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is not None:
            return np.asarray(self.mat, dtype=dtype)
        return self.mat

    def __eq__(self, other):
        if not isinstance(other, HermitianMatrix):
            return NotImplemented
        return self.mat.shape == other.mat.shape and bool(np.array_equal(self.mat, other.mat))

    __hash__ = None

    def __repr__(self):
        return f"HermitianMatrix(dim={self.dim})"

    @classmethod
    def identity(cls, dim: int) -> "HermitianMatrix":
        return cls(np.eye(dim))

    @classmethod
    def zeros(cls, dim: int) -> "HermitianMatrix":
        return cls(np.zeros((dim, dim)))

    @classmethod
    def diagonal(cls, values) -> "HermitianMatrix":
        return cls(np.diag(np.asarray(values, dtype=float)))


def _coerce(A) -> HermitianMatrix:
    return A if isinstance(A, HermitianMatrix) else HermitianMatrix(A)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigen-decomposition A = U diag(eigenvalues) U*, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.conj().T


def spectral_decompose(A) -> SpectralDecomposition:
    """Decompose a Hermitian matrix; the reconstruction invariant is re-checked.

    Raises
    ------
    HermiticityError
        If the input is not Hermitian within tolerance.
    ArithmeticError
        If the eigensolver output fails the reconstruction bound
        ``|U diag(w) U* - A| <= RECONSTRUCTION_RTOL * d * max|w|``.
    """
    A = _coerce(A)
    evals, evecs = np.linalg.eigh(A.mat)
    dec = SpectralDecomposition(evals, evecs)
    anchor = A.dim * max(1e-300, float(np.abs(evals).max()) if evals.size else 0.0)
    err = float(np.abs(dec.reconstruct() - A.mat).max())
    if err > RECONSTRUCTION_RTOL * anchor:
        raise ArithmeticError(
            f"spectral reconstruction error {err:.3e} exceeds {RECONSTRUCTION_RTOL * anchor:.3e}"
        )
    return dec


def _apply_scalar(f: Callable, evals: np.ndarray) -> np.ndarray:
    """Apply a real scalar function to eigenvalues, policing its domain."""
    vals = None
    with np.errstate(all="ignore"):
        try:
            cand = np.asarray(f(evals))
            if cand.shape == evals.shape:
                vals = cand.astype(np.complex128)
        except (TypeError, ValueError, ZeroDivisionError, OverflowError):
            vals = None
        if vals is None:
            out = []
            for lam in evals:
                try:
                    out.append(complex(f(float(lam))))
                except (TypeError, ValueError, ZeroDivisionError, OverflowError) as exc:
                    raise SpectralDomainError(lam, str(exc)) from exc
            vals = np.asarray(out, dtype=np.complex128)
    finite = np.isfinite(vals)
    if not finite.all():
        bad = int(np.argmin(finite))
        raise SpectralDomainError(evals[bad], "non-finite value")
    imag_tol = 1e-12 * np.maximum(1.0, np.abs(vals))
    complex_out = np.abs(vals.imag) > imag_tol
    if complex_out.any():
        bad = int(np.argmax(complex_out))
        raise SpectralDomainError(evals[bad], "complex value")
    return vals.real


def matrix_function(A, f: Callable) -> HermitianMatrix:
    """Spectral calculus: U diag(f(w)) U* for Hermitian A = U diag(w) U*.

    ``f`` must be defined (real and finite) on every eigenvalue of A;
    a violation raises :class:`SpectralDomainError` naming the eigenvalue.
    """
    dec = spectral_decompose(A)
    fvals = _apply_scalar(f, dec.eigenvalues)
    out = (dec.eigenvectors * fvals) @ dec.eigenvectors.conj().T
    return HermitianMatrix(out)


def matrix_exp(A) -> HermitianMatrix:
    """Matrix exponential of a Hermitian matrix via spectral calculus."""
    return matrix_function(A, np.exp)


def _parts(A) -> tuple[HermitianMatrix, HermitianMatrix]:
    dec = spectral_decompose(A)
    U = dec.eigenvectors
    pos = (U * np.clip(dec.eigenvalues, 0.0, None)) @ U.conj().T
    neg = (U * np.clip(-dec.eigenvalues, 0.0, None)) @ U.conj().T
    return HermitianMatrix(pos), HermitianMatrix(neg)


def positive_part(A) -> HermitianMatrix:
    """Spectral truncation to nonnegative eigenvalues (PSD)."""
    return _parts(A)[0]


def negative_part(A) -> HermitianMatrix:
    """PSD matrix N with A = positive_part(A) - N; N = U diag(max(-w,0)) U*."""
    return _parts(A)[1]


def pos_neg_parts(A) -> tuple[HermitianMatrix, HermitianMatrix]:
    """Both spectral parts from a single decomposition (so they commute exactly)."""
    return _parts(A)


def psd_order_leq(A, B, tol: float = 1e-10) -> LoewnerCheck:
    """Test A <= B in the Loewner order: holds iff lambda_min(B - A) >= -tol."""
    A, B = _coerce(A), _coerce(B)
    if A.dim != B.dim:
        raise ValueError(f"dimension mismatch: {A.dim} vs {B.dim}")
    lam_min = float(np.linalg.eigvalsh(B.mat - A.mat)[0])
    return LoewnerCheck(lam_min >= -tol, lam_min)


def spectral_norm(A) -> float:
    """Largest absolute eigenvalue."""
    A = _coerce(A)
    evals = np.linalg.eigvalsh(A.mat)
    return float(np.abs(evals).max())


def trace_real(A) -> float:
    """Real trace; imaginary residue above TRACE_IMAG_RTOL (anchored) is an error."""
    mat = np.asarray(A, dtype=np.complex128)
    tr = complex(np.trace(mat))
    anchor = max(1.0, float(np.abs(np.diagonal(mat)).sum()))
    if abs(tr.imag) > TRACE_IMAG_RTOL * anchor:
        raise ValueError(f"trace has imaginary residue {tr.imag:.3e} beyond tolerance")
    return tr.real


@dataclass(frozen=True)
class EnsembleSpec:
    """Seeded random-matrix ensemble specification.

    kind : one of ENSEMBLE_KINDS
    dim : matrix dimension d >= 1
    scale : positive magnitude parameter
    seed : 64-bit unsigned seed; output is a deterministic function of it
    """

    kind: str
    dim: int
    scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ENSEMBLE_KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not self.scale > 0:
            raise ValueError("scale must be > 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


def _gaussian_hermitian(rng, d: int, scale: float) -> np.ndarray:
    M = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (M + M.conj().T) / 2.0


def sample_ensemble(spec: EnsembleSpec):
    """Draw from the ensemble; ``commuting-pair`` returns a pair sharing a basis."""
    rng = np.random.default_rng(int(spec.seed))
    d, scale = spec.dim, spec.scale
    if spec.kind == "gaussian-hermitian":
        return HermitianMatrix(_gaussian_hermitian(rng, d, scale))
    if spec.kind == "diagonal":
        return HermitianMatrix(np.diag(scale * rng.normal(size=d)))
    if spec.kind == "psd":
        X = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2.0)
        return HermitianMatrix(scale * (X @ X.conj().T) / d)
    if spec.kind == "low-rank":
        r = max(1, d // 2)
        H = np.zeros((d, d), dtype=np.complex128)
        for _ in range(r):
            v = rng.normal(size=d) + 1j * rng.normal(size=d)
            v /= np.linalg.norm(v)
            H += (scale * rng.normal()) * np.outer(v, v.conj())
        return HermitianMatrix((H + H.conj().T) / 2.0)
    if spec.kind == "commuting-pair":
        basis = np.linalg.eigh(_gaussian_hermitian(rng, d, 1.0))[1]
        w1 = scale * rng.normal(size=d)
        w2 = scale * rng.normal(size=d)
        A = (basis * w1) @ basis.conj().T
        B = (basis * w2) @ basis.conj().T
        return HermitianMatrix(A), HermitianMatrix(B)
    if spec.kind == "integer-entry":
        m = max(1, int(round(scale)))
        S = rng.integers(-m, m + 1, size=(d, d))
        K = rng.integers(-m, m + 1, size=(d, d))
        real = np.triu(S) + np.triu(S, 1).T
        imag = np.triu(K, 1) - np.triu(K, 1).T
        return HermitianMatrix(real.astype(float) + 1j * imag.astype(float))
    raise ValueError(f"unknown ensemble kind {spec.kind!r}")


def hermitian_to_params(A) -> np.ndarray:
    """Flatten the real degrees of freedom: diagonal, Re(upper), Im(upper)."""
    mat = _coerce(A).mat
    d = mat.shape[0]
    iu = np.triu_indices(d, 1)
    return np.concatenate([mat.diagonal().real, mat[iu].real, mat[iu].imag])


def hermitian_from_params(dim: int, params) -> HermitianMatrix:
    """Inverse of :func:`hermitian_to_params`; re-certifies hermiticity."""
    params = np.asarray(params, dtype=float)
    n_off = dim * (dim - 1) // 2
    if params.size != dim + 2 * n_off:
        raise ValueError("parameter vector has wrong length")
    mat = np.zeros((dim, dim), dtype=np.complex128)
    mat[np.diag_indices(dim)] = params[:dim]
    iu = np.triu_indices(dim, 1)
    upper = params[dim:dim + n_off] + 1j * params[dim + n_off:]
    mat[iu] = upper
    mat[(iu[1], iu[0])] = upper.conj()
    return HermitianMatrix(mat)


def matrix_to_obj(A) -> dict:
    """Structured-text form: {"dim": d, "entries": [[[re, im], ...], ...]}."""
    mat = _coerce(A).mat
    entries = [[[float(z.real), float(z.imag)] for z in row] for row in mat]
    return {"dim": int(mat.shape[0]), "entries": entries}


def matrix_from_obj(obj: dict) -> HermitianMatrix:
    """Parse and validate the structured-text matrix form."""
    d = int(obj["dim"])
    entries = obj["entries"]
    if len(entries) != d or any(len(row) != d for row in entries):
        raise ValueError("entries are not a d x d array")
    arr = np.array(
        [[complex(cell[0], cell[1]) for cell in row] for row in entries],
        dtype=np.complex128,
    )
    return HermitianMatrix(arr)


def save_matrix(path, A) -> None:
    with open(path, "w") as fh:
        json.dump(matrix_to_obj(A), fh, sort_keys=True)
        fh.write("\n")


def load_matrix(path) -> HermitianMatrix:
    with open(path) as fh:
        return matrix_from_obj(json.load(fh))


def inputs_digest(matrices: Sequence, params: dict | None = None) -> str:
    """Short stable hash of matrix inputs plus scalar parameters."""
    h = hashlib.sha256()
    for M in matrices:
        arr = np.ascontiguousarray(np.asarray(M, dtype=np.complex128))
        h.update(repr(arr.shape).encode())
        h.update(arr.tobytes())
    if params:
        h.update(json.dumps(params, sort_keys=True, default=float).encode())
    return h.hexdigest()[:16]
