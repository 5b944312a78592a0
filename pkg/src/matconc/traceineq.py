"""Signed-gap evaluation of exponential/power/Hoelder trace inequalities.

Every evaluator returns a TraceGapReport oriented so that gap >= 0 means the
inequality holds on that instance, including the reversed branch for negative
exponent scale.  A seeded fuzzer drives the evaluators over the random
ensembles and persists any violating input as a replayable witness file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .hermitian import (
    EnsembleSpec,
    HermitianMatrix,
    LoewnerCheck,
    _coerce,
    inputs_digest,
    matrix_exp,
    positive_part,
    sample_ensemble,
    spectral_decompose,
)

INEQUALITY_IDS = (
    "exchangeable",         # Tr(C(e^A-e^B)) <= Tr(((C^2+(A-B)^2)/2)((e^A+e^B)/2))
    "exchangeable_scaled",  # theta-scaled variant, reversed for theta < 0
    "pair_exp",             # Tr((X-X')(e^tX-e^tX')) <= (t/2)Tr((X-X')^2(e^tX+e^tX'))
    "power",                # Tr(C(A^k-B^k)) <= k Tr(((C^2+(A-B)^2)/4)(A^(k-1)+B^(k-1)))
    "symmetric_term",       # Re Tr(C(A^k(A-B)B^(n-k)+A^(n-k)(A-B)B^k)) <= Tr(((C^2+(A-B)^2)/2)(A^n+B^n))
    "holder",               # Re Tr(CA^pDB^(1-p)+CA^(1-p)DB^p) <= Tr(((C^2+D^2)/2)(A+B))
    "psd_cross",            # PQ + Q*P* <= PP* + Q*Q
    "trace_quad",           # Re Tr(PQRS) <= Tr((P^2+R^2)(Q^2+S^2))/4
)


@dataclass(frozen=True)
class TraceGapReport:
    """One evaluated inequality instance; gap is the oriented rhs/lhs difference."""

    inequality_id: str
    lhs: float
    rhs: float
    gap: float
    inputs_digest: str
    seed: int | None = None
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FuzzSummary:
    """Aggregate of a fuzzing run; min_gap is normalized by the per-trial anchor."""

    inequality_id: str
    trials: int
    min_gap: float
    min_gap_raw: float
    argmin_digest: str
    violations: int
    tolerance: float
    ensemble: dict = field(default_factory=dict)


def _real_trace(M: np.ndarray) -> float:
    # traces of Hermitian products are real analytically; fp residue discarded
    return float(np.trace(M).real)


def _check_dims(*mats: HermitianMatrix):
    d = mats[0].dim
    for M in mats[1:]:
        if M.dim != d:
            raise ValueError(f"dimension mismatch: {d} vs {M.dim}")
    return d


def _anchor(lhs: float, rhs: float) -> float:
    return max(1.0, abs(lhs), abs(rhs))


def _report(inequality_id, lhs, rhs, gap, mats, params, seed=None) -> TraceGapReport:
    params = dict(params)
    params["anchor"] = _anchor(lhs, rhs)
    digest = inputs_digest(mats, {k: v for k, v in params.items() if k != "anchor"})
    return TraceGapReport(inequality_id, float(lhs), float(rhs), float(gap),
                          digest, seed, params)


def gap_exchangeable(A, B, C, seed=None) -> TraceGapReport:
    """Exponential-difference trace bound for a Hermitian triple (gap = rhs - lhs)."""
    A, B, C = _coerce(A), _coerce(B), _coerce(C)
    _check_dims(A, B, C)
    eA, eB = matrix_exp(A).mat, matrix_exp(B).mat
    D = A.mat - B.mat
    lhs = _real_trace(C.mat @ (eA - eB))
    rhs = _real_trace(((C.mat @ C.mat + D @ D) / 2.0) @ ((eA + eB) / 2.0))
    return _report("exchangeable", lhs, rhs, rhs - lhs, (A, B, C), {}, seed)


def gap_exchangeable_scaled(A, B, C, theta: float, seed=None) -> TraceGapReport:
    """Scaled variant; the inequality reverses for theta < 0, gap stays oriented >= 0."""
    if theta == 0:
        raise ValueError("theta must be nonzero")
    A, B, C = _coerce(A), _coerce(B), _coerce(C)
    _check_dims(A, B, C)
    eA = matrix_exp(HermitianMatrix(theta * A.mat)).mat
    eB = matrix_exp(HermitianMatrix(theta * B.mat)).mat
    D = A.mat - B.mat
    lhs = _real_trace(C.mat @ (eA - eB))
    rhs_core = _real_trace(((C.mat @ C.mat + D @ D) / 2.0) @ ((eA + eB) / 2.0))
    rhs = theta * rhs_core
    gap = rhs - lhs if theta > 0 else lhs - rhs
    orientation = "leq" if theta > 0 else "geq"
    return _report("exchangeable_scaled", lhs, rhs, gap, (A, B, C),
                   {"theta": float(theta), "orientation": orientation}, seed)


def gap_pair_exp(X, Xp, theta: float, seed=None) -> TraceGapReport:
    """Exchangeable-pair exponential bound with C = X - X' folded in (theta > 0).

    The report records a cross-check against the scaled triple form evaluated
    with C = X - X'; the two are the same expression rearranged.
    """
    if not theta > 0:
        raise ValueError("theta must be > 0")
    X, Xp = _coerce(X), _coerce(Xp)
    _check_dims(X, Xp)
    eX = matrix_exp(HermitianMatrix(theta * X.mat)).mat
    eXp = matrix_exp(HermitianMatrix(theta * Xp.mat)).mat
    D = X.mat - Xp.mat
    lhs = _real_trace(D @ (eX - eXp))
    rhs = (theta / 2.0) * _real_trace((D @ D) @ (eX + eXp))
    cross_rhs = theta * _real_trace(((D @ D + D @ D) / 2.0) @ ((eX + eXp) / 2.0))
    return _report("pair_exp", lhs, rhs, rhs - lhs, (X, Xp),
                   {"theta": float(theta), "crosscheck_gap": float(cross_rhs - lhs)}, seed)


def _require_psd(M: HermitianMatrix, name: str, definite: bool = False) -> np.ndarray:
    evals = np.linalg.eigvalsh(M.mat)
    tol = 1e-10 * max(1.0, float(np.abs(evals).max()))
    if evals[0] < -tol:
        kind = "positive definite" if definite else "positive semidefinite"
        raise ValueError(f"{name} is not {kind}: min eigenvalue {evals[0]:.6e}")
    return evals


def gap_power(A, B, C, k: int, seed=None) -> TraceGapReport:
    """Power-difference trace bound for PSD A, B and integer k >= 1."""
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    k = int(k)
    A, B, C = _coerce(A), _coerce(B), _coerce(C)
    _check_dims(A, B, C)
    _require_psd(A, "A")
    _require_psd(B, "B")
    Ak = np.linalg.matrix_power(A.mat, k)
    Bk = np.linalg.matrix_power(B.mat, k)
    Akm1 = np.linalg.matrix_power(A.mat, k - 1)
    Bkm1 = np.linalg.matrix_power(B.mat, k - 1)
    D = A.mat - B.mat
    lhs = _real_trace(C.mat @ (Ak - Bk))
    rhs = k * _real_trace(((C.mat @ C.mat + D @ D) / 4.0) @ (Akm1 + Bkm1))
    return _report("power", lhs, rhs, rhs - lhs, (A, B, C), {"k": k}, seed)


def gap_symmetric_term(A, B, C, k: int, n: int, seed=None) -> TraceGapReport:
    """Symmetric pair of power terms, positive definite A, B, 0 <= k <= n."""
    if int(n) != n or int(k) != k or not 0 <= k <= n:
        raise ValueError("need integers 0 <= k <= n")
    k, n = int(k), int(n)
    A, B, C = _coerce(A), _coerce(B), _coerce(C)
    _check_dims(A, B, C)
    _require_psd(A, "A", definite=True)
    _require_psd(B, "B", definite=True)
    D = A.mat - B.mat
    Ak = np.linalg.matrix_power(A.mat, k)
    Ank = np.linalg.matrix_power(A.mat, n - k)
    Bk = np.linalg.matrix_power(B.mat, k)
    Bnk = np.linalg.matrix_power(B.mat, n - k)
    An = np.linalg.matrix_power(A.mat, n)
    Bn = np.linalg.matrix_power(B.mat, n)
    lhs = _real_trace(C.mat @ (Ak @ D @ Bnk + Ank @ D @ Bk))
    rhs = _real_trace(((C.mat @ C.mat + D @ D) / 2.0) @ (An + Bn))
    return _report("symmetric_term", lhs, rhs, rhs - lhs, (A, B, C),
                   {"k": k, "n": n}, seed)


def _psd_power(M: HermitianMatrix, p: float) -> np.ndarray:
    """Fractional power of a PSD matrix; eigenvalues clipped at the PSD boundary."""
    dec = spectral_decompose(M)
    evals = dec.eigenvalues
    tol = 1e-10 * max(1.0, float(np.abs(evals).max()))
    if evals[0] < -tol:
        raise ValueError(f"negative eigenvalue {evals[0]:.6e} in fractional power base")
    w = np.clip(evals, 0.0, None) ** p
    return (dec.eigenvectors * w) @ dec.eigenvectors.conj().T


def gap_holder(A, B, C, D, p: float, seed=None) -> TraceGapReport:
    """Hoelder-type interpolation bound, PSD A, B and exponent p in [0, 1]."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    A, B, C, D = _coerce(A), _coerce(B), _coerce(C), _coerce(D)
    _check_dims(A, B, C, D)
    Ap, A1p = _psd_power(A, p), _psd_power(A, 1.0 - p)
    Bp, B1p = _psd_power(B, p), _psd_power(B, 1.0 - p)
    lhs = float(np.trace(C.mat @ Ap @ D.mat @ B1p + C.mat @ A1p @ D.mat @ Bp).real)
    rhs = _real_trace(((C.mat @ C.mat + D.mat @ D.mat) / 2.0) @ (A.mat + B.mat))
    return _report("holder", lhs, rhs, rhs - lhs, (A, B, C, D), {"p": float(p)}, seed)


def _cross_square_matrix(P, Q) -> np.ndarray:
    P = np.asarray(P, dtype=np.complex128)
    Q = np.asarray(Q, dtype=np.complex128)
    if P.shape != Q.shape or P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError(f"dimension mismatch: {P.shape} vs {Q.shape}")
    M = P @ P.conj().T + Q.conj().T @ Q - P @ Q - Q.conj().T @ P.conj().T
    return (M + M.conj().T) / 2.0


def check_psd_cross(P, Q, tol: float = 1e-10) -> LoewnerCheck:
    """Decide PQ + Q*P* <= PP* + Q*Q for arbitrary complex P, Q of equal size."""
    lam_min = float(np.linalg.eigvalsh(_cross_square_matrix(P, Q))[0])
    return LoewnerCheck(lam_min >= -tol, lam_min)


def gap_psd_cross(P, Q, seed=None) -> TraceGapReport:
    """Report form of the cross-square order test: gap = lambda_min of the slack."""
    lam_min = float(np.linalg.eigvalsh(_cross_square_matrix(P, Q))[0])
    P = np.asarray(P, dtype=np.complex128)
    Q = np.asarray(Q, dtype=np.complex128)
    scale = max(np.linalg.norm(P, 2), np.linalg.norm(Q, 2))
    params = {"anchor": max(1.0, float(scale) ** 2)}
    digest = inputs_digest((P, Q))
    return TraceGapReport("psd_cross", 0.0, lam_min, lam_min, digest, seed, params)


def gap_trace_quad(P, Q, R, S, seed=None) -> TraceGapReport:
    """Re Tr(PQRS) <= Tr((P^2+R^2)(Q^2+S^2))/4 for a Hermitian quadruple."""
    P, Q, R, S = _coerce(P), _coerce(Q), _coerce(R), _coerce(S)
    _check_dims(P, Q, R, S)
    lhs = float(np.trace(P.mat @ Q.mat @ R.mat @ S.mat).real)
    rhs = _real_trace((P.mat @ P.mat + R.mat @ R.mat)
                      @ (Q.mat @ Q.mat + S.mat @ S.mat)) / 4.0
    return _report("trace_quad", lhs, rhs, rhs - lhs, (P, Q, R, S), {}, seed)


# ---------------------------------------------------------------------------
# Seeded fuzzing

_HOLDER_P_POOL = (0.0, 0.25, 0.5, 0.75, 1.0, 0.7071067811865476)


def _trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(trial),))
    return np.random.default_rng(ss)


def _evaluate_trial(inequality_id: str, kind: str, dim: int, scale: float,
                    rng: np.random.Generator, trial: int):
    """Deterministic input synthesis + evaluation for one fuzz trial.

    Returns the report together with the named input matrices so violating
    trials can be persisted verbatim for replay.
    """

    def subseed() -> int:
        return int(rng.integers(0, 2**63, dtype=np.int64))

    def draw() -> HermitianMatrix:
        out = sample_ensemble(EnsembleSpec(kind, dim, scale, subseed()))
        return out[0] if isinstance(out, tuple) else out

    def draw_pair():
        if kind == "commuting-pair":
            return sample_ensemble(EnsembleSpec(kind, dim, scale, subseed()))
        return draw(), draw()

    def as_psd(M):
        return positive_part(M)

    def as_pd(M):
        return HermitianMatrix(positive_part(M).mat + 0.1 * scale * np.eye(dim))

    base = {"kind": kind, "dim": dim}
    if inequality_id == "exchangeable":
        A, B = draw_pair()
        inputs = {"A": A, "B": B, "C": draw()}
        rep = gap_exchangeable(inputs["A"], inputs["B"], inputs["C"], seed=trial)
    elif inequality_id == "exchangeable_scaled":
        A, B = draw_pair()
        theta = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.1, 3.0))
        inputs = {"A": A, "B": B, "C": draw()}
        rep = gap_exchangeable_scaled(inputs["A"], inputs["B"], inputs["C"], theta, seed=trial)
    elif inequality_id == "pair_exp":
        X, Xp = draw_pair()
        inputs = {"X": X, "Xp": Xp}
        rep = gap_pair_exp(X, Xp, float(rng.uniform(0.05, 3.0)), seed=trial)
    elif inequality_id == "power":
        A, B = draw_pair()
        inputs = {"A": as_psd(A), "B": as_psd(B), "C": draw()}
        rep = gap_power(inputs["A"], inputs["B"], inputs["C"], int(rng.integers(1, 7)),
                        seed=trial)
    elif inequality_id == "symmetric_term":
        A, B = draw_pair()
        n = int(rng.integers(0, 7))
        k = int(rng.integers(0, n + 1))
        inputs = {"A": as_pd(A), "B": as_pd(B), "C": draw()}
        rep = gap_symmetric_term(inputs["A"], inputs["B"], inputs["C"], k, n, seed=trial)
    elif inequality_id == "holder":
        A, B = draw_pair()
        if rng.random() < 0.5:
            p = float(rng.choice(_HOLDER_P_POOL))
        else:
            p = float(rng.uniform(0.0, 1.0))
        inputs = {"A": as_psd(A), "B": as_psd(B), "C": draw(), "D": draw()}
        rep = gap_holder(inputs["A"], inputs["B"], inputs["C"], inputs["D"], p, seed=trial)
    elif inequality_id == "psd_cross":
        P = draw().mat + 1j * draw().mat
        Q = draw().mat + 1j * draw().mat
        inputs = {"P": P, "Q": Q}
        rep = gap_psd_cross(P, Q, seed=trial)
    elif inequality_id == "trace_quad":
        inputs = {"P": draw(), "Q": draw(), "R": draw(), "S": draw()}
        rep = gap_trace_quad(inputs["P"], inputs["Q"], inputs["R"], inputs["S"], seed=trial)
    else:
        raise ValueError(f"unknown inequality id {inequality_id!r}")
    rep.params.update(base)
    return rep, inputs


def _complex_to_obj(arr) -> dict:
    # same layout as the Hermitian matrix format; also used for the general
    # complex inputs of the cross-square check
    arr = np.asarray(arr, dtype=np.complex128)
    entries = [[[float(z.real), float(z.imag)] for z in row] for row in arr]
    return {"dim": int(arr.shape[0]), "entries": entries}


def _write_witness(witness_dir: str, rep: TraceGapReport, trial: int,
                   matrices: dict | None = None) -> str:
    os.makedirs(witness_dir, exist_ok=True)
    path = os.path.join(witness_dir, f"witness-{rep.inequality_id}-{trial:06d}.json")
    obj = {
        "inequality_id": rep.inequality_id,
        "params": {k: v for k, v in rep.params.items()},
        "gap": rep.gap,
        "lhs": rep.lhs,
        "rhs": rep.rhs,
        "inputs_digest": rep.inputs_digest,
        "trial": trial,
    }
    if matrices:
        obj["matrices"] = matrices
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2, default=float)
        fh.write("\n")
    return path


def _run_fuzz(inequality_id, trials, tol, pick, witness_dir, ensemble_meta) -> FuzzSummary:
    if inequality_id not in INEQUALITY_IDS:
        raise ValueError(f"unknown inequality id {inequality_id!r}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    min_norm = np.inf
    min_raw = np.inf
    argmin_digest = ""
    violations = 0
    for t in range(trials):
        kind, dim, scale, rng = pick(t)
        rep, inputs = _evaluate_trial(inequality_id, kind, dim, scale, rng, t)
        norm_gap = rep.gap / rep.params["anchor"]
        if norm_gap < min_norm:
            min_norm = norm_gap
            min_raw = rep.gap
            argmin_digest = rep.inputs_digest
        if norm_gap < -tol:
            violations += 1
            if witness_dir is not None:
                mats = {name: _complex_to_obj(M) for name, M in inputs.items()}
                _write_witness(witness_dir, rep, t, matrices=mats)
    return FuzzSummary(inequality_id, trials, float(min_norm), float(min_raw),
                       argmin_digest, violations, float(tol), ensemble_meta)


def fuzz_inequality(inequality_id: str, ensemble: EnsembleSpec, trials: int,
                    tol: float = 1e-8, witness_dir: str | None = None) -> FuzzSummary:
    """Fuzz one inequality over a fixed ensemble; deterministic in (seed, trials).

    A trial violates when gap < -tol * anchor, with the anchor recorded per
    report; violating inputs are persisted to ``witness_dir`` when given.
    """
    def pick(t):
        return ensemble.kind, ensemble.dim, ensemble.scale, _trial_rng(ensemble.seed, t)

    meta = {"kind": ensemble.kind, "dim": ensemble.dim,
            "scale": ensemble.scale, "seed": int(ensemble.seed)}
    return _run_fuzz(inequality_id, trials, tol, pick, witness_dir, meta)


def fuzz_grid(inequality_id: str, kinds, dims, trials: int, scale: float,
              seed: int, tol: float = 1e-8, witness_dir: str | None = None) -> FuzzSummary:
    """Fuzz with trials spread round-robin over a (kind, dim) grid."""
    kinds = tuple(kinds)
    dims = tuple(int(d) for d in dims)
    if not kinds or not dims:
        raise ValueError("kinds and dims must be nonempty")

    def pick(t):
        kind = kinds[t % len(kinds)]
        dim = dims[(t // len(kinds)) % len(dims)]
        return kind, dim, scale, _trial_rng(seed, t)

    meta = {"kinds": list(kinds), "dims": list(dims), "scale": scale, "seed": int(seed)}
    return _run_fuzz(inequality_id, trials, tol, pick, witness_dir, meta)


def fuzz_summary_to_obj(summary: FuzzSummary) -> dict:
    return {
        "inequality_id": summary.inequality_id,
        "trials": summary.trials,
        "min_gap": summary.min_gap,
        "min_gap_raw": summary.min_gap_raw,
        "argmin_digest": summary.argmin_digest,
        "violations": summary.violations,
        "tolerance": summary.tolerance,
        "ensemble": summary.ensemble,
    }


def save_fuzz_summary(path, summary: FuzzSummary) -> None:
    with open(path, "w") as fh:
        json.dump(fuzz_summary_to_obj(summary), fh, sort_keys=True, indent=2, default=float)
        fh.write("\n")
