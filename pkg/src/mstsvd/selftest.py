"""Structural self-checks of the block circulant / Fourier-slice machinery.

Each check runs on a batch of random instances and measures the worst
relative error of an identity that must hold exactly in real arithmetic:

* products of a block circulant matrix with its transpose stay block
  circulant;
* the block circulant embedding scales Frobenius norms by sqrt(N);
* the grouping-mode Gram of the embedded group is N times the plain one,
  so both yield the same grouping transform up to column signs;
* conjugating by the Fourier matrix block-diagonalizes the embedding;
* the transform cores computed on the embedding and per Fourier slice
  have equal norms.

``mstsvd self-test`` runs these before any benchmark numbers are trusted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import (
    bcirc_group,
    bcirc_patch,
    bdiag_from_bcirc,
    dft_pair,
    frobenius_norm,
    hermitian_eig,
    mode_product,
    unfold,
)

_TOL = 1e-8


@dataclass(frozen=True)
class CheckResult:
    name: str
    instances: int
    max_rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: {self.instances} instances, "
                f"max rel err {self.max_rel_err:.3e} (tol {self.tolerance:.0e})")


def _rand_patch(gen, ps, n):
    return gen.standard_normal((ps, ps, n))


def _rand_group(gen, ps, n, k):
    return gen.standard_normal((ps, ps, n, k))


def check_bcirc_transpose_structure(n_instances: int, seed: int) -> CheckResult:
    gen = np.random.Generator(np.random.Philox(key=seed))
    worst = 0.0
    for _ in range(n_instances):
        ps = int(gen.integers(2, 6))
        n = int(gen.integers(2, 5))
        b = bcirc_patch(_rand_patch(gen, ps, n))
        m = b @ b.T
        scale = max(np.linalg.norm(m), 1e-300)
        # blocks with equal (row - col) mod N must coincide
        blocks = {}
        err = 0.0
        for br in range(n):
            for bc in range(n):
                blk = m[br * ps:(br + 1) * ps, bc * ps:(bc + 1) * ps]
                key = (br - bc) % n
                if key in blocks:
                    err = max(err, np.linalg.norm(blk - blocks[key]) / scale)
                else:
                    blocks[key] = blk
        worst = max(worst, err)
    return CheckResult("bcirc-transpose-structure", n_instances, worst, _TOL)


def check_bcirc_norm_scaling(n_instances: int, seed: int) -> CheckResult:
    gen = np.random.Generator(np.random.Philox(key=seed + 1))
    worst = 0.0
    for _ in range(n_instances):
        ps = int(gen.integers(1, 7))
        p = _rand_patch(gen, ps, 3)
        lhs = frobenius_norm(bcirc_patch(p))
        rhs = np.sqrt(3.0) * frobenius_norm(p)
        worst = max(worst, abs(lhs - rhs) / max(rhs, 1e-300))
    return CheckResult("bcirc-norm-sqrt3", n_instances, worst, _TOL)


def check_group_gram_proportionality(n_instances: int, seed: int) -> CheckResult:
    gen = np.random.Generator(np.random.Philox(key=seed + 2))
    worst = 0.0
    for _ in range(n_instances):
        ps = int(gen.integers(2, 5))
        n = int(gen.integers(2, 5))
        k = int(gen.integers(2, 7))
        g = _rand_group(gen, ps, n, k)
        unf = unfold(g, 4)
        gram = unf @ unf.T
        unf_b = unfold(bcirc_group(g), 3)
        gram_b = unf_b @ unf_b.T
        scale = max(np.linalg.norm(gram_b), 1e-300)
        err = np.linalg.norm(gram_b - n * gram) / scale
        # same grouping transform up to column signs
        _, v = hermitian_eig(gram)
        _, vb = hermitian_eig(gram_b)
        err = max(err, float(np.abs(np.abs(v) - np.abs(vb)).max()))
        worst = max(worst, err)
    return CheckResult("group-gram-proportionality", n_instances, worst, _TOL)


def check_bcirc_diagonalization(n_instances: int, seed: int) -> CheckResult:
    gen = np.random.Generator(np.random.Philox(key=seed + 3))
    worst = 0.0
    for _ in range(n_instances):
        ps = int(gen.integers(1, 6))
        n = int(gen.integers(2, 6))
        p = _rand_patch(gen, ps, n)
        diag = bdiag_from_bcirc(p)  # raises on violation
        pair = dft_pair(n)
        phat = mode_product(p, pair.unnormalized, 3)
        err = 0.0
        scale = max(np.linalg.norm(diag), 1e-300)
        for j in range(n):
            blk = diag[j * ps:(j + 1) * ps, j * ps:(j + 1) * ps]
            err = max(err, np.linalg.norm(blk - phat[:, :, j]) / scale)
        worst = max(worst, err)
    return CheckResult("bcirc-block-diagonalization", n_instances, worst, _TOL)


def check_core_norm_equality(n_instances: int, seed: int) -> CheckResult:
    gen = np.random.Generator(np.random.Philox(key=seed + 4))
    worst = 0.0
    for _ in range(n_instances):
        ps = int(gen.integers(2, 5))
        n = int(gen.integers(2, 5))
        k = int(gen.integers(2, 7))
        g = _rand_group(gen, ps, n, k)

        # embedded route: factors from the Grams of the embedded stack
        t = bcirc_group(g)
        u1 = _gram_factor(unfold(t, 1))
        u2 = _gram_factor(unfold(t, 2))
        u3 = _gram_factor(unfold(t, 3))
        core_b = mode_product(mode_product(mode_product(t, u1.T, 1), u2.T, 2), u3.T, 3)

        # Fourier-slice route on the sqrt(N)-scaled spectrum, grouping
        # factor taken from the plain group (equal to u3 up to signs)
        ug = _gram_factor(unfold(g, 4))
        ghat = mode_product(g.astype(np.complex128), dft_pair(n).unnormalized, 3)
        sq = 0.0
        for j in range(n):
            slc = ghat[:, :, j, :]
            ur = _gram_factor_c(np.einsum("rck,sck->rs", slc, slc.conj()))
            uc = _gram_factor_c(np.einsum("rck,rdk->cd", slc.conj(), slc))
            core = mode_product(mode_product(mode_product(slc, ur.conj().T, 1), uc.conj().T, 2), ug.T, 3)
            sq += np.linalg.norm(core) ** 2
        lhs = np.sqrt(sq)
        rhs = frobenius_norm(core_b)
        worst = max(worst, abs(lhs - rhs) / max(rhs, 1e-300))
    return CheckResult("core-norm-equality", n_instances, worst, _TOL)


def _gram_factor(unf: np.ndarray) -> np.ndarray:
    _, v = hermitian_eig(unf @ unf.T)
    return v


def _gram_factor_c(gram: np.ndarray) -> np.ndarray:
    _, v = hermitian_eig(gram)
    return v


ALL_CHECKS = (
    check_bcirc_transpose_structure,
    check_bcirc_norm_scaling,
    check_group_gram_proportionality,
    check_bcirc_diagonalization,
    check_core_norm_equality,
)


def run_selftest(n_instances: int = 100, seed: int = 20240801) -> list[CheckResult]:
    """Run every check; callers decide how to surface failures."""
    return [check(n_instances, seed) for check in ALL_CHECKS]
