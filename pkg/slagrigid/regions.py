"""
Membership and margins for the Lagrangian Grassmannian regions.

    B_K  : |l_i| <= K
    Xi   : l_i l_j >= -1 for all pairs
    Xi'  : l_i l_j + l_j l_k + l_k l_i >= 0 for all distinct triples
    M    : F >= 0 on trace-free tensors, vanishing only at 0
    M_K  : M intersected with B_K

The proof of the M_K rigidity statement refers to the set as Xi'_K; membership
here follows the statement, M_K = M ∩ B_K.
"""
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from tqdm.auto import tqdm

from slagrigid import cfg
from slagrigid.numkernel import restricted_min_eigenvalue
from slagrigid.stability import form_coefficients, spectrum_values
from slagrigid.sym3tensor import trace_free_basis

CONDITIONS = ("none", "xi", "xiprime")


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Slope eigenvalues of a graphical Lagrangian plane, sorted descending."""

    values: np.ndarray

    def __post_init__(self):
        values = np.sort(spectrum_values(self.values))[::-1].copy()
        if len(values) < 1:
            raise ValueError("a spectrum needs at least one eigenvalue")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return len(self.values)

    def __len__(self):
        return self.n

    def __iter__(self):
        return iter(self.values.tolist())

    def __eq__(self, other):
        return isinstance(other, Spectrum) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(tuple(self.values.tolist()))

    def __repr__(self):
        return f"Spectrum({self.values.tolist()})"

    def neg(self) -> "Spectrum":
        return Spectrum(-self.values)

    def tolist(self) -> List[float]:
        return self.values.tolist()


def as_spectrum(spec) -> Spectrum:
    return spec if isinstance(spec, Spectrum) else Spectrum(spec)


def ball_margin(spec, K: float) -> float:
    return float(K - np.max(np.abs(as_spectrum(spec).values)))


def xi_margin(spec) -> float:
    lam = as_spectrum(spec).values
    return min(
        (lam[i] * lam[j] + 1.0 for i, j in itertools.combinations(range(len(lam)), 2)),
        default=math.inf,
    )


def xi_prime_margin(spec) -> float:
    lam = as_spectrum(spec).values
    return min(
        (
            lam[i] * lam[j] + lam[j] * lam[k] + lam[k] * lam[i]
            for i, j, k in itertools.combinations(range(len(lam)), 3)
        ),
        default=math.inf,
    )


def m_margin(spec) -> float:
    """Minimum of F over unit trace-free tensors (+inf for n = 1)."""
    spec = as_spectrum(spec)
    if spec.n < 2:
        return math.inf
    return restricted_min_eigenvalue(form_coefficients(spec), trace_free_basis(spec.n))


def strengthened_margin(spec) -> float:
    """Minimum of F - |h|^2 over unit trace-free tensors (+inf for n = 1)."""
    spec = as_spectrum(spec)
    if spec.n < 2:
        return math.inf
    return restricted_min_eigenvalue(
        form_coefficients(spec).shifted(-1.0), trace_free_basis(spec.n)
    )


@dataclass(frozen=True)
class RegionReport:
    spectrum: Spectrum
    K: float
    tolerance: float
    ball_margin: float
    xi_margin: float
    xi_prime_margin: float
    m_margin: float
    strengthened_margin: float

    def _member(self, margin: float) -> bool:
        return margin >= -self.tolerance

    @property
    def flags(self) -> Dict[str, bool]:
        in_ball = self._member(self.ball_margin)
        in_m = self._member(self.m_margin)
        in_xi_prime = self._member(self.xi_prime_margin)
        return {
            "in_ball": in_ball,
            "in_xi": self._member(self.xi_margin),
            "in_xi_prime": in_xi_prime,
            "in_xi_prime_k": in_xi_prime and in_ball,
            "in_m": in_m,
            "in_m_strict": self.m_margin > self.tolerance,
            "in_m_k": in_m and in_ball,
            "strengthened": self._member(self.strengthened_margin),
        }

    @property
    def margins(self) -> Dict[str, float]:
        return {
            "ball": self.ball_margin,
            "xi": self.xi_margin,
            "xi_prime": self.xi_prime_margin,
            "m": self.m_margin,
            "strengthened": self.strengthened_margin,
        }

    def violations(self) -> List[str]:
        """Inclusions Xi ⊆ M and Xi' ⊆ {F >= |h|^2} that fail at this spectrum."""
        flags = self.flags
        found = []
        if flags["in_xi"] and not flags["in_m"]:
            found.append("xi_not_m")
        if flags["in_xi_prime"] and not flags["strengthened"]:
            found.append("xi_prime_not_strengthened")
        return found

    def to_dict(self) -> dict:
        return {
            "spectrum": self.spectrum.tolist(),
            "K": self.K,
            "tolerance": self.tolerance,
            "margins": self.margins,
            "flags": self.flags,
        }


def classify(spec, K: float, tol: float = cfg.tol) -> RegionReport:
    if not K > 0:
        raise ValueError(f"K must be positive, got {K}")
    if tol < 0:
        raise ValueError(f"tolerance must be nonnegative, got {tol}")
    spec = as_spectrum(spec)
    return RegionReport(
        spectrum=spec,
        K=float(K),
        tolerance=float(tol),
        ball_margin=ball_margin(spec, K),
        xi_margin=xi_margin(spec),
        xi_prime_margin=xi_prime_margin(spec),
        m_margin=m_margin(spec),
        strengthened_margin=strengthened_margin(spec),
    )


def rayleigh_oracle_min(spec, count: int, seed: int, shift: float = 0.0) -> float:
    """
    Sampled minimum of F(h) + shift |h|^2 over `count` random unit trace-free tensors.

    Gaussian vectors are drawn in ambient-orthonormal component coordinates and
    projected onto the trace-free subspace through its orthonormal basis.
    """
    spec = as_spectrum(spec)
    basis = trace_free_basis(spec.n).scaled_matrix()
    if basis.shape[1] == 0:
        return math.inf
    ratios = form_coefficients(spec).shifted(shift).ratios
    rng = np.random.default_rng(seed)
    best = math.inf
    for start in range(0, count, 10_000):
        size = min(10_000, count - start)
        y = rng.standard_normal((size, basis.shape[0])) @ basis @ basis.T
        y /= np.linalg.norm(y, axis=1, keepdims=True)
        best = min(best, float(np.min((y**2) @ ratios)))
    return best


@dataclass
class ScanSummary:
    n: int
    K: float
    count: int
    seed: int
    condition: str
    tolerance: float
    memberships: Dict[str, int]
    m_not_xi_union: int
    extremes: Dict[str, dict]
    counterexamples: List[dict]
    attempts: int
    rows: List[dict] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "K": self.K,
            "count": self.count,
            "seed": self.seed,
            "condition": self.condition,
            "tolerance": self.tolerance,
            "attempts": self.attempts,
            "memberships": self.memberships,
            "m_not_xi_union": self.m_not_xi_union,
            "extremes": self.extremes,
            "counterexamples": [c["spectrum"] for c in self.counterexamples],
            "counterexample_details": self.counterexamples,
        }


def _accepts(report: RegionReport, condition: str) -> bool:
    if condition == "xi":
        return report.flags["in_xi"]
    if condition == "xiprime":
        return report.flags["in_xi_prime"]
    return True


def _sample_one(n: int, K: float, seed: int, index: int, condition: str, tol: float, cap: int):
    """Draw sample `index` from its own stream, rejecting until it meets the condition."""
    rng = np.random.default_rng([seed, index])
    for attempt in range(1, cap + 1):
        lam = rng.uniform(-K, K, size=n)
        if condition == "xi" and xi_margin(lam) < -tol:
            continue
        if condition == "xiprime" and xi_prime_margin(lam) < -tol:
            continue
        report = classify(lam, K, tol)
        if _accepts(report, condition):
            return report, attempt
    raise RuntimeError(
        f"sample {index} found no spectrum satisfying condition {condition!r} in {cap} attempts"
    )


def _sample_chunk(n, K, seed, indices, condition, tol, cap):
    return [_sample_one(n, K, seed, i, condition, tol, cap) for i in indices]


def region_scan(
    n: int,
    K: float,
    count: int,
    seed: int,
    condition: str = "none",
    tol: float = cfg.tol,
    rejection_cap: int = cfg.rejection_cap,
    processes: Optional[int] = None,
    progress: bool = False,
) -> ScanSummary:
    """
    Uniform samples from [-K, K]^n (optionally rejected into Xi or Xi'), classified.

    Sample i is drawn from a generator seeded by (seed, i), so the summary does not
    depend on how samples are distributed over worker processes.
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    if condition not in CONDITIONS:
        raise ValueError(f"condition must be one of {CONDITIONS}, got {condition!r}")
    if not K > 0:
        raise ValueError(f"K must be positive, got {K}")

    results = []
    if processes is not None and processes > 1:
        chunks = [list(range(i, count, processes)) for i in range(processes)]
        with ProcessPoolExecutor(max_workers=processes) as executor:
            futures = [
                executor.submit(_sample_chunk, n, K, seed, chunk, condition, tol, rejection_cap)
                for chunk in chunks
            ]
            by_index = {}
            for chunk, future in zip(chunks, tqdm(futures, disable=not progress, desc="scan chunks")):
                by_index.update(zip(chunk, future.result()))
        results = [by_index[i] for i in range(count)]
    else:
        for i in tqdm(range(count), disable=not progress, desc=f"region scan n={n}"):
            results.append(_sample_one(n, K, seed, i, condition, tol, rejection_cap))

    summary = _summarize(n, K, count, seed, condition, tol, results)
    logging.info(
        "region scan n=%d K=%s count=%d seed=%d condition=%s: %d counterexamples",
        n, K, count, seed, condition, len(summary.counterexamples),
    )
    return summary


def _summarize(n, K, count, seed, condition, tol, results) -> ScanSummary:
    keys = ("in_ball", "in_xi", "in_xi_prime", "in_xi_prime_k", "in_m", "in_m_strict", "in_m_k", "strengthened")
    memberships = {key: 0 for key in keys}
    m_not_xi_union = 0
    counterexamples = []
    rows = []
    extremes = {}
    attempts = 0

    for index, (report, tries) in enumerate(results):
        attempts += tries
        flags = report.flags
        for key in keys:
            memberships[key] += int(flags[key])
        if flags["in_m"] and not (flags["in_xi"] or flags["in_xi_prime"]):
            m_not_xi_union += 1
        for kind in report.violations():
            counterexamples.append({"index": index, "kind": kind, "spectrum": report.spectrum.tolist()})
        for name, margin in report.margins.items():
            best = extremes.get(name)
            if math.isfinite(margin) and (best is None or margin < best["min"]):
                extremes[name] = {"min": margin, "spectrum": report.spectrum.tolist()}
        rows.append({"index": index, "spectrum": report.spectrum.tolist(), **report.margins})

    return ScanSummary(
        n=n,
        K=float(K),
        count=count,
        seed=seed,
        condition=condition,
        tolerance=tol,
        memberships=memberships,
        m_not_xi_union=m_not_xi_union,
        extremes=extremes,
        counterexamples=counterexamples,
        attempts=attempts,
        rows=rows,
    )


def spectra_from_lines(lines: Sequence[str]) -> List[Spectrum]:
    """One comma-separated spectrum per line; blank lines and '#' comments are skipped."""
    spectra = []
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            spectra.append(Spectrum([float(v) for v in line.split(",")]))
        except ValueError as e:
            raise ValueError(f"line {lineno}: {e}") from e
    return spectra
