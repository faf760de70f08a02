"""Problem types, synthetic instance generation and error metrics.

The measurement model is y = A x + w with a real M x N matrix A (M < N for
compressed sensing), a complex signal x and complex noise w.  Because A is
real, the real and imaginary parts decouple into two real systems sharing A,
so complex vectors are stored as two parallel real vectors throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class RecoveryError(RuntimeError):
    """Raised when an iterative recovery produces non-finite iterates."""


def _as_float_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ComplexVector:
    """Complex vector stored as parallel real/imaginary parts."""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "re", _as_float_vector(self.re, "re"))
        object.__setattr__(self, "im", _as_float_vector(self.im, "im"))
        if self.re.shape != self.im.shape:
            raise ValueError(
                f"real/imaginary length mismatch: {self.re.size} vs {self.im.size}"
            )

    def __len__(self) -> int:
        return self.re.size

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im

    @classmethod
    def from_complex(cls, x) -> "ComplexVector":
        x = np.asarray(x, dtype=complex)
        return cls(x.real.copy(), x.imag.copy())

    @classmethod
    def zeros(cls, n: int) -> "ComplexVector":
        return cls(np.zeros(n), np.zeros(n))

    def norm_sq(self) -> float:
        return float(self.re @ self.re + self.im @ self.im)

    def support(self, tol: float = 0.0) -> np.ndarray:
        """Boolean mask of components with |x_n| > tol (either part)."""
        return (np.abs(self.re) > tol) | (np.abs(self.im) > tol)


def combine(x_r, x_i) -> ComplexVector:
    """Assemble a complex vector from its real and imaginary parts."""
    x_r = _as_float_vector(x_r, "x_r")
    x_i = _as_float_vector(x_i, "x_i")
    if x_r.shape != x_i.shape:
        raise ValueError(f"length mismatch: {x_r.size} vs {x_i.size}")
    return ComplexVector(x_r.copy(), x_i.copy())


def split(x: ComplexVector) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of combine: the two real parts."""
    return x.re, x.im


@dataclass(frozen=True)
class BernoulliGaussianPrior:
    """Spike-and-slab prior: zero w.p. gamma0, else CN(0, sigma_x2).

    gamma0 may be a scalar (broadcast to length n when known) or a
    per-component vector.  Each part of a nonzero component is real
    Gaussian with variance sigma_x2 / 2.
    """

    gamma0: np.ndarray
    sigma_x2: float = 1.0

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.gamma0, dtype=float))
        if g.ndim != 1:
            raise ValueError("gamma0 must be scalar or 1-D")
        if np.any(g < 0.0) or np.any(g > 1.0):
            raise ValueError("gamma0 entries must lie in [0, 1]")
        if not self.sigma_x2 > 0.0:
            raise ValueError("sigma_x2 must be positive")
        object.__setattr__(self, "gamma0", g)
        object.__setattr__(self, "sigma_x2", float(self.sigma_x2))

    @property
    def s2(self) -> float:
        """Per-part slab variance sigma_x2 / 2."""
        return self.sigma_x2 / 2.0

    def gamma0_vector(self, n: int) -> np.ndarray:
        """gamma0 broadcast to length n."""
        if self.gamma0.size == 1:
            return np.full(n, self.gamma0[0])
        if self.gamma0.size != n:
            raise ValueError(f"gamma0 has length {self.gamma0.size}, expected {n}")
        return self.gamma0.copy()


@dataclass(frozen=True)
class RecoverySettings:
    """Loop parameters shared by all iterative solvers.

    likelihood_variant selects which part's effective-noise variance enters
    the activity likelihood exchange ("own-beta" follows the loop as stated,
    "printed-cross-beta" the standalone formula).  part_variance selects the
    slab-variance slot of that likelihood: "half" uses the per-part sigma_x2/2,
    "full" the complex sigma_x2.
    """

    t_max: int = 100
    eps_tol: float = 1e-4
    beta_floor: float = 1e-12
    gamma_clamp: float = 1e-12
    divergence_factor: float = 1e6
    likelihood_variant: str = "own-beta"
    part_variance: str = "half"

    def __post_init__(self):
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if not self.eps_tol > 0.0:
            raise ValueError("eps_tol must be positive")
        if not self.beta_floor > 0.0:
            raise ValueError("beta_floor must be positive")
        if not 0.0 < self.gamma_clamp < 0.5:
            raise ValueError("gamma_clamp must lie in (0, 0.5)")
        if self.divergence_factor <= 1.0:
            raise ValueError("divergence_factor must exceed 1")
        if self.likelihood_variant not in ("own-beta", "printed-cross-beta"):
            raise ValueError(f"unknown likelihood_variant {self.likelihood_variant!r}")
        if self.part_variance not in ("half", "full"):
            raise ValueError(f"unknown part_variance {self.part_variance!r}")


@dataclass(frozen=True)
class ProblemInstance:
    """One recovery problem: matrix, true signal, noise and measurement."""

    A: np.ndarray
    x_true: ComplexVector
    w: ComplexVector
    y: ComplexVector
    prior: BernoulliGaussianPrior

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2:
            raise ValueError("A must be a 2-D matrix")
        object.__setattr__(self, "A", A)
        m, n = A.shape
        if len(self.x_true) != n:
            raise ValueError(f"x_true has length {len(self.x_true)}, expected {n}")
        if len(self.w) != m or len(self.y) != m:
            raise ValueError("w and y must have length M")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def residual_norm(self) -> float:
        """max-norm of y - (A x + w); zero up to rounding by construction."""
        r_r = self.y.re - (self.A @ self.x_true.re + self.w.re)
        r_i = self.y.im - (self.A @ self.x_true.im + self.w.im)
        return max(np.max(np.abs(r_r), initial=0.0), np.max(np.abs(r_i), initial=0.0))


@dataclass(frozen=True)
class RecoveryOutput:
    """Result of a complex recovery: estimate plus per-part diagnostics.

    u_r/u_i and beta_r/beta_i are the final decoupled-model pseudo-data and
    effective noise variances consumed by support detection.  gamma_r/gamma_i
    are the final working zero-probabilities (the prior itself for solvers
    that never update them, None for plain AMP).
    """

    x_hat: ComplexVector
    u_r: np.ndarray
    u_i: np.ndarray
    beta_r: float
    beta_i: float
    gamma_r: np.ndarray | None
    gamma_i: np.ndarray | None
    iterations: int
    converged: bool
    diverged: bool = False


def gen_matrix(m: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Random sign matrix with entries +-1/sqrt(M); columns have unit norm."""
    if m < 1 or n < 1:
        raise ValueError("matrix dimensions must be >= 1")
    signs = rng.integers(0, 2, size=(m, n)) * 2 - 1
    return signs / np.sqrt(m)


def gen_signal_exact_k(
    n: int, k: int, sigma_x2: float, rng: np.random.Generator
) -> ComplexVector:
    """Signal with exactly k nonzeros on a uniform random support.

    Nonzero entries are circularly-symmetric complex Gaussian with variance
    sigma_x2, i.e. each part is N(0, sigma_x2 / 2); the two parts share the
    support by construction.
    """
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= K <= N, got K={k}, N={n}")
    x_r = np.zeros(n)
    x_i = np.zeros(n)
    if k > 0:
        supp = rng.choice(n, size=k, replace=False)
        part_std = np.sqrt(sigma_x2 / 2.0)
        x_r[supp] = part_std * rng.standard_normal(k)
        x_i[supp] = part_std * rng.standard_normal(k)
    return ComplexVector(x_r, x_i)


def gen_signal_bernoulli(
    n: int, prior: BernoulliGaussianPrior, rng: np.random.Generator
) -> ComplexVector:
    """Signal with i.i.d. activity: component n zero w.p. gamma0_n."""
    gamma0 = prior.gamma0_vector(n)
    active = rng.random(n) >= gamma0
    part_std = np.sqrt(prior.sigma_x2 / 2.0)
    x_r = np.where(active, part_std * rng.standard_normal(n), 0.0)
    x_i = np.where(active, part_std * rng.standard_normal(n), 0.0)
    return ComplexVector(x_r, x_i)


def measure(A: np.ndarray, x: ComplexVector, w: ComplexVector) -> ComplexVector:
    """y = A x + w, applied to each part separately."""
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    if len(x) != n:
        raise ValueError(f"x has length {len(x)}, expected {n}")
    if len(w) != m:
        raise ValueError(f"w has length {len(w)}, expected {m}")
    return ComplexVector(A @ x.re + w.re, A @ x.im + w.im)


def calibrate_noise(
    A: np.ndarray,
    x: ComplexVector,
    snr: float,
    rng: np.random.Generator,
    noiseless: bool = False,
) -> tuple[ComplexVector, float]:
    """Draw complex Gaussian noise sized so that ||Ax||^2 / E||w||^2 = snr.

    The noise power is calibrated from the realized ||Ax||^2, making the
    empirical SNR exact for this instance: sigma_w2 = ||Ax||^2 / (M snr),
    with each part N(0, sigma_w2 / 2).  noiseless=True returns exact zeros.
    """
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    if noiseless:
        return ComplexVector.zeros(m), 0.0
    if not snr > 0.0:
        raise ValueError("snr must be positive")
    ax_r = A @ x.re
    ax_i = A @ x.im
    energy = float(ax_r @ ax_r + ax_i @ ax_i)
    if energy == 0.0:
        raise ValueError("Ax is zero; SNR calibration undefined")
    sigma_w2 = energy / (m * snr)
    part_std = np.sqrt(sigma_w2 / 2.0)
    w = ComplexVector(part_std * rng.standard_normal(m), part_std * rng.standard_normal(m))
    return w, sigma_w2


def nmse(x_hat: ComplexVector, x: ComplexVector) -> float:
    """Squared recovery error normalized by the true signal energy."""
    if len(x_hat) != len(x):
        raise ValueError("length mismatch")
    denom = x.norm_sq()
    if denom == 0.0:
        raise ValueError("true signal is zero; NMSE undefined")
    d_r = x_hat.re - x.re
    d_i = x_hat.im - x.im
    return float(d_r @ d_r + d_i @ d_i) / denom


def make_instance(
    m: int,
    n: int,
    k: int,
    rng: np.random.Generator,
    sigma_x2: float = 1.0,
    snr: float | None = None,
    noiseless: bool = True,
    gamma0: float | None = None,
) -> tuple[ProblemInstance, float]:
    """Generate a full exact-K instance; returns (instance, sigma_w2).

    gamma0 defaults to 1 - K/N, the activity rate matching the exact-K draw.
    """
    A = gen_matrix(m, n, rng)
    x = gen_signal_exact_k(n, k, sigma_x2, rng)
    if noiseless:
        w, sigma_w2 = ComplexVector.zeros(m), 0.0
    else:
        if snr is None:
            raise ValueError("snr required when noiseless=False")
        w, sigma_w2 = calibrate_noise(A, x, snr, rng)
    y = measure(A, x, w)
    if gamma0 is None:
        gamma0 = 1.0 - k / n
    prior = BernoulliGaussianPrior(gamma0=gamma0, sigma_x2=sigma_x2)
    return ProblemInstance(A=A, x_true=x, w=w, y=y, prior=prior), sigma_w2


# --- plain-text instance files -------------------------------------------
#
# Format: '#'-comment header, then "key value" lines (M, N, sigma_x2,
# sigma_w2, seed, gamma0 with N values), then sections "A" (M rows of N
# entries), and "x", "w", "y" as "re im" pairs per line.

class InstanceFormatError(ValueError):
    """Malformed instance file; carries the offending 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def save_instance(
    path, inst: ProblemInstance, sigma_w2: float = 0.0, seed: int | None = None
) -> None:
    m, n = inst.m, inst.n
    lines = ["# csamp problem instance v1"]
    lines.append(f"M {m}")
    lines.append(f"N {n}")
    lines.append(f"sigma_x2 {float(inst.prior.sigma_x2)!r}")
    lines.append(f"sigma_w2 {float(sigma_w2)!r}")
    lines.append(f"seed {seed if seed is not None else -1}")
    gamma0 = inst.prior.gamma0_vector(n)
    lines.append("gamma0 " + " ".join(repr(float(g)) for g in gamma0))
    lines.append("A")
    for row in inst.A:
        lines.append(" ".join(repr(float(v)) for v in row))
    for name, vec in (("x", inst.x_true), ("w", inst.w), ("y", inst.y)):
        lines.append(name)
        for re, im in zip(vec.re, vec.im):
            lines.append(f"{float(re)!r} {float(im)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_instance(path) -> tuple[ProblemInstance, float, int]:
    """Parse an instance file; returns (instance, sigma_w2, seed)."""
    with open(path) as fh:
        raw = fh.readlines()

    # (line_no, tokens) with comments/blank lines dropped
    rows = [
        (i + 1, line.split())
        for i, line in enumerate(raw)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    pos = 0

    def take() -> tuple[int, list[str]]:
        nonlocal pos
        if pos >= len(rows):
            last = rows[-1][0] if rows else 0
            raise InstanceFormatError(last, "unexpected end of file")
        row = rows[pos]
        pos += 1
        return row

    def take_scalar(key: str) -> float:
        ln, toks = take()
        if len(toks) != 2 or toks[0] != key:
            raise InstanceFormatError(ln, f"expected '{key} <value>'")
        try:
            return float(toks[1])
        except ValueError:
            raise InstanceFormatError(ln, f"bad numeric value for {key}: {toks[1]!r}")

    m = int(take_scalar("M"))
    n = int(take_scalar("N"))
    if m < 1 or n < 1:
        raise InstanceFormatError(rows[0][0], "M and N must be >= 1")
    sigma_x2 = take_scalar("sigma_x2")
    sigma_w2 = take_scalar("sigma_w2")
    seed = int(take_scalar("seed"))

    ln, toks = take()
    if not toks or toks[0] != "gamma0" or len(toks) != n + 1:
        raise InstanceFormatError(ln, f"expected 'gamma0' with {n} values")
    try:
        gamma0 = np.array([float(t) for t in toks[1:]])
    except ValueError:
        raise InstanceFormatError(ln, "bad numeric value in gamma0")

    def take_marker(name: str) -> None:
        ln, toks = take()
        if toks != [name]:
            raise InstanceFormatError(ln, f"expected section marker '{name}'")

    def take_floats(count: int, ln_hint: str) -> tuple[int, np.ndarray]:
        ln, toks = take()
        if len(toks) != count:
            raise InstanceFormatError(ln, f"expected {count} values for {ln_hint}")
        try:
            return ln, np.array([float(t) for t in toks])
        except ValueError:
            raise InstanceFormatError(ln, f"bad numeric value in {ln_hint}")

    take_marker("A")
    A = np.empty((m, n))
    for i in range(m):
        _, A[i] = take_floats(n, f"matrix row {i}")

    parts = {}
    for name, length in (("x", n), ("w", m), ("y", m)):
        take_marker(name)
        re = np.empty(length)
        im = np.empty(length)
        for i in range(length):
            _, pair = take_floats(2, f"{name}[{i}]")
            re[i], im[i] = pair
        parts[name] = ComplexVector(re, im)

    if pos != len(rows):
        raise InstanceFormatError(rows[pos][0], "trailing content after sections")

    prior = BernoulliGaussianPrior(gamma0=gamma0, sigma_x2=sigma_x2)
    inst = ProblemInstance(A=A, x_true=parts["x"], w=parts["w"], y=parts["y"], prior=prior)
    return inst, sigma_w2, seed
