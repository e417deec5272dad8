"""Fidelity estimation from shot records.

Two routes to the same number:

* direct fidelity estimation — uniformly sampled stabilizers of the GHZ
  group, fidelity = mean of their expectation values, error bars from the
  law of total variance over (which stabilizer, its shot noise);
* population + coherence — F = (P + chi)/2 with P read from Z-basis
  bitstrings and chi extracted from the +/-N Fourier components of the
  parity-oscillation signal sampled at 2N+2 angles j*pi/(N+1).

Readout mitigation: expectation values are rescaled by the calibration
baseline prod(1 - 2 eps_j) over the observable's support (twirled-readout
style); bitstring distributions are corrected by tensored inversion of
per-qubit confusion matrices (a deliberately simplified stand-in for full
bitstring-correction methods).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .frames import MeasurementSetting, SettingRun, ShotData
from .hwgraph import HardwareGraph
from .noise import NoiseModel


class EstimationError(RuntimeError):
    pass


class MitigationError(EstimationError):
    pass


# -- stabilizer labels --------------------------------------------------------


@dataclass(frozen=True)
class StabilizerLabel:
    """One element of the 2^n GHZ stabilizer group.

    Diagonal labels (x_part False) are Z on an even-cardinality support;
    off-diagonal labels are X everywhere with Y on an even-cardinality
    support ``mask`` and sign (-1)^(|mask|/2).  Masks are over data
    positions (ascending qubit id).
    """

    n: int
    x_part: bool
    mask: int

    def __post_init__(self):
        if bin(self.mask).count("1") % 2 != 0:
            raise ValueError("support must have even cardinality")
        if self.mask >> self.n:
            raise ValueError("mask exceeds qubit count")

    @property
    def sign(self) -> int:
        if not self.x_part:
            return 1
        return -1 if (bin(self.mask).count("1") // 2) % 2 else 1

    @property
    def diagonal(self) -> bool:
        return not self.x_part

    def pauli_string(self) -> dict[int, str]:
        out = {}
        for d in range(self.n):
            bit = (self.mask >> d) & 1
            if self.x_part:
                out[d] = "Y" if bit else "X"
            elif bit:
                out[d] = "Z"
        return out

    def setting(self) -> MeasurementSetting:
        if self.diagonal:
            return MeasurementSetting("z")
        return MeasurementSetting("stab", y_mask=self.mask)

    def describe(self) -> str:
        kind = "offdiag" if self.x_part else "diag"
        return f"{kind}:{self.mask:x}"


def sample_stabilizer_uniform(n: int, r: rng.CounterRNG) -> StabilizerLabel:
    """Uniform draw over the full 2^n stabilizer group.

    A fair coin picks the diagonal/off-diagonal half; n-1 fair bits plus a
    parity-completion bit give a uniform even-cardinality support.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    x_part = bool(r.next_bit())
    mask = 0
    parity = 0
    for d in range(n - 1):
        b = r.next_bit()
        mask |= b << d
        parity ^= b
    mask |= parity << (n - 1)
    return StabilizerLabel(n=n, x_part=x_part, mask=mask)


# -- readout calibration -------------------------------------------------------


@dataclass
class ReadoutCalibration:
    """Per-data-qubit readout flip probabilities (positions ascending id)."""

    eps: np.ndarray
    unc: np.ndarray | None = None

    def __post_init__(self):
        self.eps = np.asarray(self.eps, dtype=np.float64)
        if np.any(self.eps < 0) or np.any(self.eps >= 0.5):
            raise MitigationError("readout flip rates must lie in [0, 0.5)")

    @staticmethod
    def from_noise_model(
        nm: NoiseModel, graph: HardwareGraph | None, qubits
    ) -> "ReadoutCalibration":
        return ReadoutCalibration(np.array([nm.readout_rate(graph, q) for q in qubits]))

    def baseline(self, support) -> float:
        b = 1.0
        for d in support:
            b *= 1.0 - 2.0 * self.eps[d]
        return b

    @property
    def n(self) -> int:
        return len(self.eps)


# -- core estimators -----------------------------------------------------------


def variance_of_mean(s_values, sigma2_values) -> float:
    """Variance of the mean estimate over m sampled observables.

    Combines the within-observable shot variance and the between-observable
    spread (law of total variance), with unbiased sample moments:
    Var = (mean(sigma_i^2) + var(s_i, ddof=1)) / m.
    """
    s = np.asarray(s_values, dtype=np.float64)
    v = np.asarray(sigma2_values, dtype=np.float64)
    m = len(s)
    if m < 2:
        raise EstimationError("need at least two sampled observables")
    return float((v.mean() + s.var(ddof=1)) / m)


def stabilizer_expectation(outcomes, sign: int = 1) -> tuple[float, float]:
    """Sample mean (times sign) and variance of the mean for +/-1 outcomes."""
    arr = np.asarray(outcomes, dtype=np.float64)
    if arr.size == 0:
        raise EstimationError("zero accepted shots for this setting")
    mean = float(sign * arr.mean())
    var = float(arr.var(ddof=1) / arr.size) if arr.size > 1 else 0.0
    return mean, var


@dataclass
class FidelityEstimate:
    value: float
    std_error: float
    method: str
    mitigation: str = "none"
    components: dict = field(default_factory=dict)

    @property
    def verdict_gme(self) -> bool:
        return self.value > 0.5

    @property
    def margin_sigma(self) -> float:
        if self.std_error == 0.0:
            return math.inf if self.value != 0.5 else 0.0
        return (self.value - 0.5) / self.std_error

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "mitigation": self.mitigation,
            "value": self.value,
            "std_error": self.std_error,
            "components": dict(sorted(self.components.items())),
            "verdict_gme": self.verdict_gme,
            "margin_sigma": self.margin_sigma,
        }


def dfe_fidelity(labels, estimates, mitigation: str = "none") -> FidelityEstimate:
    """Fidelity as the plain average of sampled stabilizer expectations."""
    s = [e[0] for e in estimates]
    v = [e[1] for e in estimates]
    if len(s) < 2:
        raise EstimationError("need at least two stabilizer samples")
    var = variance_of_mean(s, v)
    n_diag = sum(1 for lab in labels if lab.diagonal)
    return FidelityEstimate(
        value=float(np.mean(s)),
        std_error=math.sqrt(var),
        method="dfe",
        mitigation=mitigation,
        components={
            "n_labels": len(s),
            "n_diagonal": n_diag,
            "n_offdiagonal": len(s) - n_diag,
        },
    )


# -- populations and bitstring mitigation ---------------------------------------


def accepted_bitstring_counts(run: SettingRun, post_select: bool = True) -> Counter:
    counts: Counter = Counter()
    for i in range(run.n_shots):
        if post_select and not run.accepted[i]:
            continue
        counts[run.bitstring_int(i)] += 1
    return counts


def _inv_conf(eps: float) -> tuple[float, float, float, float]:
    """Entries (a00, a01, a10, a11) of the inverse symmetric confusion matrix."""
    d = 1.0 - 2.0 * eps
    if d <= 0.0:
        raise MitigationError("confusion matrix singular at eps = 0.5")
    return (1.0 - eps) / d, -eps / d, -eps / d, (1.0 - eps) / d


def _corrected_weight(target: int, observed: int, n: int, cal: ReadoutCalibration) -> float:
    w = 1.0
    for d in range(n):
        a00, a01, a10, a11 = _inv_conf(float(cal.eps[d]))
        tb = (target >> d) & 1
        ob = (observed >> d) & 1
        w *= (a00, a01, a10, a11)[2 * tb + ob]
    return w


@dataclass
class QuasiDistribution:
    """Possibly-negative corrected probabilities with clipping metadata."""

    values: dict[int, float]
    clip_mass: float = 0.0

    def clipped(self) -> dict[int, float]:
        return {k: max(0.0, v) for k, v in self.values.items()}


def tensored_inverse_mitigate(
    counts: Counter | dict[int, float],
    n: int,
    cal: ReadoutCalibration,
    targets=None,
) -> QuasiDistribution:
    """Correct a bitstring distribution with per-qubit inverse confusion
    matrices, restricted to the observed strings (plus any explicit
    targets) and renormalized over that support.  Negative entries are
    clipped only in :meth:`QuasiDistribution.clipped`, with the clipped
    mass recorded.
    """
    total = sum(counts.values())
    if total <= 0:
        raise EstimationError("empty bitstring distribution")
    phat = {s: c / total for s, c in counts.items()}
    support = set(phat)
    if targets is not None:
        support |= set(targets)
    values = {
        s: sum(p * _corrected_weight(s, t, n, cal) for t, p in phat.items())
        for s in sorted(support)
    }
    norm = sum(values.values())
    if norm > 0:
        values = {s: v / norm for s, v in values.items()}
    clip = -sum(v for v in values.values() if v < 0.0)
    return QuasiDistribution(values=values, clip_mass=clip)


def population(
    run: SettingRun,
    n: int,
    cal: ReadoutCalibration | None = None,
    mitigation: str = "tensored_inverse",
    post_select: bool = True,
) -> tuple[float, float]:
    """All-zeros + all-ones mass of the Z-basis distribution.

    With mitigation, the two target masses are computed through the exact
    global tensored inverse (only two output components are needed, so no
    subspace restriction is involved); the standard error follows from the
    delta method on the multinomial counts.
    """
    counts = accepted_bitstring_counts(run, post_select)
    total = sum(counts.values())
    if total == 0:
        raise EstimationError("no accepted Z-basis shots")
    ones = (1 << n) - 1
    if mitigation == "none" or cal is None:
        p = (counts.get(0, 0) + counts.get(ones, 0)) / total
        return p, math.sqrt(max(p * (1.0 - p), 0.0) / total)
    if mitigation != "tensored_inverse":
        raise EstimationError(f"unknown population mitigation {mitigation!r}")
    est = 0.0
    second = 0.0
    for t, c in counts.items():
        w = _corrected_weight(0, t, n, cal) + _corrected_weight(ones, t, n, cal)
        f = c / total
        est += f * w
        second += f * w * w
    var = max(second - est * est, 0.0) / total
    return est, math.sqrt(var)


# -- coherence ------------------------------------------------------------------


def chi_uniform_phase(m_values: dict[int, tuple[float, float]], n: int) -> tuple[float, float]:
    """Coherence from the alternating sum over angles k*pi/n, k = 1..n."""
    missing = [k for k in range(1, n + 1) if k not in m_values]
    if missing:
        raise EstimationError(f"missing parity settings k={missing}")
    chi = sum((-1) ** k * m_values[k][0] for k in range(1, n + 1)) / n
    var = sum(m_values[k][1] ** 2 for k in range(1, n + 1)) / n**2
    return float(chi), math.sqrt(var)


@dataclass
class ParityOscillationSignal:
    """Mitigated <M_phi> estimates on the 2n+2 point grid phi_j = j*pi/(n+1)."""

    n: int
    values: np.ndarray
    stderr: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.stderr = np.asarray(self.stderr, dtype=np.float64)
        if len(self.values) != 2 * self.n + 2 or len(self.stderr) != 2 * self.n + 2:
            raise EstimationError(
                f"signal must have {2 * self.n + 2} points, got {len(self.values)}"
            )

    @property
    def angles(self) -> np.ndarray:
        return np.array([j * math.pi / (self.n + 1) for j in range(2 * self.n + 2)])


def signal_angles(n: int) -> list[float]:
    return [j * math.pi / (n + 1) for j in range(2 * n + 2)]


def fourier_components(signal: ParityOscillationSignal) -> dict:
    """Coherence, phase and fringe amplitude from the +/-n Fourier bins.

    I_q = (1/(2(n+1))) sum_j exp(i q j pi/(n+1)) <M_j>; for a real signal
    I_{-n} is the conjugate of I_n, chi = I_n + I_{-n} = 2 Re I_n,
    C = |I_n| + |I_{-n}| and theta = -arctan(Im I_n / Re I_n).
    """
    n = signal.n
    j = np.arange(2 * n + 2)
    phase = np.exp(1j * n * j * math.pi / (n + 1))
    coef = 1.0 / (2.0 * (n + 1))
    i_n = complex(coef * np.sum(phase * signal.values))
    i_mn = complex(coef * np.sum(np.conj(phase) * signal.values))
    chi = (i_n + i_mn).real
    coherence = abs(i_n) + abs(i_mn)
    theta = -math.atan2(i_n.imag, i_n.real)
    var_re = float(np.sum((coef * np.cos(n * j * math.pi / (n + 1)) * signal.stderr) ** 2))
    var_im = float(np.sum((coef * np.sin(n * j * math.pi / (n + 1)) * signal.stderr) ** 2))
    chi_err = 2.0 * math.sqrt(var_re)
    mag = abs(i_n)
    if mag > 0:
        var_c = (i_n.real / mag) ** 2 * var_re + (i_n.imag / mag) ** 2 * var_im
        c_err = 2.0 * math.sqrt(var_c)
        theta_err = math.sqrt(
            (i_n.imag / mag**2) ** 2 * var_re + (i_n.real / mag**2) ** 2 * var_im
        )
    else:
        c_err = 2.0 * math.sqrt(var_re + var_im)
        theta_err = math.inf
    return {
        "I_n": i_n,
        "I_minus_n": i_mn,
        "chi": float(chi),
        "chi_err": chi_err,
        "C": float(coherence),
        "C_err": c_err,
        "theta": float(theta),
        "theta_err": theta_err,
    }


def combine_fidelity(
    p_est: tuple[float, float],
    chi_est: tuple[float, float],
    coherence_est: tuple[float, float] | None = None,
    mitigation: str = "trex+tensored_inverse",
    extra_components: dict | None = None,
) -> FidelityEstimate:
    """F = (P + chi)/2 with errors combined in quadrature.

    When the fringe amplitude C is supplied, the rotated-frame fidelity
    (P + C)/2 — the fidelity against the best phase-rotated target — is
    reported alongside.
    """
    value = 0.5 * (p_est[0] + chi_est[0])
    err = 0.5 * math.hypot(p_est[1], chi_est[1])
    comps = {
        "P": p_est[0],
        "P_err": p_est[1],
        "chi": chi_est[0],
        "chi_err": chi_est[1],
    }
    if coherence_est is not None:
        comps["C"] = coherence_est[0]
        comps["C_err"] = coherence_est[1]
        comps["rotated_fidelity"] = 0.5 * (p_est[0] + coherence_est[0])
        comps["rotated_fidelity_err"] = 0.5 * math.hypot(p_est[1], coherence_est[1])
    if extra_components:
        comps.update(extra_components)
    return FidelityEstimate(
        value=value,
        std_error=err,
        method="parity_oscillation",
        mitigation=mitigation,
        components=comps,
    )


def trex_mitigate(
    raw: float,
    raw_err: float,
    cal: ReadoutCalibration,
    support,
    floor: float = 1e-3,
) -> tuple[float, float]:
    """Rescale a twirled expectation value by the readout baseline.

    Valid because symmetric per-qubit readout flips shrink every +/-1
    product observable by exactly prod(1 - 2 eps_j) over its support.
    """
    b = cal.baseline(support)
    if abs(b) < floor:
        raise MitigationError(f"readout baseline {b} below floor {floor}")
    return raw / b, abs(raw_err / b)


# -- high-level estimation from shot data ----------------------------------------


def draw_dfe_labels(
    n: int, m: int, key: int, stratified: bool = False
) -> list[StabilizerLabel]:
    """m label draws (with replacement).  Stratified mode alternates the
    diagonal coin deterministically (half/half, diagonal first) while the
    supports stay uniform; the plain mean then still estimates fidelity
    since both group halves enter with equal weight."""
    r = rng.CounterRNG(key)
    labels = []
    for t in range(m):
        lab = sample_stabilizer_uniform(n, r)
        if stratified:
            lab = StabilizerLabel(n=n, x_part=(t % 2 == 1), mask=lab.mask)
        labels.append(lab)
    return labels


def stabilizer_outcomes(
    label: StabilizerLabel, data: ShotData, post_select: bool = True
) -> np.ndarray:
    """Signed +/-1 shot outcomes of one stabilizer (sign not yet applied).

    Diagonal labels reuse the Z-basis run (parity of the supported bits);
    off-diagonal labels read their dedicated rotated-basis run.
    """
    run = data.run_for(label.setting())
    sel = run.accepted if post_select else np.ones(run.n_shots, dtype=bool)
    if label.diagonal:
        mask_words = np.zeros(run.bit_words.shape[1], dtype=np.uint64)
        for w in range(len(mask_words)):
            mask_words[w] = (label.mask >> (64 * w)) & rng.MASK64
        pops = np.bitwise_count(run.bit_words[sel] & mask_words[None, :]).sum(axis=1)
        return np.where(pops % 2 == 0, 1, -1).astype(np.int8)
    return run.outcomes[sel]


def estimate_dfe(
    labels: list[StabilizerLabel],
    data: ShotData,
    cal: ReadoutCalibration | None = None,
    mitigation: str = "trex",
    post_select: bool = True,
) -> FidelityEstimate:
    estimates = []
    per_label = []
    for lab in labels:
        mean, var = stabilizer_expectation(stabilizer_outcomes(lab, data, post_select), lab.sign)
        err = math.sqrt(var)
        if mitigation == "trex" and cal is not None:
            support = (
                [d for d in range(lab.n) if (lab.mask >> d) & 1]
                if lab.diagonal
                else list(range(lab.n))
            )
            mean, err = trex_mitigate(mean, err, cal, support)
        estimates.append((mean, err * err))
        per_label.append({"label": lab.describe(), "sign": lab.sign, "value": mean, "err": err})
    est = dfe_fidelity(labels, estimates, mitigation=mitigation if cal else "none")
    est.components["per_label"] = per_label
    return est


def parity_signal(
    data: ShotData,
    n: int,
    cal: ReadoutCalibration | None = None,
    mitigation: str = "trex",
    post_select: bool = True,
) -> tuple[ParityOscillationSignal, ParityOscillationSignal]:
    """(raw, mitigated) parity signals on the Fourier grid."""
    raw_vals, raw_errs, mit_vals, mit_errs = [], [], [], []
    for phi in signal_angles(n):
        run = data.run_for(MeasurementSetting("parity", phi=phi))
        sel = run.accepted if post_select else np.ones(run.n_shots, dtype=bool)
        outcomes = run.outcomes[sel]
        mean, var = stabilizer_expectation(outcomes)
        err = math.sqrt(var)
        raw_vals.append(mean)
        raw_errs.append(err)
        if mitigation == "trex" and cal is not None:
            m, e = trex_mitigate(mean, err, cal, range(n))
        else:
            m, e = mean, err
        mit_vals.append(m)
        mit_errs.append(e)
    return (
        ParityOscillationSignal(n, raw_vals, raw_errs),
        ParityOscillationSignal(n, mit_vals, mit_errs),
    )


def estimate_parity_oscillation(
    data: ShotData,
    n: int,
    cal: ReadoutCalibration | None = None,
    post_select: bool = True,
) -> tuple[FidelityEstimate, ParityOscillationSignal, ParityOscillationSignal]:
    raw, mitigated = parity_signal(data, n, cal, post_select=post_select)
    four = fourier_components(mitigated)
    p_mit = "tensored_inverse" if cal is not None else "none"
    p_est = population(data.run_for(MeasurementSetting("z")), n, cal, p_mit, post_select)
    est = combine_fidelity(
        p_est,
        (four["chi"], four["chi_err"]),
        coherence_est=(four["C"], four["C_err"]),
        mitigation=f"trex+{p_mit}" if cal is not None else "none",
        extra_components={
            "theta": four["theta"],
            "theta_err": four["theta_err"],
            "I_n_re": four["I_n"].real,
            "I_n_im": four["I_n"].imag,
            "I_minus_n_re": four["I_minus_n"].real,
            "I_minus_n_im": four["I_minus_n"].imag,
        },
    )
    return est, raw, mitigated


def wilson_interval(k: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)
