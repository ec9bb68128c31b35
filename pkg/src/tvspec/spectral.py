"""Multiscale spectral TV decomposition, spectrum, and linear synthesis.

Two schemes are provided.  The forward scheme evolves the signal by implicit
Euler steps of the TV flow and extracts components as second finite
differences of the trajectory on the nonuniform time grid; the quadrature
weights are fixed so that the synthesis sum telescopes exactly back to the
input.  The inverse scale-space scheme starts from the area-weighted mean
and converges to the input; there a single difference per step is the
component and all synthesis weights are one.  In both cases the leftover
``residual`` closes the telescope, so an all-pass reconstruction returns the
input exactly.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FilterShapeMismatchError, ParseError
from .solver import (
    ProxProblem,
    RofResult,
    default_config,
    rof_energy,
    solve_rof,
    solve_rof_per_channel,
    tv_energy,
    weighted_mean,
)

logger = logging.getLogger(__name__)

TVSD_MAGIC = b"TVSD"
TVSD_VERSION = 1

_SCHEMES = ("forward", "inverseScaleSpace")
_DOMAINS = ("vertices", "faces", "points")


@dataclass
class ScheduleConfig:
    """Diffusion-time schedule: maximum time, geometric decay, step count.

    ``alpha_max=None`` triggers :func:`estimate_alpha_max`.  ``n_steps=None``
    derives the count from the decay: enough rescalings to shrink the step
    by ``alpha_min_ratio`` (decay 0.7 and ratio 1e-3 give 20).
    """

    alpha_max: float | None = None
    decay: float = 0.7
    n_steps: int | None = None
    alpha_min_ratio: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.decay < 1.0:
            raise ValueError("decay must lie in (0, 1)")

    def resolved_steps(self):
        if self.n_steps is not None:
            if self.n_steps < 1:
                raise ValueError("n_steps must be >= 1")
            return int(self.n_steps)
        return max(1, math.ceil(math.log(self.alpha_min_ratio) / math.log(self.decay)))


@dataclass
class SpectralDecomposition:
    """Ordered spectral components with everything needed for synthesis.

    ``components[k]`` lives on the same domain and channels as the input;
    ``times`` are strictly increasing diffusion times, ``steps`` the grid
    intervals, ``weights`` the synthesis quadrature, and ``residual`` the
    exact closing term of the telescoped sum.
    """

    scheme: str
    domain: str
    times: np.ndarray
    steps: np.ndarray
    components: np.ndarray  # (N, n, channels)
    mean_part: np.ndarray   # (channels,)
    residual: np.ndarray    # (n, channels)
    source_digest: str = ""
    area_weights: np.ndarray | None = None
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if self.scheme not in _SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.domain not in _DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}")
        if len(self.times) != len(self.components) or len(self.times) != len(self.steps):
            raise ValueError("times, steps, and components must have equal length")
        if len(self.times) > 1 and not (np.diff(self.times) > 0).all():
            raise ValueError("times must be strictly increasing")

    @property
    def n_components(self):
        return len(self.times)

    @property
    def n_elements(self):
        return self.components.shape[1]

    @property
    def channels(self):
        return self.components.shape[2]

    def weights(self):
        """Synthesis quadrature weight per component."""
        if self.scheme == "inverseScaleSpace":
            return np.ones(self.n_components)
        return self.times * _forward_bin_widths(self.steps)

    def bin_widths(self):
        """Effective spectrum bin width per component."""
        if self.scheme == "inverseScaleSpace":
            return self.steps.copy()
        return _forward_bin_widths(self.steps)


def _forward_bin_widths(steps):
    widths = np.empty(len(steps))
    widths[:-1] = 0.5 * (steps[:-1] + steps[1:])
    widths[-1] = 0.5 * steps[-1]
    return widths


def _as_matrix(values):
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    return values


def _is_constant(u0, mean):
    spread = np.abs(u0 - mean).max()
    return bool(spread <= 1e-12 * max(1.0, np.abs(mean).max()))


def _constant_decomposition(scheme, u0, mean, a, domain, schedule, source_digest):
    """A constant signal carries no spectral activity: one zero component."""
    alpha = schedule.alpha_max if schedule.alpha_max is not None else 1.0
    return SpectralDecomposition(
        scheme=scheme, domain=domain,
        times=np.array([alpha]), steps=np.array([alpha]),
        components=np.zeros((1,) + u0.shape), mean_part=mean,
        residual=u0 - mean, source_digest=source_digest,
        area_weights=np.asarray(a, dtype=np.float64),
    )


def _sphere_project(u, floor=1e-8):
    norms = np.linalg.norm(u, axis=1)
    safe = norms > floor
    out = u.copy()
    out[safe] /= norms[safe, None]
    return out


def _tight_probe_config(cfg):
    from dataclasses import replace

    return replace(cfg, gap_tol=min(cfg.gap_tol, 1e-7),
                   max_iter=max(cfg.max_iter, 8000))


def _step_solver(ops, domain, per_channel):
    def run(data, alpha, cfg):
        problem = ProxProblem(ops=ops, alpha=alpha, tv_kind="isotropic",
                              domain=domain, data=data)
        if per_channel:
            return solve_rof_per_channel(problem, cfg)
        return solve_rof(problem, cfg)
    return run


def estimate_alpha_max(u0, ops, domain, solver_cfg=None, collapse_tol=1e-3):
    """Smallest step length (within factor two) that flattens the signal.

    Runs the TV proximal problem on the input and grows or shrinks the step
    geometrically until the solution is within ``collapse_tol`` of the
    input's area-weighted mean; beyond that time no spectral activity
    remains.  A constant input returns 1 by convention.
    """
    u0 = _as_matrix(u0)
    a = ops.primal_weights(domain)
    mean = weighted_mean(u0, a)
    diff = u0 - mean
    r0 = math.sqrt(float(a @ np.sum(diff * diff, axis=1)))
    scale = math.sqrt(float(a @ np.sum(u0 * u0, axis=1)))
    if r0 <= 1e-12 * max(1.0, scale):
        return 1.0
    tv0 = tv_energy(ops, domain, u0)
    if tv0 <= 1e-12 * max(1.0, scale):
        return 1.0
    if solver_cfg is None:
        solver_cfg = default_config(ops, domain, channels=u0.shape[1])
    # near the extinction time the residual contrast is dominated by solver
    # error, so probes run much tighter than the decomposition itself
    probe_cfg = _tight_probe_config(solver_cfg)
    per_channel = domain != "faces"
    run = _step_solver(ops, domain, per_channel)

    def collapsed(alpha):
        res = run(u0, alpha, probe_cfg)
        d = res.u - mean
        return math.sqrt(float(a @ np.sum(d * d, axis=1))) / r0 < collapse_tol

    alpha = (r0 * r0) / (3.0 * tv0)
    if collapsed(alpha):
        for _ in range(60):
            if not collapsed(alpha / 2.0):
                break
            alpha /= 2.0
        return float(alpha)
    for _ in range(60):
        alpha *= 2.0
        if collapsed(alpha):
            return float(alpha)
    logger.warning("alpha search hit its doubling cap; returning %g", alpha)
    return float(alpha)


def decompose_forward(u0, schedule, ops, domain="vertices", solver_cfg=None,
                      sphere_project=False, source_digest="", keep_iterates=False):
    """Forward-flow decomposition on a geometric time grid.

    Steps the TV flow implicitly over ``t_k = alpha_max * decay^(N-k)``,
    forms components from second differences of the trajectory, and fixes
    the synthesis weights so the all-pass sum returns the input exactly.
    ``sphere_project`` renormalizes each iterate row-wise (normal fields).
    """
    u0 = _as_matrix(u0)
    a = ops.primal_weights(domain)
    mean = weighted_mean(u0, a)
    if _is_constant(u0, mean):
        return _constant_decomposition("forward", u0, mean, a, domain,
                                       schedule, source_digest)

    alpha_max = schedule.alpha_max
    if alpha_max is None:
        alpha_max = estimate_alpha_max(u0, ops, domain, solver_cfg)
    n = schedule.resolved_steps()
    times = alpha_max * schedule.decay ** (n - 1 - np.arange(n, dtype=np.float64))
    steps = np.diff(np.concatenate([[0.0], times]))

    if solver_cfg is None:
        solver_cfg = default_config(ops, domain, channels=u0.shape[1])
    per_channel = domain != "faces"
    run = _step_solver(ops, domain, per_channel)

    warnings = []
    step_iterations = []
    iterates = [u0]
    u = u0
    for k in range(n):
        res = run(u, steps[k], solver_cfg)
        u = res.u
        if sphere_project:
            u = _sphere_project(u)
        if not res.converged:
            warnings.append(k)
        step_iterations.append(res.iterations)
        iterates.append(u)

    slopes = [(iterates[k + 1] - iterates[k]) / steps[k] for k in range(n)]
    jumps = [slopes[k + 1] - slopes[k] for k in range(n - 1)]
    jumps.append(-slopes[n - 1])
    widths = _forward_bin_widths(steps)
    components = np.stack([jumps[k] / widths[k] for k in range(n)])

    dec = SpectralDecomposition(
        scheme="forward", domain=domain, times=times, steps=steps,
        components=components, mean_part=mean,
        residual=np.zeros_like(u0), source_digest=source_digest,
        area_weights=np.asarray(a, dtype=np.float64), warnings=warnings,
    )
    dec.residual = u0 - reconstruct(dec, None)
    dec.step_iterations = step_iterations
    if keep_iterates:
        dec.iterates = iterates
    if warnings:
        logger.warning("forward decomposition: %d step(s) not converged", len(warnings))
    return dec


def decompose_inverse(u0, schedule, ops, domain="vertices", solver_cfg=None,
                      source_digest=""):
    """Inverse scale-space decomposition.

    Starts from the area-weighted mean and converges to the input while the
    step length decays geometrically from ``alpha_max``; each component is
    the difference of consecutive iterates, and the source-term variable is
    rescaled by the step ratio between iterations.  Components are reported
    on the equivalent forward time axis (reciprocal of the accumulated
    inverse clock), reordered so times increase.
    """
    u0 = _as_matrix(u0)
    a = ops.primal_weights(domain)
    mean = weighted_mean(u0, a)
    if _is_constant(u0, mean):
        return _constant_decomposition("inverseScaleSpace", u0, mean, a, domain,
                                       schedule, source_digest)

    alpha_max = schedule.alpha_max
    if alpha_max is None:
        alpha_max = estimate_alpha_max(u0, ops, domain, solver_cfg)
    n = schedule.resolved_steps()
    alphas = alpha_max * schedule.decay ** np.arange(n, dtype=np.float64)

    if solver_cfg is None:
        solver_cfg = default_config(ops, domain, channels=u0.shape[1])
    per_channel = domain != "faces"
    run = _step_solver(ops, domain, per_channel)

    warnings = []
    step_iterations = []
    u = np.broadcast_to(mean, u0.shape).copy()
    v = np.zeros_like(u0)
    components = []
    clock = 0.0
    times_eq = []
    for k in range(n):
        res = run(u0 + v, alphas[k], solver_cfg)
        step_iterations.append(res.iterations)
        if not res.converged:
            warnings.append(k)
        u_new = res.u
        components.append(u_new - u)
        u = u_new
        clock += 1.0 / alphas[k]
        times_eq.append(1.0 / clock)
        if k + 1 < n:
            # variable-step source update: ratio of consecutive inverse steps
            # scales the accumulated residual feedback
            v = schedule.decay * (v + (u0 - u_new))

    order = slice(None, None, -1)
    times = np.array(times_eq)[order]
    components = np.stack(components)[order]
    steps = np.diff(np.concatenate([[0.0], times]))

    dec = SpectralDecomposition(
        scheme="inverseScaleSpace", domain=domain, times=times, steps=steps,
        components=components, mean_part=mean,
        residual=u0 - (components.sum(axis=0) + mean),
        source_digest=source_digest,
        area_weights=np.asarray(a, dtype=np.float64),
        warnings=sorted(n - 1 - k for k in warnings),
    )
    dec.step_iterations = step_iterations
    if warnings:
        logger.warning("inverse decomposition: %d step(s) not converged", len(warnings))
    return dec


def spectrum(dec):
    """Spectral activity per time bin: integrated per-element norm of each component."""
    w = dec.area_weights
    if w is None:
        w = np.ones(dec.n_elements)
    norms = np.linalg.norm(dec.components, axis=2)  # (N, n)
    return dec.times.copy(), norms @ w


def reconstruct(dec, filt=None):
    """Linear synthesis: weighted gain-scaled sum of components plus the mean.

    ``filt`` may be ``None`` (all-pass), an object with ``gain_at(times)``,
    or a gain array with one entry per component.  An all-pass gain adds the
    stored residual so the input is returned exactly.
    """
    gains = _resolve_gains(dec, filt)
    out = np.tensordot(dec.weights() * gains, dec.components, axes=(0, 0))
    out = out + dec.mean_part
    if np.all(gains == 1.0):
        out = out + dec.residual
    return out


def _resolve_gains(dec, filt):
    if filt is None:
        return np.ones(dec.n_components)
    if hasattr(filt, "gain_at"):
        gains = np.asarray(filt.gain_at(dec.times), dtype=np.float64)
    else:
        gains = np.asarray(filt, dtype=np.float64)
    if gains.shape != (dec.n_components,):
        raise FilterShapeMismatchError(
            f"filter provides {gains.shape} gains for {dec.n_components} components"
        )
    return gains


def spectrum_peaks(s, threshold_frac=0.1):
    """Indices of local maxima of the spectrum above a fraction of its peak."""
    s = np.asarray(s, dtype=np.float64)
    if len(s) == 0 or s.max() <= 0:
        return []
    thr = threshold_frac * s.max()
    peaks = []
    for k in range(len(s)):
        left = s[k - 1] if k > 0 else -np.inf
        right = s[k + 1] if k + 1 < len(s) else -np.inf
        if s[k] > thr and s[k] >= left and s[k] > right:
            peaks.append(k)
    return peaks


# ---------------------------------------------------------------------------
# container I/O

_SCHEME_CODE = {"forward": 0, "inverseScaleSpace": 1}
_DOMAIN_CODE = {"vertices": 0, "faces": 1, "points": 2}


def decomposition_bytes(dec):
    """Serialize to the TVSD binary container (little endian)."""
    digest = dec.source_digest.encode("ascii")
    flags = 1 if dec.area_weights is not None else 0
    head = TVSD_MAGIC + struct.pack(
        "<IBBHIII",
        TVSD_VERSION,
        _SCHEME_CODE[dec.scheme],
        _DOMAIN_CODE[dec.domain],
        dec.channels,
        dec.n_components,
        dec.n_elements,
        flags,
    )
    parts = [
        head,
        dec.times.astype("<f8").tobytes(),
        dec.steps.astype("<f8").tobytes(),
        dec.mean_part.astype("<f8").tobytes(),
        dec.components.astype("<f8").tobytes(),
        dec.residual.astype("<f8").tobytes(),
    ]
    if dec.area_weights is not None:
        parts.append(dec.area_weights.astype("<f8").tobytes())
    parts.append(struct.pack("<I", len(digest)) + digest)
    warn = np.asarray(dec.warnings, dtype="<u4")
    parts.append(struct.pack("<I", len(warn)) + warn.tobytes())
    return b"".join(parts)


def save_decomposition(path, dec):
    with open(path, "wb") as fh:
        fh.write(decomposition_bytes(dec))


def load_decomposition(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    return decomposition_from_bytes(blob)


def decomposition_from_bytes(blob):
    if len(blob) < 24 or blob[:4] != TVSD_MAGIC:
        raise ParseError("not a TVSD container")
    version, scheme_c, domain_c, channels, n, elems, flags = struct.unpack(
        "<IBBHIII", blob[4:24]
    )
    if version != TVSD_VERSION:
        raise ParseError(f"unsupported TVSD version {version}")
    schemes = {v: k for k, v in _SCHEME_CODE.items()}
    domains = {v: k for k, v in _DOMAIN_CODE.items()}
    if scheme_c not in schemes or domain_c not in domains:
        raise ParseError("corrupt TVSD header")

    off = 24

    def take(count):
        nonlocal off
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=off)
        off += 8 * count
        return arr.copy()

    try:
        times = take(n)
        steps = take(n)
        mean = take(channels)
        components = take(n * elems * channels).reshape(n, elems, channels)
        residual = take(elems * channels).reshape(elems, channels)
        weights = take(elems) if flags & 1 else None
        (dlen,) = struct.unpack_from("<I", blob, off)
        off += 4
        digest = blob[off:off + dlen].decode("ascii")
        off += dlen
        (wlen,) = struct.unpack_from("<I", blob, off)
        off += 4
        warnings = np.frombuffer(blob, dtype="<u4", count=wlen, offset=off)
        off += 4 * wlen
    except (ValueError, struct.error) as exc:
        raise ParseError(f"truncated TVSD container: {exc}") from exc
    if off != len(blob):
        raise ParseError("TVSD container has trailing bytes")

    return SpectralDecomposition(
        scheme=schemes[scheme_c], domain=domains[domain_c],
        times=times, steps=steps, components=components,
        mean_part=mean, residual=residual, source_digest=digest,
        area_weights=weights, warnings=list(map(int, warnings)),
    )


def write_spectrum_csv(path, dec):
    times, s = spectrum(dec)
    with open(path, "w") as fh:
        fh.write("t,s\n")
        for t, v in zip(times, s):
            fh.write(f"{t:.17g},{v:.17g}\n")
