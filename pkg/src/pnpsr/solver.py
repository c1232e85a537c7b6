"""Forward-backward plug-and-play solver with trace recording and sweeps.

The iteration is x[k+1] = D(x[k] - tau * A^T (A x[k] - z)) where D is any
denoiser honoring the strength contract (strength = tau * lambda).  With D
the exact prox of tau * lambda * g this is the classical forward-backward
scheme, exposed separately as fb_classic with step-size validation and an
objective trace.

Each iteration costs one forward application, one adjoint application and
one denoiser call; A x is carried between iterations.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .denoise import DenoiserSpec, denoise_bands, tv_value, wavelet_detail_l1
from .errors import PnpsrError, ValidationError
from .forward import ForwardModel, adjoint_bands, forward_bands, operator_norm
from .metrics import bicubic_upsample, psnr as psnr_metric, ssim as ssim_metric
from .raster import MultispectralImage

INIT_KINDS = ("adjoint", "bicubic", "zeros")
DIVERGENCE_CAP = 1e3
PROX_KINDS = ("wavelet_soft", "tv_prox")


@dataclass(frozen=True)
class SolveConfig:
    tau: float
    lam: float
    max_iters: int = 200
    tol: float = 1e-5
    init: str = "bicubic"
    record_psnr_against: MultispectralImage | None = None

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise ValidationError(f"tau must be positive, got {self.tau}")
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ValidationError(f"lambda must be >= 0, got {self.lam}")
        if self.max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        if not (np.isfinite(self.tol) and self.tol >= 0):
            raise ValidationError(f"tol must be >= 0, got {self.tol}")
        if self.init not in INIT_KINDS:
            raise ValidationError(f"init must be one of {INIT_KINDS}, got {self.init!r}")


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one solve.  Every trace has length iterations_run.

    diverged is set exactly when a trace value went non-finite or the
    relative residual exceeded the divergence cap; in that case `final` is
    the last finite iterate.
    """

    final: MultispectralImage
    iterations_run: int
    residual_trace: tuple
    data_fidelity_trace: tuple
    psnr_trace: tuple | None
    objective_trace: tuple | None
    diverged: bool


def composite_objective(arr: np.ndarray, z: MultispectralImage, m: ForwardModel,
                        lam: float, prox_kind: str) -> float:
    """The classical FB objective 0.5*||Ax - z||^2 + lam * g(x)."""
    if prox_kind not in PROX_KINDS:
        raise ValidationError(f"prox kind must be one of {PROX_KINDS}, got {prox_kind!r}")
    residual = forward_bands(arr, m) - z.data
    fidelity = 0.5 * float(np.sum(residual * residual))
    g = wavelet_detail_l1 if prox_kind == "wavelet_soft" else tv_value
    return fidelity + lam * sum(g(b) for b in arr)


def _initial_iterate(z: MultispectralImage, m: ForwardModel, init: str) -> np.ndarray:
    if init == "adjoint":
        return adjoint_bands(z.data, m)
    if init == "bicubic":
        return bicubic_upsample(z, m.s).data.copy()
    hr = (z.band_count, z.height * m.s, z.width * m.s)
    return np.zeros(hr)


def _run(z: MultispectralImage, m: ForwardModel, d: DenoiserSpec, cfg: SolveConfig,
         objective_kind: str | None = None) -> SolveReport:
    hr_pixel_size = z.pixel_size / m.s
    ref = cfg.record_psnr_against
    if ref is not None:
        want = (z.band_count, z.height * m.s, z.width * m.s)
        if ref.data.shape != want:
            raise ValidationError(f"PSNR reference shape {ref.data.shape} does not match HR grid {want}")

    x = _initial_iterate(z, m, cfg.init)
    ax = forward_bands(x, m)
    residuals, fidelities, psnrs, objectives = [], [], [], []
    diverged = False

    def clipped_image(arr):
        return MultispectralImage(
            data=np.clip(arr, 0.0, 1.0), band_names=z.band_names,
            pixel_size=hr_pixel_size, scale_applied=z.scale_applied,
        )

    for k in range(cfg.max_iters):
        grad = adjoint_bands(ax - z.data, m)
        try:
            x_new = denoise_bands(d, x - cfg.tau * grad, cfg.tau * cfg.lam)
        except PnpsrError as e:
            raise type(e)(f"denoiser failed at iteration {k}: {e}") from e

        norm_prev = float(np.linalg.norm(x))
        step = float(np.linalg.norm(x_new - x))
        residual = step / (norm_prev if norm_prev > 0 else 1.0)
        residuals.append(residual)

        if not np.isfinite(x_new).all() or not np.isfinite(residual):
            fidelities.append(float("inf"))
            if ref is not None:
                psnrs.append(float("nan"))
            if objective_kind is not None:
                objectives.append(float("inf"))
            diverged = True
            break

        ax = forward_bands(x_new, m)
        lr_residual = ax - z.data
        fidelities.append(0.5 * float(np.sum(lr_residual * lr_residual)))
        if ref is not None:
            psnrs.append(psnr_metric(clipped_image(x_new), ref))
        if objective_kind is not None:
            objectives.append(composite_objective(x_new, z, m, cfg.lam, objective_kind))

        x = x_new
        if residual > DIVERGENCE_CAP:
            diverged = True
            break
        if residual < cfg.tol:
            break

    final = MultispectralImage(
        data=x, band_names=z.band_names,
        pixel_size=hr_pixel_size, scale_applied=z.scale_applied,
    )
    return SolveReport(
        final=final,
        iterations_run=len(residuals),
        residual_trace=tuple(residuals),
        data_fidelity_trace=tuple(fidelities),
        psnr_trace=tuple(psnrs) if ref is not None else None,
        objective_trace=tuple(objectives) if objective_kind is not None else None,
        diverged=diverged,
    )


def fb_pnp(z: MultispectralImage, m: ForwardModel, d: DenoiserSpec, cfg: SolveConfig) -> SolveReport:
    """Plug-and-play forward-backward reconstruction of z on the HR grid.

    Large steps are allowed (the plugged denoiser may still contract) but
    guarded by the divergence cap.
    """
    return _run(z, m, d, cfg)


def fb_classic(z: MultispectralImage, m: ForwardModel, prox_kind: str, cfg: SolveConfig) -> SolveReport:
    """Classical forward-backward with an exact or approximate prox.

    tau is validated against the operator norm: above 1/||A||^2 a warning
    is issued, above 2/||A||^2 the step cannot converge and is rejected.
    The composite objective is recorded per iteration.
    """
    if prox_kind not in PROX_KINDS:
        raise ValidationError(f"prox kind must be one of {PROX_KINDS}, got {prox_kind!r}")
    hr_dims = (z.height * m.s, z.width * m.s)
    lipschitz = operator_norm(m, hr_dims) ** 2
    if cfg.tau > 2.0 / lipschitz:
        raise ValidationError(
            f"tau={cfg.tau:g} exceeds the convergence bound 2/||A||^2 = {2.0 / lipschitz:g}"
        )
    if cfg.tau > 1.0 / lipschitz:
        warnings.warn(
            f"tau={cfg.tau:g} above 1/||A||^2 = {1.0 / lipschitz:g}; "
            "monotone descent is no longer guaranteed",
            stacklevel=2,
        )
    return _run(z, m, DenoiserSpec(kind=prox_kind), cfg, objective_kind=prox_kind)


@dataclass(frozen=True)
class SweepCell:
    tau: float
    lam: float
    iterations: int
    final_psnr: float
    final_ssim: float
    converged: bool
    diverged: bool
    report: SolveReport


def sweep(z: MultispectralImage, m: ForwardModel, d: DenoiserSpec,
          taus, lambdas, cfg_base: SolveConfig, threads: int = 1) -> list:
    """Full Cartesian tau x lambda grid, each cell an independent solve.

    Cells are returned in row-major (tau, lambda) order regardless of the
    thread count, so the output is deterministic.  A PSNR reference must be
    set on cfg_base.
    """
    taus = list(taus)
    lambdas = list(lambdas)
    if not taus or not lambdas:
        raise ValidationError("tau and lambda grids must be non-empty")
    if cfg_base.record_psnr_against is None:
        raise ValidationError("sweep needs cfg_base.record_psnr_against for the PSNR column")
    ref = cfg_base.record_psnr_against

    def run_cell(tau, lam):
        report = fb_pnp(z, m, d, replace(cfg_base, tau=tau, lam=lam))
        if report.diverged:
            final_psnr = float("nan")
            final_ssim = float("nan")
        else:
            clipped = report.final.with_data(np.clip(report.final.data, 0.0, 1.0))
            final_psnr = psnr_metric(clipped, ref)
            final_ssim = ssim_metric(clipped, ref)
        converged = (not report.diverged) and bool(report.residual_trace) \
            and report.residual_trace[-1] < cfg_base.tol
        return SweepCell(
            tau=float(tau), lam=float(lam), iterations=report.iterations_run,
            final_psnr=final_psnr, final_ssim=final_ssim,
            converged=converged, diverged=report.diverged, report=report,
        )

    grid = [(tau, lam) for tau in taus for lam in lambdas]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda tl: run_cell(*tl), grid))
    return [run_cell(tau, lam) for tau, lam in grid]


def best_cell(cells) -> SweepCell | None:
    """Highest final PSNR among non-diverged cells; grid order breaks ties.

    Returns None when every cell diverged.
    """
    best = None
    for cell in cells:
        if cell.diverged or not np.isfinite(cell.final_psnr):
            continue
        if best is None or cell.final_psnr > best.final_psnr:
            best = cell
    return best
