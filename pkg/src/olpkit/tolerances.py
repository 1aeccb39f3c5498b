"""Numerical tolerances and clamps used throughout the toolkit.

Every magic constant that guards a floating-point comparison or a
transform lives here so that all modules agree on one set of values.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    """Toolkit-wide numerical constants.

    Attributes
    ----------
    pinv_residual : float
        Allowed residual of ``G^T @ pinv - I``, scaled by the condition
        number of ``G^T``.
    projector : float
        Allowed deviation from the projector axioms (Hermitian, idempotent,
        annihilates the row space).
    sinr_dual_rel : float
        Relative agreement required between the per-column and the
        effective-channel SINR formulas.
    row_norm_slack : float
        Slack above 1.0 tolerated on per-AP precoder row norms after the
        power projection.
    decomposition : float
        Absolute reconstruction error allowed for the three-way precoder
        split.
    postprocess_rel : float
        Relative size (w.r.t. ``max|A|``) of the residual diagonal /
        off-diagonal terms that postprocessing must null out.
    mag_clamp : float
        Magnitudes below this are clamped before the log2 transform and
        their phase is defined as 0.  Chosen far below the physical
        channel-magnitude floor.
    layer_norm_eps : float
        Guard added to the variance in layer normalization.
    """

    pinv_residual: float = 1e-9
    projector: float = 1e-9
    sinr_dual_rel: float = 1e-12
    row_norm_slack: float = 1e-12
    decomposition: float = 1e-12
    postprocess_rel: float = 1e-9
    mag_clamp: float = 2.0 ** -60
    layer_norm_eps: float = 1e-5


TOL = Tolerances()
