"""Real spherical-harmonic color evaluation for splat radiance.

Coefficients are ordered DC first, then higher bands band-major, matching
the common splat PLY export. Basis constants follow the usual real-SH
normalization; the DC-only color of a zero coefficient vector is 0.5 grey.
"""

from __future__ import annotations

import numpy as np

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
)
SH_C3 = (
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
)

# (x, y, z) parities of each basis function, band-major; used to transform
# coefficients under axis sign flips (e.g. coordinate-convention changes).
_BASIS_PARITY = [
    (0, 0, 0),
    (0, 1, 0), (0, 0, 1), (1, 0, 0),
    (1, 1, 0), (0, 1, 1), (0, 0, 0), (1, 0, 1), (0, 0, 0),
    (0, 1, 0), (1, 1, 1), (0, 1, 0), (0, 0, 1), (1, 0, 0), (0, 0, 1), (1, 0, 0),
]


def num_coeffs(degree: int) -> int:
    return (degree + 1) ** 2


def degree_for_coeffs(n: int) -> int:
    degree = int(round(np.sqrt(n))) - 1
    if num_coeffs(degree) != n or not 0 <= degree <= 3:
        raise ValueError(f"coefficient count {n} is not (d+1)^2 for d in 0..3")
    return degree


def sh_basis(view_dir, degree: int):
    """Basis values for unit directions (..., 3) -> (..., (degree+1)^2)."""
    d = np.asarray(view_dir, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    out = np.empty(d.shape[:-1] + (num_coeffs(degree),))
    out[..., 0] = SH_C0
    if degree >= 1:
        out[..., 1] = -SH_C1 * y
        out[..., 2] = SH_C1 * z
        out[..., 3] = -SH_C1 * x
    if degree >= 2:
        xx, yy, zz = x * x, y * y, z * z
        out[..., 4] = SH_C2[0] * x * y
        out[..., 5] = SH_C2[1] * y * z
        out[..., 6] = SH_C2[2] * (2.0 * zz - xx - yy)
        out[..., 7] = SH_C2[3] * x * z
        out[..., 8] = SH_C2[4] * (xx - yy)
    if degree >= 3:
        xx, yy, zz = x * x, y * y, z * z
        out[..., 9] = SH_C3[0] * y * (3.0 * xx - yy)
        out[..., 10] = SH_C3[1] * x * y * z
        out[..., 11] = SH_C3[2] * y * (4.0 * zz - xx - yy)
        out[..., 12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy)
        out[..., 13] = SH_C3[4] * x * (4.0 * zz - xx - yy)
        out[..., 14] = SH_C3[5] * z * (xx - yy)
        out[..., 15] = SH_C3[6] * x * (xx - 3.0 * yy)
    return out


def eval_sh(sh_coeffs, view_dir, degree: int | None = None):
    """Evaluate view-dependent color: clamp(0.5 + sum(basis * coeff), min=0).

    sh_coeffs: (..., K, 3) with K >= (degree+1)^2; view_dir: unit (..., 3).
    When degree is None it is inferred from K. Result is linear RGB,
    clamped below at zero and unclamped above.
    """
    c = np.asarray(sh_coeffs, dtype=np.float64)
    if degree is None:
        degree = degree_for_coeffs(c.shape[-2])
    k = num_coeffs(degree)
    basis = sh_basis(view_dir, degree)
    color = 0.5 + np.einsum("...k,...kc->...c", basis, c[..., :k, :])
    return np.maximum(color, 0.0)


def sh_flip_signs(degree: int, axis_signs) -> np.ndarray:
    """Per-coefficient signs so that coeffs*signs evaluated at the flipped
    direction reproduce the original color: basis_i(S d) = s_i * basis_i(d)
    for S = diag(axis_signs) with entries in {-1, +1}."""
    sx, sy, sz = (int(v) for v in axis_signs)
    if {sx, sy, sz} - {-1, 1}:
        raise ValueError("axis_signs must be +-1")
    signs = np.array(
        [sx**px * sy**py * sz**pz for px, py, pz in _BASIS_PARITY[: num_coeffs(degree)]],
        dtype=np.float64,
    )
    return signs
