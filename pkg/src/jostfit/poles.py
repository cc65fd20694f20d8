"""Certified zero search for Jost-type functions at complex energy.

A rectangular region of the complex E plane is scanned with the argument
principle: the winding number of f along the boundary counts the enclosed
zeros, boxes are subdivided until each holds a single zero, and the zero is
then polished with Muller iteration.  The count of refined zeros is checked
against the whole-region winding number.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryError, IncompleteSearchError, RefinementError
from .jostmodel import Resonance, jost_from_AB, _eval_any
from .specfun import Kinematics, SheetSelector

__all__ = [
    "SearchRegion",
    "contour_count",
    "refine_zero",
    "find_zeros",
    "find_resonances",
    "resonances_to_csv",
    "resonances_to_json_dicts",
]

#: boxes are not split below this height in Im E (narrow-resonance floor)
MIN_BOX_HEIGHT = 1e-8

#: maximum |log f(b)/f(a)| accepted between adjacent boundary samples; the
#: bound on the magnitude part guards against 2 pi phase aliasing
_LOG_STEP = 0.75

_TINY = 1e-280


@dataclass(frozen=True)
class SearchRegion:
    """Rectangle re_range x im_range of complex E on a selected sheet."""

    re_range: tuple
    im_range: tuple
    sheet: SheetSelector = field(default_factory=lambda: SheetSelector(-1, 0))
    grid: tuple = (4, 2)

    def __post_init__(self):
        re_lo, re_hi = (float(x) for x in self.re_range)
        im_lo, im_hi = (float(x) for x in self.im_range)
        if not (re_lo < re_hi and im_lo < im_hi):
            raise ValueError("ranges must be nonempty intervals")
        if re_lo <= 0.0 <= re_hi and im_lo <= 0.0 <= im_hi:
            raise ValueError("search region must exclude E = 0")
        object.__setattr__(self, "re_range", (re_lo, re_hi))
        object.__setattr__(self, "im_range", (im_lo, im_hi))

    @property
    def corners(self) -> list:
        re_lo, re_hi = self.re_range
        im_lo, im_hi = self.im_range
        return [
            complex(re_lo, im_lo),
            complex(re_hi, im_lo),
            complex(re_hi, im_hi),
            complex(re_lo, im_hi),
        ]

    def replace(self, re_range=None, im_range=None) -> "SearchRegion":
        return SearchRegion(
            re_range or self.re_range, im_range or self.im_range, self.sheet, self.grid
        )


def _edge_winding(f, za, fa, zb, fb, depth: int) -> float:
    """Accumulated phase change of f along segment za -> zb, adaptively."""
    if abs(fa) < _TINY or abs(fb) < _TINY:
        raise BoundaryError(f"f vanishes on the contour near {za if abs(fa) < _TINY else zb}")
    w = cmath.log(fb / fa)
    if abs(w) <= _LOG_STEP:
        return w.imag
    if depth <= 0:
        raise BoundaryError(f"phase step not resolvable on segment {za} .. {zb}")
    zm = 0.5 * (za + zb)
    fm = f(zm)
    return _edge_winding(f, za, fa, zm, fm, depth - 1) + _edge_winding(
        f, zm, fm, zb, fb, depth - 1
    )


def contour_count(f, region: SearchRegion) -> int:
    """Number of zeros of f enclosed by the region boundary (winding number)."""
    corners = region.corners
    n_re, n_im = max(2, int(region.grid[0])), max(2, int(region.grid[1]))
    segs_per_edge = (n_re, n_im, n_re, n_im)
    pts = []
    for i, (za, zb) in enumerate(zip(corners, corners[1:] + corners[:1])):
        n = segs_per_edge[i]
        for j in range(n):
            pts.append(za + (zb - za) * j / n)
    vals = [f(z) for z in pts]
    total = 0.0
    for i in range(len(pts)):
        za, fa = pts[i], vals[i]
        zb, fb = pts[(i + 1) % len(pts)], vals[(i + 1) % len(pts)]
        total += _edge_winding(f, za, fa, zb, fb, depth=48)
    return int(round(total / (2.0 * cmath.pi)))


def _count_with_perturbation(f, region: SearchRegion, attempts: int = 4) -> tuple[int, SearchRegion]:
    """contour_count with automatic boundary nudging on near-zero contact."""
    width = region.re_range[1] - region.re_range[0]
    height = region.im_range[1] - region.im_range[0]
    last_err = None
    for i in range(attempts):
        eps = 0.0 if i == 0 else (3.0**i) * 1e-6
        trial = region.replace(
            re_range=(region.re_range[0] - eps * width, region.re_range[1] + eps * width),
            im_range=(region.im_range[0] - eps * height, region.im_range[1] + eps * height),
        )
        try:
            return contour_count(f, trial), trial
        except BoundaryError as err:
            last_err = err
    raise BoundaryError(f"could not move the boundary off a zero: {last_err}")


def refine_zero(f, seed: complex, tol: float = 1e-12, *, spread: float = 1e-3, max_iter: int = 80) -> complex:
    """Polish a zero of f near seed by Muller (quadratic secant) iteration."""
    scale = max(abs(seed), 1.0)
    x0 = seed + spread * scale
    x1 = seed - spread * scale * 1j
    x2 = complex(seed)
    f0, f1, f2 = f(x0), f(x1), f(x2)
    for _ in range(max_iter):
        h1 = x1 - x0
        h2 = x2 - x1
        if h2 == 0 or h1 == 0:
            break
        d1 = (f1 - f0) / h1
        d2 = (f2 - f1) / h2
        dd = (d2 - d1) / (h2 + h1)
        b = d2 + h2 * dd
        disc = cmath.sqrt(b * b - 4.0 * f2 * dd)
        denom = b + disc if abs(b + disc) > abs(b - disc) else b - disc
        if denom == 0:
            raise RefinementError(f"Muller denominator vanished near {x2}")
        step = -2.0 * f2 / denom
        x_new = x2 + step
        if not np.isfinite(x_new.real) or not np.isfinite(x_new.imag):
            raise RefinementError(f"Muller iteration diverged near {x2}")
        x0, x1, x2 = x1, x2, x_new
        f0, f1, f2 = f1, f2, f(x_new)
        if abs(step) < tol * max(abs(x_new), 1.0):
            return x2
    if abs(x2 - seed) < 10.0 * spread * scale and abs(f2) < 1e-8 * max(abs(f0), abs(f1), 1e-30):
        return x2
    raise RefinementError(f"Muller did not converge from seed {seed} (last {x2}, |f|={abs(f2):.2e})")


def _split(region: SearchRegion) -> tuple[SearchRegion, SearchRegion]:
    width = region.re_range[1] - region.re_range[0]
    height = region.im_range[1] - region.im_range[0]
    if width >= height or height <= 2.0 * MIN_BOX_HEIGHT:
        mid = 0.5 * (region.re_range[0] + region.re_range[1])
        return (
            region.replace(re_range=(region.re_range[0], mid)),
            region.replace(re_range=(mid, region.re_range[1])),
        )
    mid = 0.5 * (region.im_range[0] + region.im_range[1])
    return (
        region.replace(im_range=(region.im_range[0], mid)),
        region.replace(im_range=(mid, region.im_range[1])),
    )


def _locate_single(f, region: SearchRegion, tol: float, depth: int = 60) -> complex:
    """Shrink a count-1 box until small, then hand the center to Muller."""
    width = region.re_range[1] - region.re_range[0]
    height = region.im_range[1] - region.im_range[0]
    scale = max(abs(c) for c in region.corners)
    if max(width, height) <= 2e-3 * max(scale, 1.0) or depth <= 0:
        center = complex(
            0.5 * (region.re_range[0] + region.re_range[1]),
            0.5 * (region.im_range[0] + region.im_range[1]),
        )
        z = refine_zero(f, center, tol, spread=0.3 * max(width, height) / max(scale, 1.0))
        return z
    a, b = _split(region)
    ca, _ = _count_with_perturbation(f, a)
    if ca == 1:
        return _locate_single(f, a, tol, depth - 1)
    cb, _ = _count_with_perturbation(f, b)
    if cb == 1:
        return _locate_single(f, b, tol, depth - 1)
    # the zero sits on (or hops across) the split line; fall back to Muller
    center = complex(
        0.5 * (region.re_range[0] + region.re_range[1]),
        0.5 * (region.im_range[0] + region.im_range[1]),
    )
    return refine_zero(f, center, tol, spread=0.3 * max(width, height) / max(scale, 1.0))


def find_zeros(f, region: SearchRegion, tol: float = 1e-12) -> list:
    """All zeros of f in the region, certified by winding-number counts."""
    total, counted_region = _count_with_perturbation(f, region)
    if total == 0:
        return []
    stack = [(counted_region, total)]
    zeros: list = []
    while stack:
        box, count = stack.pop()
        if count == 1:
            zeros.append(_locate_single(f, box, tol))
            continue
        a, b = _split(box)
        ca, a_pert = _count_with_perturbation(f, a)
        cb, b_pert = _count_with_perturbation(f, b)
        if ca + cb != count:
            raise IncompleteSearchError(
                f"winding counts {ca}+{cb} != {count} after splitting {box.re_range}x{box.im_range}"
            )
        if ca > 0:
            stack.append((a_pert, ca))
        if cb > 0:
            stack.append((b_pert, cb))
    # dedupe zeros rediscovered through overlapping perturbed boundaries
    unique: list = []
    for z in sorted(zeros, key=lambda w: (w.real, w.imag)):
        if all(abs(z - u) > 1e-9 * max(abs(z), 1.0) for u in unique):
            unique.append(z)
    if len(unique) != total:
        raise IncompleteSearchError(
            f"refined {len(unique)} zeros but the contour count is {total}"
        )
    return unique


def find_resonances(params, l: int, region: SearchRegion, *, mu: float = 1.0, z: float = -2.0, tol: float = 1e-12) -> list:
    """Zeros of the model f_in in the region, as Resonance records."""

    def f_in(E: complex) -> complex:
        kin = Kinematics(E, mu=mu, z=z, sheet=region.sheet)
        A, B = _eval_any(params, E)
        return jost_from_AB(kin, l, A, B)[0]

    zeros = find_zeros(f_in, region, tol)
    res = [Resonance(l=l, E_complex=z0, sheet=region.sheet) for z0 in zeros]
    return sorted(res, key=lambda r: r.E_r)


def resonances_to_csv(resonances, path) -> None:
    lines = ["l,E_r,Gamma,Re_E,Im_E,sheet"]
    for r in resonances:
        sheet = f"k_branch={r.sheet.k_branch};log_branch={r.sheet.log_branch}"
        lines.append(
            f"{r.l},{r.E_r!r},{r.Gamma!r},{r.E_complex.real!r},{r.E_complex.imag!r},{sheet}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def resonances_to_json_dicts(resonances) -> list:
    return [
        {
            "l": r.l,
            "E_r": r.E_r,
            "Gamma": r.Gamma,
            "Re_E": r.E_complex.real,
            "Im_E": r.E_complex.imag,
            "k_branch": r.sheet.k_branch,
            "log_branch": r.sheet.log_branch,
        }
        for r in resonances
    ]
