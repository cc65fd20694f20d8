"""Chi-square fitting of cross-section data with the semi-analytic models.

The objective is sum_i [(sigma_i - sigma_fit(E_i)) / delta_i]^2 over a
CrossSectionDataset.  Three model variants are supported:

  jost         A, B in the pole-product basis (real alpha, beta per l)
  jost_taylor  A, B as truncated Taylor polynomials around E0
  rmatrix      pole sum gamma^2/(E_n - E) with fixed E_n and channel radius

All the energy-dependent factors that do not move during a fit (Coulomb
phase, k, M, D^2, the basis polynomials, the Coulomb functions at the
channel radius) are tabulated once per dataset, so one objective call is a
handful of small matrix products.

Minimization is a Nelder-Mead simplex over scaled coefficients followed by
a least-squares polish; the multistart driver draws starting vectors from a
seeded generator and keeps the best run.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .jostmodel import (
    ABParams,
    PolyBasis,
    TaylorParams,
    ab_params_from_json,
    ab_params_to_json,
    poly_P,
)
from .oracle import CrossSectionDataset
from .rmatrix import RParams, r_params_from_json, r_params_to_json
from .specfun import (
    Kinematics,
    SheetSelector,
    D_factor,
    M_factor,
    coulomb_H_complex,
    coulomb_phase,
)

__all__ = [
    "FitProblem",
    "FitResult",
    "chi2",
    "model_sigma_total",
    "minimize",
    "multistart",
    "pole_constraint_rows",
    "fit_with_poles",
    "pole_scan",
    "param_report",
    "report_text",
    "report_csv",
    "fit_result_to_json",
    "fit_result_from_json",
]

_MODELS = ("jost", "rmatrix", "jost_taylor")

#: objective contribution of a data point where the model hits a pole
POLE_PENALTY = 1e12


@dataclass(eq=False)
class FitProblem:
    """Dataset plus model structure; fixed quantities live in the configs.

    configs holds one entry per partial wave l = 0..l_max:
      jost         -> PolyBasis (basis energies fixed, alpha/beta free)
      jost_taylor  -> TaylorParams (E0 and order fixed, coefficients free)
      rmatrix      -> RParams (E_n, a, B_R fixed, gammas free)
    """

    dataset: CrossSectionDataset
    model: str
    configs: tuple
    mu: float = 1.0
    z: float = -2.0
    #: partial waves covered by configs; None means 0..dataset.l_max.  A
    #: single-entry tuple fits one wave against its own sigma_l data.
    ls: tuple | None = None

    def __post_init__(self):
        if self.model not in _MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {_MODELS}")
        self.configs = tuple(self.configs)
        want = {"jost": PolyBasis, "jost_taylor": TaylorParams, "rmatrix": RParams}[self.model]
        for cfg in self.configs:
            if not isinstance(cfg, want):
                raise TypeError(f"model {self.model} needs {want.__name__} configs")
        if self.ls is None:
            if len(self.configs) != self.dataset.l_max + 1:
                raise ValueError("need one config per partial wave 0..l_max")
            self.ls = tuple(range(len(self.configs)))
        else:
            self.ls = tuple(int(l) for l in self.ls)
            if len(self.ls) != len(self.configs):
                raise ValueError("need one config per entry of ls")

    @property
    def l_max(self) -> int:
        return max(self.ls)

    @property
    def n_free(self) -> int:
        """Free-parameter count; 2(N+1) per wave in the pole-product basis."""
        if self.model == "jost":
            return sum(2 * (cfg.N + 1) for cfg in self.configs)
        if self.model == "jost_taylor":
            return sum(2 * (cfg.order + 1) for cfg in self.configs)
        return sum(len(cfg.gammas) for cfg in self.configs)

    # -- fixed per-energy tables ------------------------------------------

    @property
    def tables(self) -> list:
        try:
            return self._tables
        except AttributeError:
            pass
        E = self.dataset.energies
        tabs = []
        for l, cfg in zip(self.ls, self.configs):
            tabs.append(self._build_table(l, cfg, E))
        self._tables = tabs
        return tabs

    def _build_table(self, l: int, cfg, E: np.ndarray) -> dict:
        n = len(E)
        k = np.empty(n)
        phase2 = np.empty(n, dtype=complex)
        M = np.empty(n, dtype=complex)
        D2 = np.empty(n)
        for i, Ei in enumerate(E):
            kin = Kinematics(float(Ei), mu=self.mu, z=self.z)
            k[i] = kin.k.real
            phase2[i] = cmath.exp(2j * coulomb_phase(l, kin.eta))
            M[i] = M_factor(kin)
            D2[i] = (D_factor(l, kin.eta, kin.k) ** 2).real
        tab = {
            "k": k,
            "phase2": phase2,
            "M": M,
            "D2": D2,
            "pref": math.pi * (2 * l + 1) / (2.0 * self.mu * E),
        }
        if self.model == "jost":
            tab["P"] = np.array([poly_P(cfg, m, E).real for m in range(cfg.N + 1)])
        elif self.model == "jost_taylor":
            x = E - cfg.E0
            tab["P"] = np.array([x**m for m in range(cfg.order + 1)])
        else:
            hm = np.empty(n, dtype=complex)
            hmp = np.empty(n, dtype=complex)
            hp = np.empty(n, dtype=complex)
            hpp = np.empty(n, dtype=complex)
            for i, Ei in enumerate(E):
                kin = Kinematics(float(Ei), mu=self.mu, z=self.z)
                hp[i], hpp[i] = coulomb_H_complex(l, kin, cfg.a, +1)
                hm[i], hmp[i] = coulomb_H_complex(l, kin, cfg.a, -1)
            tab["hm"], tab["hmp"], tab["hp"], tab["hpp"] = hm, hmp, hp, hpp
            tab["Rden"] = np.array([cfg.energies]).T - E[None, :]
        return tab

    # -- free-vector packing ----------------------------------------------

    @property
    def scales(self) -> np.ndarray:
        """Per-parameter magnitudes that map coefficients to O(1) internals.

        For the polynomial models the natural size of coefficient n is the
        inverse of the typical |P_n| over the data range; gammas are O(1).
        """
        try:
            return self._scales
        except AttributeError:
            pass
        out = []
        for i, cfg in enumerate(self.configs):
            if self.model in ("jost", "jost_taylor"):
                mags = np.mean(np.abs(self.tables[i]["P"]), axis=1)
                s = 1.0 / np.maximum(mags, 1e-30)
                out.extend(s)
                out.extend(s)
            else:
                out.extend([1.0] * len(cfg.gammas))
        self._scales = np.asarray(out)
        return self._scales

    def pack(self, params_per_l) -> np.ndarray:
        vec = []
        for cfg, p in zip(self.configs, params_per_l):
            if self.model == "jost":
                vec.extend(p.alpha)
                vec.extend(p.beta)
            elif self.model == "jost_taylor":
                vec.extend(p.a)
                vec.extend(p.b)
            else:
                vec.extend(p.gammas)
        x = np.asarray(vec, dtype=float)
        if len(x) != self.n_free:
            raise ValueError("parameter vector length mismatch")
        return x

    def unpack(self, x) -> tuple:
        x = np.asarray(x, dtype=float)
        if len(x) != self.n_free:
            raise ValueError("parameter vector length mismatch")
        out = []
        i = 0
        for l, cfg in zip(self.ls, self.configs):
            if self.model == "jost":
                m = cfg.N + 1
                out.append(ABParams(l=l, basis=cfg, alpha=tuple(x[i : i + m]), beta=tuple(x[i + m : i + 2 * m])))
                i += 2 * m
            elif self.model == "jost_taylor":
                m = cfg.order + 1
                out.append(TaylorParams(l=l, a=tuple(x[i : i + m]), b=tuple(x[i + m : i + 2 * m]), E0=cfg.E0))
                i += 2 * m
            else:
                m = len(cfg.gammas)
                out.append(RParams(l=l, energies=cfg.energies, gammas=tuple(x[i : i + m]), a=cfg.a, B_R=cfg.B_R, labels=cfg.labels))
                i += m
        return tuple(out)


@dataclass(frozen=True)
class FitResult:
    """Outcome of a minimization; params match the problem's model type."""

    params: tuple
    chi2: float
    n_evaluations: int
    converged: bool
    history: tuple = ()

    def __post_init__(self):
        if self.chi2 < 0:
            raise ValueError("chi2 must be nonnegative")


def _sigma_vector(problem: FitProblem, x: np.ndarray) -> np.ndarray:
    """sigma_total at every dataset energy; NaN where the model has a pole."""
    total = 0.0
    i = 0
    for l, cfg in enumerate(problem.configs):
        tab = problem.tables[l]
        if problem.model in ("jost", "jost_taylor"):
            m = tab["P"].shape[0]
            A = x[i : i + m] @ tab["P"]
            B = x[i + m : i + 2 * m] @ tab["P"]
            i += 2 * m
            kA = tab["k"] * A
            DB = tab["D2"] * B
            num = kA - (tab["M"] - 1j) * DB
            den = kA - (tab["M"] + 1j) * DB
        else:
            m = tab["Rden"].shape[0]
            g = x[i : i + m]
            i += m
            R = (g * g) @ (1.0 / tab["Rden"])
            num = -(tab["hm"] - (cfg.a * tab["k"] * tab["hmp"] - cfg.B_R * tab["hm"]) * R)
            den = tab["hp"] - (cfg.a * tab["k"] * tab["hpp"] - cfg.B_R * tab["hp"]) * R
        with np.errstate(divide="ignore", invalid="ignore"):
            S = tab["phase2"] * num / den
        total = total + tab["pref"] * np.abs(S - 1.0) ** 2
    return total


def model_sigma_total(problem: FitProblem, params_per_l) -> np.ndarray:
    """Fitted sigma_total on the dataset grid (plotting/report helper)."""
    return _sigma_vector(problem, problem.pack(params_per_l))


def _residuals(problem: FitProblem, x: np.ndarray) -> np.ndarray:
    sig = _sigma_vector(problem, x)
    res = (problem.dataset.sigmas - sig) / problem.dataset.deltas
    bad = ~np.isfinite(res)
    if bad.any():
        res = np.where(bad, math.sqrt(POLE_PENALTY), res)
    return res


def chi2(problem: FitProblem, params_per_l) -> float:
    """Objective value; model poles at data energies cost a finite penalty."""
    r = _residuals(problem, problem.pack(params_per_l))
    return float(r @ r)


def minimize(problem: FitProblem, start, options: dict | None = None) -> FitResult:
    """Simplex minimization from one start, with a least-squares polish.

    start is either a per-l parameter tuple or a raw coefficient vector.
    Deterministic for a fixed (start, options).
    """
    opts = dict(options or {})
    maxiter = int(opts.pop("maxiter", 40000))
    fatol = float(opts.pop("fatol", 1e-12))
    xatol = float(opts.pop("xatol", 1e-10))
    polish = bool(opts.pop("polish", True))
    cycles = int(opts.pop("cycles", 4))
    if opts:
        raise ValueError(f"unknown options {sorted(opts)}")

    if isinstance(start, (tuple, list)) and start and not np.isscalar(start[0]):
        x0 = problem.pack(start)
    else:
        x0 = np.asarray(start, dtype=float)
    scales = problem.scales
    u0 = x0 / scales

    evals = [0]

    def obj(u: np.ndarray) -> float:
        evals[0] += 1
        r = _residuals(problem, u * scales)
        return float(r @ r)

    def resid(u: np.ndarray) -> np.ndarray:
        evals[0] += 1
        return _residuals(problem, u * scales)

    u_best = u0
    c_best = obj(u0)
    history = [c_best]
    converged = False
    # simplex + least-squares rounds, restarted from the incumbent until the
    # objective stalls (the landscape has long curved valleys)
    for _ in range(max(1, cycles)):
        c_round = c_best
        res = optimize.minimize(
            obj,
            u_best,
            method="Nelder-Mead",
            options={"maxiter": maxiter, "maxfev": maxiter, "fatol": fatol, "xatol": xatol, "adaptive": True},
        )
        if res.fun <= c_best:
            u_best, c_best = res.x, float(res.fun)
        converged = converged or bool(res.success)
        if polish:
            try:
                # Levenberg-Marquardt needs at least as many residuals as
                # parameters; fall back to TRF on small datasets
                method = "lm" if len(problem.dataset.points) >= problem.n_free else "trf"
                nfev = 20000 if method == "lm" else 2000
                # tighter tolerances than this sit below what the MINPACK
                # termination tests can certify and just burn the budget
                tol = 1e-12 if method == "lm" else 1e-10
                ls = optimize.least_squares(resid, u_best, method=method, xtol=tol, ftol=tol, max_nfev=nfev)
                c_ls = float(2.0 * ls.cost)
                if np.isfinite(c_ls):
                    if c_ls <= c_best:
                        u_best, c_best = ls.x, c_ls
                    # reaching (essentially) the incumbent value counts as
                    # convergence even when the polish cannot improve on it
                    converged = converged or (bool(ls.success) and c_ls <= c_best * (1.0 + 1e-9) + 1e-18)
            except Exception:
                pass
        history.append(c_best)
        if c_best >= 0.995 * c_round:
            break

    if polish and not converged:
        # stationarity probe: a fresh short least-squares restart that cannot
        # improve the incumbent by a meaningful factor means we are at a
        # practical optimum even though the strict tolerance never fired
        try:
            method = "lm" if len(problem.dataset.points) >= problem.n_free else "trf"
            probe = optimize.least_squares(
                resid, u_best, method=method, xtol=1e-12, ftol=1e-12, max_nfev=40 * problem.n_free
            )
            c_probe = float(2.0 * probe.cost)
            if np.isfinite(c_probe):
                converged = bool(probe.success) or c_probe >= c_best * (1.0 - 1e-6) - 1e-18
                if c_probe <= c_best:
                    u_best, c_best = probe.x, c_probe
                    history.append(c_best)
        except Exception:
            pass

    return FitResult(
        params=problem.unpack(u_best * scales),
        chi2=c_best,
        n_evaluations=evals[0],
        converged=converged,
        history=tuple(history),
    )


def _random_start(problem: FitProblem, rng: np.random.Generator, amplitude: float) -> np.ndarray:
    u = rng.uniform(-1.0, 1.0, problem.n_free) * amplitude
    if problem.model == "rmatrix":
        # gammas enter squared; start from the configured values, jittered
        base = problem.pack(problem.configs)
        return base * (1.0 + 0.5 * u)
    return u * problem.scales


def multistart(
    problem: FitProblem,
    n_starts: int,
    scale_policy: float = 1.0,
    seed: int = 0,
    options: dict | None = None,
) -> FitResult:
    """Best of n_starts seeded minimizations; reproducible for a fixed seed."""
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    rng = np.random.default_rng(seed)
    best = None
    all_chi2 = []
    n_eval = 0
    any_conv = False
    for _ in range(n_starts):
        x0 = _random_start(problem, rng, scale_policy)
        r = minimize(problem, x0, options)
        n_eval += r.n_evaluations
        any_conv = any_conv or r.converged
        all_chi2.append(r.chi2)
        if best is None or r.chi2 < best.chi2:
            best = r
    return FitResult(
        params=best.params,
        chi2=best.chi2,
        n_evaluations=n_eval,
        converged=any_conv,
        history=tuple(all_chi2),
    )


# -- pole-pinned fitting ---------------------------------------------------
#
# f_in is linear in (alpha, beta), so demanding f_in(E_p) = 0 at a trial
# complex energy is a homogeneous linear constraint (two real rows).  Fits
# restricted to the null space keep the trial pole exactly while the
# remaining freedom absorbs the background; sweeping the trial position and
# releasing the constraint afterwards is how overlapping broad resonances
# get separated without hand-tuned starting coefficients.


def pole_constraint_rows(problem: FitProblem, l: int, E_pole: complex, sheet: SheetSelector | None = None) -> np.ndarray:
    """Two real rows over the free vector expressing f_in(E_pole) = 0."""
    if problem.model != "jost":
        raise ValueError("pole constraints apply to the pole-product model only")
    sheet = sheet or SheetSelector(-1, 0)
    kin = Kinematics(complex(E_pole), mu=problem.mu, z=problem.z, sheet=sheet)
    k = kin.k
    eta = kin.eta
    delta = coulomb_phase(l, eta)
    D = D_factor(l, eta, k)
    M = M_factor(kin)
    pref = cmath.exp(-1j * delta) * k**l
    idx = problem.ls.index(l)
    cfg = problem.configs[idx]
    row = np.zeros(problem.n_free, dtype=complex)
    off = sum(2 * (c.N + 1) for c in problem.configs[:idx])
    for n in range(cfg.N + 1):
        P = poly_P(cfg, n, complex(E_pole))
        row[off + n] = pref * (k / D) * P
        row[off + cfg.N + 1 + n] = pref * (-(M + 1j) * D) * P
    return np.vstack([row.real, row.imag])


def fit_with_poles(
    problem: FitProblem,
    pole_hypotheses,
    *,
    n_starts: int = 3,
    seed: int = 0,
    maxiter: int = 4000,
    cycles: int = 2,
    start=None,
) -> FitResult:
    """Chi-square fit with f_in forced to vanish at each (l, E) hypothesis.

    Runs simplex + least-squares rounds in the null space of the stacked
    constraints; starts are random plus, when given, the projection of an
    unconstrained incumbent.
    """
    C = np.vstack([pole_constraint_rows(problem, l, Ep) for l, Ep in pole_hypotheses])
    Z = linalg.null_space(C * problem.scales[None, :])
    if Z.shape[1] == 0:
        raise ValueError("constraints leave no free parameters")

    evals = [0]

    def resid(t: np.ndarray) -> np.ndarray:
        evals[0] += 1
        return _residuals(problem, (Z @ t) * problem.scales)

    def obj(t: np.ndarray) -> float:
        r = resid(t)
        return float(r @ r)

    rng = np.random.default_rng(seed)
    t_starts = [np.zeros(Z.shape[1])]
    if start is not None:
        x0 = problem.pack(start) if not np.isscalar(np.asarray(start).flat[0]) else np.asarray(start, dtype=float)
        t_starts.append(Z.T @ (x0 / problem.scales))
    while len(t_starts) < max(1, n_starts):
        t_starts.append(rng.normal(size=Z.shape[1]))

    best_t, best_c, conv = None, np.inf, False
    for t0 in t_starts:
        t_cur, c_cur = t0, obj(t0)
        for _ in range(max(1, cycles)):
            c_round = c_cur
            res = optimize.minimize(
                obj,
                t_cur,
                method="Nelder-Mead",
                options={"maxiter": maxiter, "maxfev": maxiter, "fatol": 1e-12, "xatol": 1e-10, "adaptive": True},
            )
            if res.fun <= c_cur:
                t_cur, c_cur = res.x, float(res.fun)
            try:
                method = "lm" if len(problem.dataset.points) >= Z.shape[1] else "trf"
                ls = optimize.least_squares(resid, t_cur, method=method, xtol=1e-15, ftol=1e-15, max_nfev=5 * maxiter)
                c_ls = float(2.0 * ls.cost)
                if np.isfinite(c_ls) and c_ls <= c_cur:
                    t_cur, c_cur = ls.x, c_ls
            except Exception:
                pass
            if c_cur >= 0.995 * c_round:
                break
        if c_cur < best_c:
            best_t, best_c, conv = t_cur, c_cur, True
    if best_t is None:
        raise ValueError("all constrained starts failed")
    return FitResult(
        params=problem.unpack((Z @ best_t) * problem.scales),
        chi2=best_c,
        n_evaluations=evals[0],
        converged=conv,
    )


def pole_scan(
    problem: FitProblem,
    pinned,
    scan_grids,
    *,
    sweeps: int = 2,
    n_starts: int = 3,
    seed: int = 0,
    maxiter: int = 4000,
    cycles: int = 2,
    start=None,
) -> tuple:
    """Coordinate descent over trial pole positions.

    pinned: [(l, E_complex)] constraints held fixed throughout.
    scan_grids: [(l, start_E, [candidate_E, ...])] one scanned pole per entry.
    Returns (FitResult, final pole placements per scanned entry).
    """
    current = [e for _, e, _ in scan_grids]

    def run():
        hyps = list(pinned) + [(scan_grids[i][0], current[i]) for i in range(len(current))]
        return fit_with_poles(
            problem, hyps, n_starts=n_starts, seed=seed, maxiter=maxiter, cycles=cycles, start=start
        )

    best = run()
    for _ in range(max(1, sweeps)):
        moved = False
        for i, (l, _, grid) in enumerate(scan_grids):
            keep = current[i]
            for cand in grid:
                if cand == keep:
                    continue
                current[i] = cand
                r = run()
                if r.chi2 < best.chi2:
                    best, keep, moved = r, cand, True
            current[i] = keep
        if not moved:
            break
    return best, list(current)


# -- reporting -------------------------------------------------------------


def param_report(result: FitResult, problem: FitProblem) -> tuple:
    """(header, rows) with one row per (l, n) coefficient slot."""
    if problem.model in ("jost", "jost_taylor"):
        header = ("l", "n", "E_n", "type", "alpha", "beta")
    else:
        header = ("l", "n", "E_n", "type", "gamma")
    rows = []
    for p in result.params:
        l = p.l
        if problem.model == "jost":
            for n in range(p.basis.N + 1):
                En = "" if n == 0 else p.basis.energies[n - 1]
                lab = "" if n == 0 else p.basis.labels[n - 1]
                rows.append((l, n, En, lab, p.alpha[n], p.beta[n]))
        elif problem.model == "jost_taylor":
            for n in range(p.order + 1):
                rows.append((l, n, p.E0 if n == 0 else "", "taylor", p.a[n], p.b[n]))
        else:
            for n, (En, g) in enumerate(zip(p.energies, p.gammas), start=1):
                lab = p.labels[n - 1] if p.labels[n - 1] else ""
                rows.append((l, n, En, lab, g))
    return header, rows


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def report_text(header: tuple, rows: list) -> str:
    cells = [tuple(_fmt(v) for v in row) for row in rows]
    widths = [max(len(h), *(len(c[i]) for c in cells)) if cells else len(h) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    for c in cells:
        lines.append("  ".join(v.ljust(w) for v, w in zip(c, widths)).rstrip())
    return "\n".join(lines) + "\n"


def report_csv(header: tuple, rows: list) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


# -- serialization ---------------------------------------------------------


def fit_result_to_json(result: FitResult, problem: FitProblem) -> str:
    if problem.model == "rmatrix":
        payload = [json.loads(r_params_to_json(p)) for p in result.params]
    elif problem.model == "jost":
        payload = [json.loads(ab_params_to_json(p)) for p in result.params]
    else:
        payload = [
            {"l": p.l, "a": list(p.a), "b": list(p.b), "E0": p.E0} for p in result.params
        ]
    return json.dumps(
        {
            "model": problem.model,
            "params": payload,
            "chi2": result.chi2,
            "n_evaluations": result.n_evaluations,
            "converged": result.converged,
            "history": list(result.history),
        },
        indent=2,
    )


def fit_result_from_json(text: str) -> tuple[str, FitResult]:
    d = json.loads(text)
    model = d["model"]
    if model == "rmatrix":
        params = tuple(r_params_from_json(json.dumps(p)) for p in d["params"])
    elif model == "jost":
        params = tuple(ab_params_from_json(json.dumps(p)) for p in d["params"])
    elif model == "jost_taylor":
        params = tuple(
            TaylorParams(l=int(p["l"]), a=tuple(p["a"]), b=tuple(p["b"]), E0=float(p["E0"]))
            for p in d["params"]
        )
    else:
        raise ValueError(f"unknown model {model!r}")
    return model, FitResult(
        params=params,
        chi2=float(d["chi2"]),
        n_evaluations=int(d["n_evaluations"]),
        converged=bool(d["converged"]),
        history=tuple(d.get("history", ())),
    )
