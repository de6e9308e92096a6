"""Scenario runner: builds a metric family and runs every applicable check.

Scenarios are TOML documents (see ``scenarios/README.md`` inside the package
for the schema).  A run produces a VerificationReport with one entry per
check; module errors become failed checks carrying the error message.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import deform as dfm
from . import finsler as fin
from . import gallery as gal
from . import jets
from .errors import ConfigError, FinslerJetError
from .phiode import ABParams, ode_residual, regularity_check
from .riemannian import beta_tensors, check_space_form

FAMILIES = ("thm2iic", "thm3", "cor51", "flat_parallel")

ANCHORS = {
    "params": "the constants avoid the Randers relation k2 = k1 k3",
    "phi_ode": "phi solves the characterizing second-order ODE with phi(0) = 1",
    "regularity": "phi - s phi' + (b^2 - s^2) phi'' > 0, 1 + k1 b^2 > 0 and the quartic in b stays positive",
    "spray_dual_route": "the (alpha, beta) spray formula equals the spray computed from F^2",
    "ad_vs_fd": "jet partials of the metric data and the spray agree with finite differences",
    "weyl": "scalar flag curvature: the Weyl curvature W^i_k vanishes",
    "douglas": "closed beta with the b_{i|j} pattern: the Douglas tensor vanishes",
    "flag_scalar": "R^i_k = K (F^2 delta^i_k - F y^i F_{y^k}) pointwise",
    "flag_formula": "K agrees with the closed expression in (tau, lambda, b^2, s)",
    "flag_closed": "K agrees with the family's explicit curvature in (mu, delta, c, s)",
    "flag_bounds": "square family: K lies between the two delta/mu bounds",
    "flag_zero": "the constant flag curvature family has K = 0",
    "projflat_bij": "b_{i|j} = tau {(1 + k1 b^2) a_ij + (k2 b^2 + k3) b_i b_j}",
    "projflat_curvature": "Rbar^i_k = lambda (alpha^2 delta - y^i y_k) + eta (beta^2 delta + alpha^2 b^i b_k - beta b^i y_k - beta b_k y^i)",
    "projflat_tau": "tau_{x^i} = q b_i with q = (k3 - 2 k1 - k1^2 b^2) tau^2 - lambda",
    "space_form": "h = sqrt(u alpha^2 + v beta^2) has constant sectional curvature mu",
    "lambda_identity": "lambda = mu u - (k1 u (2 + k1 b^2) - v) tau^2 / u with the fitted mu",
    "p2_identity": "|rho|_h^2 = w^2 b^2 / (u + v b^2) and matches the chart formula",
    "round_trip": "deforming the recovered (alpha, beta) returns (h_mu, rho)",
    "conformal": "rho is closed and p_{i|j} = -2 c h_ij",
    "delta_constancy": "|grad c|_h^2 + mu c^2 is constant",
    "spray_relation": "G_h = G_alpha + tau {(k1 alpha^2 + k2 beta^2) b^i / 2 - (k1 u - v) beta y^i / u}",
    "triple_ode": "(u, v, w) solve the deformation ODE system at the sampled b^2",
    "b2_inversion": "polynomial triple: the root finder reproduces b^2 = p^2 / (1 + eps p^2)",
    "window": "eps = -1: b^2 < 1/2 at every sample",
}

DEFAULT_TOLERANCES = {
    "params": 1e-12, "phi_ode": 1e-10, "regularity": 1e-12, "spray_dual_route": 1e-8,
    "ad_vs_fd": 1e-6, "weyl": 1e-6, "douglas": 1e-6, "flag_scalar": 1e-6, "flag_formula": 1e-6,
    "flag_closed": 1e-6, "flag_bounds": 1e-9, "flag_zero": 1e-7, "projflat_bij": 1e-6,
    "projflat_curvature": 1e-6, "projflat_tau": 1e-6, "space_form": 1e-6, "lambda_identity": 1e-6,
    "p2_identity": 1e-10, "round_trip": 1e-10, "conformal": 1e-8, "delta_constancy": 1e-7,
    "spray_relation": 1e-6, "triple_ode": 1e-10, "b2_inversion": 1e-12, "window": 1e-12,
}

FD_SAMPLES = 3
FD_STEP = 1e-3


# configuration --------------------------------------------------------------------

@dataclass
class Scenario:
    name: str
    family: str
    params: tuple | None = None
    nav: gal.NavigationData | None = None
    triple: str = "explicit"
    n: int = 3
    sample_count: int = 24
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    description: str = ""
    eps: int = 1
    a1: float = 2.0
    b_vec: tuple = ()
    perturbation: float = 0.0
    claimed_mu: float | None = None
    lambda_variant: str = "derived"
    expected_failures: tuple = ()

    def tolerance(self, check: str) -> float:
        return float(self.tolerances.get(check, DEFAULT_TOLERANCES[check]))


def scenario_from_dict(d: dict) -> Scenario:
    try:
        name = str(d["name"])
        family = str(d["family"])
    except KeyError as e:
        raise ConfigError(f"scenario is missing required key {e.args[0]!r}") from None
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}; expected one of {FAMILIES}")
    n = int(d.get("n", 3))
    params = None
    if "params" in d:
        pr = d["params"]
        params = (float(pr["k1"]), float(pr["k2"]), float(pr["k3"]), float(pr.get("a1", 0.0)))
    nav = None
    if "nav" in d:
        nv = d["nav"]
        a = tuple(nv.get("a", [0.0] * n))
        if nv.get("derive_mu") == "zero_curvature":
            nav = gal.cor51_navigation(float(nv["k"]), a)
        else:
            nav = gal.NavigationData(float(nv["mu"]), float(nv["k"]), a, n)
    tol = {k: float(v) for k, v in d.get("tolerances", {}).items()}
    for k, v in tol.items():
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown check {k!r} in tolerances")
        if not v > 0:
            raise ConfigError(f"tolerance for {k!r} must be positive")
    ctl = d.get("control", {})
    unknown = set(ctl.get("expected_failures", ())) - set(ANCHORS)
    if unknown:
        raise ConfigError(f"unknown checks in expected_failures: {sorted(unknown)}")
    s = Scenario(
        name=name, family=family, params=params, nav=nav, triple=str(d.get("triple", "explicit")), n=n,
        sample_count=int(d.get("samples", 24)), seed=int(d.get("seed", 0)), tolerances=tol,
        description=str(d.get("description", "")), eps=int(d.get("eps", 1)), a1=float(d.get("a1", 2.0)),
        b_vec=tuple(float(v) for v in d.get("b_vec", ())), perturbation=float(ctl.get("perturbation", 0.0)),
        claimed_mu=None if "claimed_mu" not in ctl else float(ctl["claimed_mu"]),
        lambda_variant=str(d.get("lambda_variant", "derived")),
        expected_failures=tuple(sorted(ctl.get("expected_failures", ()))),
    )
    if s.sample_count < 1:
        raise ConfigError("samples must be at least 1")
    if s.family in ("thm2iic", "cor51", "thm3") and nav is None:
        raise ConfigError(f"family {family!r} needs a [nav] section")
    if s.family in ("thm2iic", "cor51", "flat_parallel") and params is None:
        raise ConfigError(f"family {family!r} needs a [params] section")
    return s


def load_scenario(path_or_text: str | Path, is_text: bool = False) -> Scenario:
    try:
        text = path_or_text if is_text else Path(path_or_text).read_text()
        return scenario_from_dict(tomllib.loads(text))
    except (tomllib.TOMLDecodeError, OSError, TypeError, ValueError, KeyError, FinslerJetError) as e:
        raise ConfigError(f"cannot read scenario: {e}") from None


def _builtin_dir():
    return resources.files("finslerjet") / "scenarios"


def list_scenarios() -> list[str]:
    return sorted(p.name[:-5] for p in _builtin_dir().iterdir() if p.name.endswith(".toml"))


def get_scenario(name: str) -> Scenario:
    if name.endswith(".toml") and Path(name).exists():
        return load_scenario(name)
    f = _builtin_dir() / f"{name}.toml"
    if not f.is_file():
        raise ConfigError(f"unknown scenario {name!r}; try 'list'")
    return load_scenario(f.read_text(), is_text=True)


# report --------------------------------------------------------------------------------

@dataclass
class CheckResult:
    check: str
    paper_anchor: str
    max_residual: float
    tolerance: float
    verdict: str
    samples: int
    wall_time_ms: int
    message: str = ""


@dataclass
class VerificationReport:
    scenario: str
    checks: list = field(default_factory=list)
    expected_failures: tuple = ()

    @property
    def failed(self) -> set:
        return {c.check for c in self.checks if c.verdict == "fail"}

    @property
    def all_pass(self) -> bool:
        return not self.failed

    @property
    def as_expected(self) -> bool:
        return self.failed == set(self.expected_failures)


# running ------------------------------------------------------------------------------

def build_family(s: Scenario) -> gal.Family:
    if s.family == "thm2iic":
        fam = gal.build_thm2iic(s.nav, ABParams(*s.params), s.triple, lambda_variant=s.lambda_variant)
    elif s.family == "thm3":
        fam = gal.build_thm3(s.nav, s.a1, s.eps)
    elif s.family == "cor51":
        fam = gal.cor51_build(s.params[0], s.params[3], s.nav)
    else:
        b = s.b_vec or (0.3,) + (0.0,) * (s.n - 1)
        fam = gal.flat_parallel(ABParams(*s.params), b, s.n)
    if s.perturbation:
        fam = gal.perturbed(fam, s.perturbation)
    return fam


class _Runner:
    def __init__(self, s: Scenario, fam: gal.Family, samples):
        self.s, self.fam, self.samples = s, fam, samples
        self._pa = {}

    def analysis(self, i):
        if i not in self._pa:
            x, y = self.samples[i]
            self._pa[i] = fin.analyze_point(self.fam.F, x, y, with_weyl=self.fam.n >= 3, with_douglas=True)
        return self._pa[i]

    def over(self, fn: Callable) -> float:
        return max(float(fn(i, x, y)) for i, (x, y) in enumerate(self.samples))

    def xs(self):
        return [list(x) for x, _ in self.samples]


def _checks_for(s: Scenario, fam: gal.Family) -> list[str]:
    names = ["params", "phi_ode", "regularity", "spray_dual_route", "ad_vs_fd"]
    if fam.n >= 3:
        names.append("weyl")
    names += ["douglas", "flag_scalar"]
    if fam.tau_fn is not None:
        names += ["flag_formula", "projflat_bij", "projflat_curvature", "projflat_tau"]
    if fam.K_fn is not None and s.family != "cor51":
        names.append("flag_closed")
    if s.family == "cor51":
        names.append("flag_zero")
    if fam.h is not None:
        names += ["space_form", "lambda_identity", "p2_identity", "round_trip", "conformal",
                  "spray_relation", "triple_ode"]
        if fam.n >= 3:
            names.append("delta_constancy")
        if fam.selector == "remark":
            names.append("b2_inversion")
    if _square_remark(s, fam):
        names.append("flag_bounds")
    if s.family == "thm3" and s.eps == -1:
        names.append("window")
    return names


def _square_remark(s, fam) -> bool:
    p = fam.params
    return fam.selector == "remark" and (p.k1, p.k2, p.k3, p.a1) == (2.0, 0.0, -3.0, 2.0) and fam.nav.mu > 0


def _rel(a, b):
    return abs(a - b) / max(1.0, abs(b))


def _check_fn(name: str, r: _Runner) -> Callable[[], float]:
    fam, s = r.fam, r.s
    F, p = fam.F, fam.params

    def phi_ode():
        lo, hi = F.phi.domain
        lo, hi = max(lo, -1.0), min(hi, 1.0)
        grid = np.linspace(0.98 * lo, 0.98 * hi, 256)
        return max(ode_residual(F.phi, float(t)) for t in grid)

    def regularity():
        worst = 0.0
        for i, _, _ in _enum(r):
            rep = regularity_check(F.phi, math.sqrt(r.analysis(i).b2), n_grid=41)
            if math.isnan(rep.min_value):
                return math.inf
            worst = max(worst, -rep.min_value, -rep.lemma_linear, -rep.lemma_quartic)
        return worst

    def spray_dual():
        def one(i, x, y):
            g1 = fin.finsler_spray(F, x, y)
            g2 = fin.finsler_spray_g1(F, x, y)
            return np.abs(g1 - g2).max() / (1 + np.abs(g2).max())
        return r.over(one)

    def ad_fd():
        return max(ad_vs_fd_residual(F, x, y) for x, y in r.samples[:FD_SAMPLES])

    def tau_lambda(x):
        return float(jets.value(fam.tau_fn(list(x)))), float(jets.value(fam.lambda_fn(list(x))))

    def flag_formula():
        def one(i, x, y):
            pa = r.analysis(i)
            tau, lam = tau_lambda(x)
            return _rel(fin.scalar_flag_formula(p, F.phi, tau, lam, pa.b2, pa.s), pa.K)
        return r.over(one)

    def projflat(attr):
        def run():
            if "pf" not in r._pa:
                r._pa["pf"] = fin.projflat_conditions_check(F, fam.tau_fn, fam.lambda_fn, r.samples)
            return getattr(r._pa["pf"], attr)
        return run

    def flag_closed():
        return r.over(lambda i, x, y: _rel(fam.K_fn(x, r.analysis(i).s), r.analysis(i).K))

    def flag_bounds():
        d = gal.delta_of(fam.nav).delta

        def one(i, x, y):
            pa = r.analysis(i)
            kc = gal.K_closed("square", fam.nav.mu, d, gal.c_of(fam.nav, list(x)), pa.s)
            return max(0.0, kc.lower - pa.K, pa.K - kc.upper)
        return r.over(one)

    def space_form():
        mu = fam.nav.mu if s.claimed_mu is None else s.claimed_mu
        rep = check_space_form(fam.h, None, r.samples)
        r._pa["mu_fit"] = rep.mu_fit
        return max(check_space_form(fam.h, mu, r.samples).residual, rep.mu_spread, abs(rep.mu_fit - mu))

    def lambda_identity():
        mu = r._pa.get("mu_fit")
        if mu is None:
            mu = check_space_form(fam.h, None, r.samples).mu_fit

        def one(i, x, y):
            a, b = _ab(F, x)
            t = float(b @ np.linalg.solve(a, b))
            u, v, _ = dfm.triple_uvw(fam.selector, p, t)
            tau, lam = tau_lambda(x)
            return _rel(dfm.lambda_identity(p, mu, u, v, tau, t), lam)
        return r.over(one)

    def p2_identity():
        def one(i, x, y):
            a, b = _ab(F, x)
            t = float(b @ np.linalg.solve(a, b))
            H, P = fam.h.matrix(x), fam.rho.vector(x)
            direct = float(P @ np.linalg.solve(H, P))
            u, v, w = dfm.triple_uvw(fam.selector, p, t)
            return max(abs(direct - w * w * t / (u + v * t)), abs(direct - gal.p2_closed(fam.nav, list(x))))
        return r.over(one)

    def round_trip():
        hf, rf, _ = dfm.deform_fields(F.g, F.b, p, fam.selector)

        def one(i, x, y):
            return max(np.abs(hf.matrix(x) - fam.h.matrix(x)).max(), np.abs(rf.vector(x) - fam.rho.vector(x)).max())
        return r.over(one)

    def conformal():
        rep = dfm.conformal_check(fam.h, fam.rho, gal.c_field(fam.nav), [x for x, _ in r.samples])
        return max(rep.residual, rep.antisym)

    def delta_constancy():
        return gal.delta_of(fam.nav, tolerance=math.inf).max_rel_dev

    def spray_relation():
        return dfm.spray_relation_check(F.g, F.b, p, fam.selector, fam.tau_fn, r.samples)

    def triple_ode():
        def one(i, x, y):
            a, b = _ab(F, x)
            t = float(b @ np.linalg.solve(a, b))
            T = dfm._triple_at(fam.selector, t, p)
            return max(dfm.triple_ode_residual(T, p))
        return r.over(one)

    def b2_inversion():
        eps = p.k1 / 2

        def one(i, x, y):
            p2 = float(jets.value(gal.p2_closed(fam.nav, list(x))))
            return abs(dfm.solve_b2(p2, p, "remark") - p2 / (1 + eps * p2))
        return r.over(one)

    def window():
        return r.over(lambda i, x, y: max(0.0, r.analysis(i).b2 - 0.5))

    table = {
        "phi_ode": phi_ode,
        "regularity": regularity,
        "spray_dual_route": spray_dual,
        "ad_vs_fd": ad_fd,
        "weyl": lambda: r.over(lambda i, x, y: r.analysis(i).W_rel),
        "douglas": lambda: r.over(lambda i, x, y: r.analysis(i).D_rel),
        "flag_scalar": lambda: r.over(lambda i, x, y: r.analysis(i).K_residual),
        "flag_formula": flag_formula,
        "flag_closed": flag_closed,
        "flag_bounds": flag_bounds,
        "flag_zero": lambda: r.over(lambda i, x, y: abs(r.analysis(i).K)),
        "projflat_bij": projflat("y2"),
        "projflat_curvature": projflat("y3"),
        "projflat_tau": projflat("y4"),
        "space_form": space_form,
        "lambda_identity": lambda_identity,
        "p2_identity": p2_identity,
        "round_trip": round_trip,
        "conformal": conformal,
        "delta_constancy": delta_constancy,
        "spray_relation": spray_relation,
        "triple_ode": triple_ode,
        "b2_inversion": b2_inversion,
        "window": window,
    }
    return table[name]


def _enum(r: _Runner):
    return [(i, x, y) for i, (x, y) in enumerate(r.samples)]


def _ab(F: fin.ABMetric, x):
    a_raw, b_raw = F.fields([float(v) for v in x])
    return (np.array([[jets.value(v) for v in row] for row in a_raw]),
            np.array([jets.value(v) for v in b_raw]))


def _jet_partial(v, m):
    if isinstance(v, jets.Jet):
        return v.partial(m)
    return float(v) if not any(m) else 0.0


def ad_vs_fd_residual(F: fin.ABMetric, x, y, h: float = FD_STEP) -> float:
    """Max relative gap between jet partials and the finite-difference oracle.

    Covers first and second x-partials of a_ij and b_i, and first x- and
    y-partials of every spray component.  Gaps are divided by max(1, |jet|).
    """
    n = F.dim
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    X = jets.variables(x, 2)
    a_raw, b_raw = F.fields(X)
    worst = 0.0
    cache = {}

    def fields_at(pt):
        key = tuple(pt)
        if key not in cache:
            cache[key] = _ab(F, pt)
        return cache[key]

    multis = [tuple(int(k == i) for k in range(n)) for i in range(n)]
    multis += [tuple(int(k == i) + int(k == j) for k in range(n)) for i in range(n) for j in range(i, n)]
    for i in range(n):
        for j in range(i, n):
            for m in multis:
                jv = _jet_partial(a_raw[i][j], m)
                fv = jets.fd_oracle(lambda pt: fields_at(pt)[0][i, j], x, m, h)
                worst = max(worst, abs(jv - fv) / max(1.0, abs(jv)))
        for m in multis:
            jv = _jet_partial(b_raw[i], m)
            fv = jets.fd_oracle(lambda pt: fields_at(pt)[1][i], x, m, h)
            worst = max(worst, abs(jv - fv) / max(1.0, abs(jv)))

    parts, _ = fin._combined(F, x, y, 1)
    gcache = {}

    def spray_at(pt):
        key = tuple(pt)
        if key not in gcache:
            gcache[key] = fin.finsler_spray(F, pt[:n], pt[n:])
        return gcache[key]

    z = x + y
    for i in range(n):
        for v in range(2 * n):
            m = tuple(int(k == v) for k in range(2 * n))
            jv = _jet_partial(parts.G[i], m)
            fv = jets.fd_oracle(lambda pt: spray_at(pt)[i], z, m, h)
            worst = max(worst, abs(jv - fv) / max(1.0, abs(jv)))
    return worst


def run_scenario(s: Scenario, samples: int | None = None, seed: int | None = None,
                 tolerance_scale: float = 1.0) -> VerificationReport:
    """Build the scenario's family and run every applicable check."""
    if samples is not None:
        s = dataclasses.replace(s, sample_count=int(samples))
    if seed is not None:
        s = dataclasses.replace(s, seed=int(seed))
    rep = VerificationReport(s.name, [], s.expected_failures)

    def record(name, fn):
        tol = s.tolerance(name) * tolerance_scale
        t0 = time.perf_counter()
        msg = ""
        try:
            res = float(fn())
        except (FinslerJetError, ArithmeticError, np.linalg.LinAlgError, ValueError) as e:
            res, msg = math.inf, f"{type(e).__name__}: {e}"
        if math.isnan(res):
            res, msg = math.inf, msg or "residual is NaN"
        ms = int(round(1000 * (time.perf_counter() - t0)))
        n_samples = 0 if name in ("params", "phi_ode", "delta_constancy") else s.sample_count
        rep.checks.append(CheckResult(name, ANCHORS[name], res, tol, "pass" if res <= tol else "fail",
                                      n_samples, ms, msg))

    fam_box = {}

    def build():
        fam_box["fam"] = build_family(s)
        return 0.0

    record("params", build)
    if "fam" not in fam_box:
        return rep
    fam = fam_box["fam"]
    rng = np.random.default_rng(s.seed)
    try:
        pts = gal.sample_xy(fam, s.sample_count, rng)
    except (FinslerJetError, ArithmeticError, np.linalg.LinAlgError, ValueError) as e:
        rep.checks.append(CheckResult("regularity", ANCHORS["regularity"], math.inf,
                                      s.tolerance("regularity") * tolerance_scale, "fail", 0, 0,
                                      f"sampling failed: {type(e).__name__}: {e}"))
        return rep
    runner = _Runner(s, fam, pts)
    for name in _checks_for(s, fam)[1:]:
        record(name, _check_fn(name, runner))
    return rep


# output -----------------------------------------------------------------------------------

RECORD_FIELDS = ("scenario", "check", "paper_anchor", "max_residual", "tolerance", "verdict",
                 "samples", "wall_time_ms", "message")


def emit_report(r: VerificationReport, fmt: str = "table") -> bytes:
    if fmt == "records":
        lines = []
        for c in r.checks:
            d = dataclasses.asdict(c)
            d["scenario"] = r.scenario
            lines.append(json.dumps({k: d[k] for k in RECORD_FIELDS}))
        return ("\n".join(lines) + "\n").encode() if lines else b""
    if fmt == "table":
        w = max([len(c.check) for c in r.checks] + [5])
        out = [f"scenario {r.scenario}"]
        out.append(f"  {'check':<{w}}  {'max_residual':>12}  {'tolerance':>9}  verdict")
        for c in r.checks:
            mark = " (expected)" if c.verdict == "fail" and c.check in r.expected_failures else ""
            line = f"  {c.check:<{w}}  {c.max_residual:12.3e}  {c.tolerance:9.1e}  {c.verdict}{mark}"
            if c.message:
                line += f"  [{c.message}]"
            out.append(line)
        if r.expected_failures:
            out.append(f"  negative control: failures {'match' if r.as_expected else 'DO NOT match'} "
                       f"the expected set {sorted(r.expected_failures)}")
        return ("\n".join(out) + "\n").encode()
    raise ConfigError(f"unknown format {fmt!r}; use 'table' or 'records'")


def parse_records(data: bytes) -> list[VerificationReport]:
    """Inverse of ``emit_report(..., 'records')`` (several reports may be concatenated)."""
    reports: dict[str, VerificationReport] = {}
    for line in data.decode().splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        r = reports.setdefault(d["scenario"], VerificationReport(d["scenario"]))
        r.checks.append(CheckResult(**{k: d[k] for k in RECORD_FIELDS if k != "scenario"}))
    return list(reports.values())


def describe(s: Scenario) -> str:
    lines = [f"{s.name}: {s.description}".rstrip(": "), f"  family={s.family} n={s.n} samples={s.sample_count} seed={s.seed}"]
    if s.params:
        lines.append(f"  k1={s.params[0]:g} k2={s.params[1]:g} k3={s.params[2]:g} a1={s.params[3]:g}")
    if s.nav:
        lines.append(f"  mu={s.nav.mu:g} k={s.nav.k_const:g} a={list(s.nav.a_vec)} triple={s.triple}")
    if s.expected_failures:
        lines.append(f"  negative control, expected failures: {', '.join(s.expected_failures)}")
    try:
        names = _checks_for(s, build_family(s))
    except FinslerJetError as e:
        names = ["params"]
        lines.append(f"  construction refused: {e}")
    for name in names:
        lines.append(f"  {name:<20} {ANCHORS[name]}")
    return "\n".join(lines) + "\n"


# CLI ---------------------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--samples", type=int, default=None)
    common.add_argument("--format", choices=("table", "records"), default="table")
    common.add_argument("--out", default=None, help="write the report here instead of stdout")
    common.add_argument("--tolerance-scale", type=float, default=1.0)
    ap = _Parser(prog="finslerjet", description="Curvature checks for (alpha, beta)-metric families.")
    sub = ap.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    sub.add_parser("list", help="list builtin scenarios")
    run = sub.add_parser("run", parents=[common], help="run one scenario (builtin name or .toml path)")
    run.add_argument("scenario")
    sub.add_parser("run-all", parents=[common], help="run every builtin scenario")
    de = sub.add_parser("describe", help="show a scenario and the statement each check verifies")
    de.add_argument("scenario")
    return ap


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
        if args.verb == "list":
            for name in list_scenarios():
                sys.stdout.write(name + "\n")
            return 0
        if args.verb == "describe":
            sys.stdout.write(describe(get_scenario(args.scenario)))
            return 0
        if args.tolerance_scale <= 0:
            raise ConfigError("--tolerance-scale must be positive")
        if args.samples is not None and args.samples < 1:
            raise ConfigError("--samples must be at least 1")
        names = [args.scenario] if args.verb == "run" else list_scenarios()
        scenarios = [get_scenario(n) for n in names]
        chunks, ok = [], True
        for s in scenarios:
            rep = run_scenario(s, args.samples, args.seed, args.tolerance_scale)
            chunks.append(emit_report(rep, args.format))
            ok &= rep.as_expected
        data = b"".join(chunks)
        if args.out:
            Path(args.out).write_bytes(data)
        else:
            sys.stdout.write(data.decode())
        return 0 if ok else 1
    except ConfigError as e:
        sys.stderr.write(f"error: {e}\n")
        return 2
    except SystemExit as e:  # argparse --help
        return int(e.code or 0)


def main_exit():
    sys.exit(main())
