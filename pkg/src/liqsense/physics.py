"""Capacitance models relating liquid properties to screen readings.

A liquid on the screen acts as a conductor and a dielectric at once.
Under the parallel-plate approximation the two contributions are

    C_sigma   = sigma * A / (omega * d)        (conductive shunting)
    C_epsilon = eps_r * eps0 * A / d           (added polarization)

and the effective capacitance is their sum,

    C_eff = eps0 * (A / d) * (eps_r + sigma / (omega * eps0)).

Geometry is given in mm (area mm^2, pitch mm) and converted to SI
internally; results are farads.  Device-unit predictions wrap C_eff in
a fitted affine map plus a quadratic fringing term, or bypass physics
entirely with a six-term polynomial in (eps_r, sigma).

Fitting note: in the physics-informed model the electrode area A and
the scale alpha enter only through their product, so they are not
separately identifiable from (sigma, eps_r, reading) data.  The fitter
pins A (caller-supplied or the geometry default) and reports the
product alongside the chosen decomposition.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from importlib import resources

import numpy as np

EPSILON_0 = 8.8541878128e-12  # F/m


@dataclass(frozen=True)
class LiquidProperties:
    """Electrical properties: conductivity sigma (S/m), relative permittivity."""

    sigma: float
    eps_r: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("conductivity must be >= 0")
        if self.eps_r < 1:
            raise ValueError("relative permittivity must be >= 1")


@dataclass(frozen=True)
class CellGeometry:
    """Electrode cell geometry: area (mm^2), pitch (mm), drive angular frequency (rad/s)."""

    area_mm2: float
    pitch_mm: float
    omega_rad_s: float

    def __post_init__(self):
        if self.area_mm2 <= 0 or self.pitch_mm <= 0 or self.omega_rad_s <= 0:
            raise ValueError("geometry values must be > 0")


@dataclass(frozen=True)
class FilmLayer:
    """An interfacial film: thickness (um) and relative permittivity."""

    thickness_um: float
    eps_r: float

    def __post_init__(self):
        if self.thickness_um <= 0:
            raise ValueError("film thickness must be > 0")
        if self.eps_r < 1:
            raise ValueError("relative permittivity must be >= 1")

    def capacitance(self, area_mm2: float) -> float:
        """Parallel-plate capacitance of the film layer (F)."""
        return self.eps_r * EPSILON_0 * (area_mm2 * 1e-6) / (self.thickness_um * 1e-6)


def c_sigma(liq: LiquidProperties, geo: CellGeometry) -> float:
    """Conductive contribution sigma*A/(omega*d), in farads."""
    return liq.sigma * (geo.area_mm2 * 1e-6) / (geo.omega_rad_s * geo.pitch_mm * 1e-3)


def c_epsilon(liq: LiquidProperties, geo: CellGeometry) -> float:
    """Dielectric contribution eps_r*eps0*A/d, in farads."""
    return liq.eps_r * EPSILON_0 * (geo.area_mm2 * 1e-6) / (geo.pitch_mm * 1e-3)


def c_eff(liq: LiquidProperties, geo: CellGeometry) -> float:
    """Effective capacitance eps0*(A/d)*(eps_r + sigma/(omega*eps0)), in farads.

    Identical to c_epsilon + c_sigma.
    """
    scale = EPSILON_0 * (geo.area_mm2 * 1e-6) / (geo.pitch_mm * 1e-3)
    return scale * (liq.eps_r + liq.sigma / (geo.omega_rad_s * EPSILON_0))


def series_capacitance(layers):
    """Total capacitance of layers in series: (sum 1/C_i)^-1.

    Exact-arithmetic inputs (Fraction) stay exact.
    """
    layers = list(layers)
    if not layers:
        raise ValueError("need at least one capacitance")
    if any(c <= 0 for c in layers):
        raise ValueError("capacitances must be > 0")
    return 1 / sum(1 / c for c in layers)


@dataclass(frozen=True)
class PhysicsFit:
    """Fitted device-unit model alpha*C_eff + beta + gamma*eps_r^2."""

    area_mm2: float
    alpha: float
    beta: float
    gamma: float
    r_squared: float

    def __post_init__(self):
        if self.r_squared > 1:
            raise ValueError("r_squared cannot exceed 1")

    @property
    def alpha_area_product(self) -> float:
        """The identifiable combination alpha * A (mm^2 units for A)."""
        return self.alpha * self.area_mm2

    def to_dict(self) -> dict:
        return {
            "model": "physics",
            "params": {
                "area_mm2": self.area_mm2,
                "alpha": self.alpha,
                "beta": self.beta,
                "gamma": self.gamma,
                "alpha_area_product": self.alpha_area_product,
            },
            "r_squared": self.r_squared,
        }


@dataclass(frozen=True)
class QuadraticFit:
    """Empirical model a*e + b*s + c*e^2 + d*e*s + e2*s^2 + f (e = eps_r, s = sigma)."""

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float
    r_squared: float

    def __post_init__(self):
        if self.r_squared > 1:
            raise ValueError("r_squared cannot exceed 1")

    def coefficients(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d, self.e, self.f])

    def to_dict(self) -> dict:
        return {
            "model": "quadratic",
            "params": {k: getattr(self, k) for k in "abcdef"},
            "r_squared": self.r_squared,
        }


def predict_physics(fit: PhysicsFit, liq: LiquidProperties, geo: CellGeometry) -> float:
    """Device-unit prediction; the fit's area overrides the geometry's."""
    geo_fit = CellGeometry(fit.area_mm2, geo.pitch_mm, geo.omega_rad_s)
    return fit.alpha * c_eff(liq, geo_fit) + fit.beta + fit.gamma * liq.eps_r**2


def predict_quadratic(fit: QuadraticFit, liq: LiquidProperties) -> float:
    e, s = liq.eps_r, liq.sigma
    return fit.a * e + fit.b * s + fit.c * e**2 + fit.d * e * s + fit.e * s**2 + fit.f


def r_squared(predicted, observed) -> float:
    """Coefficient of determination 1 - SS_res/SS_tot.

    Defined as 0 (with a warning) when the observations are constant.
    """
    predicted = np.asarray(predicted, dtype=np.float64)
    observed = np.asarray(observed, dtype=np.float64)
    if predicted.shape != observed.shape or predicted.size == 0:
        raise ValueError("predicted and observed must be equal-length and nonempty")
    ss_res = float(((observed - predicted) ** 2).sum())
    ss_tot = float(((observed - observed.mean()) ** 2).sum())
    if ss_tot == 0:
        warnings.warn("constant observations: SS_tot = 0, defining R^2 = 0")
        return 0.0
    return 1.0 - ss_res / ss_tot


def _unpack(data):
    liquids = [liq for liq, _ in data]
    observed = np.array([float(obs) for _, obs in data])
    return liquids, observed


def _scaled_lstsq(design: np.ndarray, observed: np.ndarray):
    """Least squares with unit-norm column scaling.

    Raw feature columns span ~17 orders of magnitude (farads next to
    eps_r^2), which would wreck both conditioning and lstsq's rank
    detection; scaling makes rank meaningful and the solve stable.
    """
    norms = np.linalg.norm(design, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    coef, _, rank, _ = np.linalg.lstsq(design / safe, observed, rcond=None)
    return coef / safe, rank


def fit_physics_model(data, geo: CellGeometry, area_mm2: float | None = None) -> PhysicsFit:
    """Least-squares fit of (alpha, beta, gamma) with the area pinned.

    For fixed A the model is linear in its parameters, so ordinary
    least squares on the design [C_eff, 1, eps_r^2] is exact.  Scanning
    A would be pointless: it only ever appears multiplied by alpha.
    """
    liquids, observed = _unpack(data)
    if len(liquids) < 4:
        raise ValueError("need at least 4 data points")
    eps = np.array([liq.eps_r for liq in liquids])
    sig = np.array([liq.sigma for liq in liquids])
    if len(set(eps)) < 2 or len(set(sig)) < 2:
        raise ValueError("degenerate design: need >= 2 distinct eps_r and sigma values")
    area = geo.area_mm2 if area_mm2 is None else float(area_mm2)
    geo_fit = CellGeometry(area, geo.pitch_mm, geo.omega_rad_s)
    ceff = np.array([c_eff(liq, geo_fit) for liq in liquids])
    design = np.column_stack([ceff, np.ones_like(ceff), eps**2])
    coef, rank = _scaled_lstsq(design, observed)
    if rank < 3:
        raise ValueError("degenerate design: physics model features are rank deficient")
    predicted = design @ coef
    return PhysicsFit(
        area_mm2=area,
        alpha=float(coef[0]),
        beta=float(coef[1]),
        gamma=float(coef[2]),
        r_squared=r_squared(predicted, observed),
    )


def quadratic_features(eps: np.ndarray, sig: np.ndarray) -> np.ndarray:
    return np.column_stack([eps, sig, eps**2, eps * sig, sig**2, np.ones_like(eps)])


def fit_quadratic_model(data) -> QuadraticFit:
    """Ordinary least squares on [eps, sigma, eps^2, eps*sigma, sigma^2, 1]."""
    liquids, observed = _unpack(data)
    if len(liquids) < 6:
        raise ValueError("need at least 6 data points")
    eps = np.array([liq.eps_r for liq in liquids])
    sig = np.array([liq.sigma for liq in liquids])
    design = quadratic_features(eps, sig)
    coef, rank = _scaled_lstsq(design, observed)
    if rank < 6:
        raise ValueError("rank-deficient design: quadratic features are not independent")
    predicted = design @ coef
    a, b, c, d, e, f = (float(v) for v in coef)
    return QuadraticFit(a, b, c, d, e, f, r_squared=r_squared(predicted, observed))


@dataclass(frozen=True)
class LiquidTableRow:
    """One entry of the bundled concentration-grid fixture table."""

    name: str
    series: str
    concentration: float
    properties: LiquidProperties


def load_liquid_table(path=None) -> list[LiquidTableRow]:
    """Concentration -> (sigma, eps_r) lookup rows.

    Reads the bundled fixture table unless a path is given.  The
    bundled values are plausible stand-ins, not measurements.
    """
    if path is None:
        source = resources.files("liqsense").joinpath("data", "liquid_properties.csv")
        text = source.read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    rows = []
    for record in csv.DictReader(lines):
        rows.append(
            LiquidTableRow(
                name=record["name"],
                series=record["series"],
                concentration=float(record["concentration"]),
                properties=LiquidProperties(
                    sigma=float(record["sigma"]), eps_r=float(record["eps_r"])
                ),
            )
        )
    return rows
