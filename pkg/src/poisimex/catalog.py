"""Scenario catalog: the packaged simulation-study configurations.

Each catalog entry is a JSON document shipped under ``poisimex/catalog/``
mirroring the StudySpec fields.  Short aliases (``table1`` .. ``table5``,
``appendix1`` .. ``appendix4``) resolve to the N=100 / Gamma(1,2) entry of
their family.
"""

from __future__ import annotations

import json
from importlib import resources

from .distributions import Gamma, PointMass, Uniform
from .errors import ParameterError
from .harness import StudySpec
from .scenarios import (
    BinomialSurrogate,
    GammaScaledByZ,
    NegBinomialSurrogate,
    PoissonSurrogate,
    RegressionTruth,
    ScenarioSpec,
)
from .simex import SimexConfig

ALIASES = {
    "table1": "table1_gamma_1_2_n100",
    "table2": "table2_gamma_1_10_n100",
    "table3": "table3_gamma_2_z_n100",
    "table4": "table4_ratio05_n100",
    "table5": "table5_aft_n100",
    "appendix1": "appendix1_binom40_gamma_1_2",
    "appendix2": "appendix2_binom60_gamma_1_2",
    "appendix3": "appendix3_negbin5_gamma_1_2",
    "appendix4": "appendix4_negbin10_gamma_1_2",
    "appendix1_binom40": "appendix1_binom40_gamma_1_2",
    "appendix2_binom60": "appendix2_binom60_gamma_1_2",
    "appendix3_negbin5": "appendix3_negbin5_gamma_1_2",
    "appendix4_negbin10": "appendix4_negbin10_gamma_1_2",
}


def _catalog_dir():
    return resources.files("poisimex") / "catalog"


def catalog_names():
    names = [
        p.name[: -len(".json")]
        for p in _catalog_dir().iterdir()
        if p.name.endswith(".json")
    ]
    return sorted(names)


def parse_x_law(doc):
    kind = doc.get("kind")
    if kind == "gamma":
        if doc.get("scale") == "z":
            return GammaScaledByZ(shape=float(doc["shape"]))
        return Gamma(shape=float(doc["shape"]), scale=float(doc["scale"]))
    if kind == "point-mass":
        return PointMass(value=float(doc["value"]))
    raise ParameterError(f"unknown x law kind: {kind!r}")


def parse_z_law(doc):
    if doc is None:
        return None
    if doc.get("kind") == "uniform":
        return Uniform(lo=float(doc["lo"]), hi=float(doc["hi"]))
    raise ParameterError(f"unknown z law kind: {doc.get('kind')!r}")


def parse_surrogate_law(doc):
    kind = (doc or {"kind": "poisson"}).get("kind")
    if kind == "poisson":
        return PoissonSurrogate()
    if kind == "binomial":
        return BinomialSurrogate(m=int(doc["m"]))
    if kind == "negbinomial":
        return NegBinomialSurrogate(r=float(doc["r"]))
    raise ParameterError(f"unknown surrogate law kind: {kind!r}")


def parse_scenario(doc, n=None) -> ScenarioSpec:
    truth_doc = doc["truth"]
    truth = RegressionTruth(
        beta0=float(truth_doc["beta0"]),
        beta_x=float(truth_doc["beta_x"]),
        beta_z=tuple(float(b) for b in truth_doc.get("beta_z", ())),
        sigma_eps=float(truth_doc["sigma_eps"]),
    )
    return ScenarioSpec(
        x_law=parse_x_law(doc["x_law"]),
        z_law=parse_z_law(doc.get("z_law")),
        surrogate_law=parse_surrogate_law(doc.get("surrogate_law")),
        truth=truth,
        response_kind=doc.get("response_kind", "linear"),
        censoring_rate=float(doc.get("censoring_rate", 0.0)),
        censoring_scheme=doc.get("censoring_scheme", "exponential"),
        n=int(n if n is not None else doc["n"]),
        area=float(doc.get("area", 1.0)),
    )


def parse_simex_config(doc) -> SimexConfig:
    doc = doc or {}
    return SimexConfig(
        lambda_grid=tuple(float(l) for l in doc.get("lambda_grid", (0.5, 1.0, 1.5, 2.0))),
        b=int(doc.get("B", doc.get("b", 100))),
        extrapolant=doc.get("extrapolant", "quadratic"),
        variance_method=doc.get("variance_method", "none"),
        bootstrap_reps=int(doc.get("bootstrap_reps", 200)),
        seed=int(doc.get("seed", 0)),
    )


def parse_study_document(
    doc,
    scenario_id,
    n=None,
    replicates=None,
    seed=None,
    methods=None,
) -> StudySpec:
    """Build a StudySpec from a JSON document plus command-line overrides."""
    return StudySpec(
        scenario=parse_scenario(doc["scenario"], n=n),
        methods=tuple(methods if methods is not None else doc["methods"]),
        replicates=int(replicates if replicates is not None else doc.get("replicates", 1000)),
        batches=int(doc.get("batches", 10)),
        simex=parse_simex_config(doc.get("simex")),
        seed=int(seed if seed is not None else doc.get("seed", 0)),
        scenario_id=scenario_id,
    )


def load_study(
    name,
    n=None,
    replicates=None,
    seed=None,
    methods=None,
) -> StudySpec:
    """Load a catalog entry by name or alias, with optional overrides."""
    resolved = ALIASES.get(name, name)
    path = _catalog_dir() / f"{resolved}.json"
    try:
        text = path.read_text()
    except FileNotFoundError:
        known = ", ".join(catalog_names())
        raise ParameterError(
            f"unknown scenario id {name!r}; catalog entries: {known}"
        ) from None
    doc = json.loads(text)
    return parse_study_document(
        doc, scenario_id=resolved, n=n, replicates=replicates, seed=seed, methods=methods
    )
