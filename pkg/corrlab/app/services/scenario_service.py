"""Scenario loading, dispatch and suite execution"""

import json
import time
from multiprocessing import Pool
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError
from scipy import linalg

from ..config import settings
from ..models.schemas import (
    PAYLOADS,
    AlgebraSpec,
    CommutantPayload,
    CorrespondenceSpec,
    CPMapSpec,
    EndoPayload,
    FlipPayload,
    GNSPayload,
    LemmaPayload,
    ModuleSpec,
    PowersPayload,
    Report,
    Scenario,
    SpatialProductPayload,
    SuiteReport,
    TensorPayload,
    UnitVectorPayload,
)
from ..utils.errors import CorrlabError, RefusedError, ScenarioError
from ..utils.logging import logger
from ..utils.serialization import decode_matrix, decode_vector
from .correspondence import (
    CPMap,
    Correspondence,
    associator,
    commutant,
    flip_check,
    gns,
    identity_correspondence,
    iso_check,
    make_correspondence,
    multiplicity_matrix,
    random_correspondence,
    tensor,
)
from .endo_system import (
    Endomorphism,
    construct_via_commutant,
    construct_via_unit,
    dilation_check,
    duality_check,
)
from .numeric_kernel import Tolerance, random_complex, tolerant_rank
from .powers_product import (
    SpatialDatum,
    build_powers_map,
    compare_with_spatial_product,
    predicted_gns,
    verify_powers_gns,
)
from .product_system import (
    FiberSystem,
    central_unit,
    complement_multiplicity,
    is_central,
    make_unit,
    spatial_product,
)
from .star_algebra import Algebra, commutant_algebra, make_multimatrix, random_representation
from .vn_module import (
    ConcreteModule,
    check_totality,
    induced_rep,
    intertwiner_module,
    is_full,
    make_module,
    unit_vector_certificate,
)

EXIT_CODES = {"pass": 0, "fail": 1, "error": 2, "refused": 3}


class RunContext:
    """Tolerance and seed in force for one scenario"""

    def __init__(self, tol: Tolerance, seed: int):
        self.tol = tol
        self.seed = seed


# ---------------------------------------------------------------- builders

def build_algebra(spec: AlgebraSpec) -> Algebra:
    return make_multimatrix([(b.size, b.multiplicity) for b in spec.blocks])


def build_module(spec: ModuleSpec, tol: Tolerance) -> ConcreteModule:
    algebra = build_algebra(spec.algebra)
    return make_module(algebra, spec.target_dim, [decode_matrix(g) for g in spec.generators], tol)


def build_correspondence(spec: CorrespondenceSpec, ctx: RunContext) -> Correspondence:
    right = build_algebra(spec.algebra)
    left = build_algebra(spec.left) if spec.left is not None else right
    if spec.mode == "identity":
        return identity_correspondence(right, ctx.tol)
    if spec.mode == "random":
        seed = spec.seed if spec.seed is not None else ctx.seed
        return random_correspondence(right, spec.multiplicities, seed, left=left, tol=ctx.tol)
    module = make_module(right, spec.target_dim, [decode_matrix(g) for g in spec.generators], ctx.tol)
    return make_correspondence(left, module, [decode_matrix(a) for a in spec.left_images], ctx.tol)


def _random_kraus(source: Algebra, target: Algebra, rank: int, unital: bool, seed: int) -> List[np.ndarray]:
    if len(target.blocks) != 1 or target.blocks[0][1] != 1:
        raise ScenarioError("random Kraus maps need a full matrix target algebra")
    rng = np.random.default_rng(seed)
    kraus = [random_complex((target.rep_dim, source.rep_dim), rng) for _ in range(rank)]
    if unital:
        total = sum(k @ k.conj().T for k in kraus)
        if tolerant_rank(total) < target.rep_dim:
            raise ScenarioError("Kraus rank too small for a unital map on this target")
        inv_root = linalg.inv(linalg.sqrtm(total))
        kraus = [inv_root @ k for k in kraus]
    return kraus


def build_cp_map(spec: CPMapSpec, ctx: RunContext) -> CPMap:
    source, target = build_algebra(spec.source), build_algebra(spec.target)
    if spec.random_rank is not None:
        kraus = _random_kraus(source, target, spec.random_rank, spec.unital, ctx.seed)
        return CPMap(source, target, kraus=kraus, unital=spec.unital, tol=ctx.tol)
    if spec.kraus is not None:
        return CPMap(source, target, kraus=[decode_matrix(k) for k in spec.kraus],
                     unital=spec.unital, tol=ctx.tol)
    return CPMap(source, target, action=[decode_matrix(a) for a in spec.action],
                 unital=spec.unital, tol=ctx.tol)


def build_endomorphism(payload: EndoPayload, ctx: RunContext) -> Endomorphism:
    module = build_module(payload.module, ctx.tol)
    spec = payload.endomorphism
    if spec.mode == "inner":
        return Endomorphism.inner(module, decode_matrix(spec.unitary), ctx.tol)
    if spec.mode == "linear":
        return Endomorphism.from_pairs(module, [decode_matrix(a) for a in spec.domain],
                                       [decode_matrix(b) for b in spec.images], ctx.tol)
    return Endomorphism.identity(module, ctx.tol)


def _unit_vector(payload: EndoPayload, theta: Endomorphism) -> np.ndarray:
    if payload.unit_vector is not None:
        return decode_matrix(payload.unit_vector)
    cert = unit_vector_certificate(theta.module, theta.tol)
    if cert.verdict != "found":
        raise RefusedError(f"module has no unit vector (certificate: {cert.verdict})")
    return cert.witness


def _passes(tol: Tolerance, residuals: Dict[str, float], scale: float) -> bool:
    return all(tol.allows(v, scale) for v in residuals.values())


# ---------------------------------------------------------------- handlers

Outcome = Tuple[Dict[str, Any], bool]


def handle_commutant(payload: CommutantPayload, ctx: RunContext) -> Outcome:
    e = build_correspondence(payload.correspondence, ctx)
    e_prime = commutant(e, ctx.tol)
    e_double = commutant(e_prime, ctx.tol)
    iso = iso_check(e_double, e, ctx.tol)
    c, c_prime, c_double = (multiplicity_matrix(x, ctx.tol) for x in (e, e_prime, e_double))
    passed = (iso.isomorphic and iso.certified
              and np.array_equal(c_prime, c.T) and np.array_equal(c_double, c))
    return {
        "dims": {"h": e.h_dim, "module": e.dim, "commutant_module": e_prime.dim},
        "multiplicity": c,
        "commutant_multiplicity": c_prime,
        "double_commutant": iso.to_dict(),
    }, passed


def handle_gns(payload: GNSPayload, ctx: RunContext) -> Outcome:
    cp = build_cp_map(payload.cp, ctx)
    construction = gns(cp, ctx.tol)
    corr = construction.correspondence
    mult = multiplicity_matrix(corr, ctx.tol)
    results: Dict[str, Any] = {
        "h_dim": corr.h_dim,
        "module_dim": corr.dim,
        "multiplicity": mult,
        "residual": construction.residual,
    }
    passed = ctx.tol.allows(construction.residual, float(cp.target.rep_dim))
    single = (len(cp.source.blocks) == 1 and cp.source.blocks[0][1] == 1
              and len(cp.target.blocks) == 1 and cp.target.blocks[0][1] == 1)
    if cp.kraus is not None and single:
        kraus_rank = tolerant_rank(np.stack([k.reshape(-1) for k in cp.kraus], axis=1), ctx.tol)
        results["kraus_rank"] = kraus_rank
        passed = passed and int(mult[0, 0]) == kraus_rank
    return results, passed


def handle_tensor(payload: TensorPayload, ctx: RunContext) -> Outcome:
    e1 = build_correspondence(payload.first, ctx)
    e2 = build_correspondence(payload.second, ctx)
    product = tensor(e1, e2, ctx.tol)
    c1, c2 = multiplicity_matrix(e1, ctx.tol), multiplicity_matrix(e2, ctx.tol)
    c12 = multiplicity_matrix(product, ctx.tol)
    passed = np.array_equal(c12, c1 @ c2)
    results: Dict[str, Any] = {
        "h_dim": product.h_dim,
        "module_dim": product.dim,
        "multiplicity": c12,
        "factor_product": c1 @ c2,
    }
    if payload.third is not None:
        e3 = build_correspondence(payload.third, ctx)
        assoc = associator(e1, e2, e3, ctx.tol)
        results["associator_residual"] = assoc.residual
        passed = passed and ctx.tol.allows(assoc.residual, float(assoc.unitary.shape[0]))
    return results, passed


def handle_flip(payload: FlipPayload, ctx: RunContext) -> Outcome:
    e1 = build_correspondence(payload.first, ctx)
    e2 = build_correspondence(payload.second, ctx)
    report = flip_check(e1, e2, ctx.tol)
    return report.to_dict(), report.passed


def handle_lemma(payload: LemmaPayload, ctx: RunContext) -> Outcome:
    algebra = build_algebra(payload.algebra)
    b_prime = commutant_algebra(algebra, ctx.tol)
    if len(payload.multiplicities) != len(b_prime.blocks):
        raise ScenarioError(
            f"{len(payload.multiplicities)} multiplicities for a commutant with {len(b_prime.blocks)} blocks"
        )
    total, round_trip, worst = 0, 0, 0.0
    for i in range(payload.samples):
        rep = random_representation(b_prime, payload.multiplicities, ctx.seed + i)
        module = intertwiner_module(algebra, rep, ctx.tol)
        if not check_totality(module, ctx.tol):
            continue
        total += 1
        induced = induced_rep(module, ctx.tol)
        back = intertwiner_module(algebra, induced.rho_prime, ctx.tol)
        same, residual = back.span.same_span(induced.module_h.span, ctx.tol)
        rep_residual = max(float(np.linalg.norm(a - b)) for a, b in zip(induced.rho_prime.images, rep.images))
        worst = max(worst, residual, rep_residual)
        if same and ctx.tol.allows(rep_residual, float(rep.space_dim)):
            round_trip += 1
    passed = total == payload.samples and round_trip == payload.samples
    return {
        "samples": payload.samples,
        "total": total,
        "round_trips": round_trip,
        "max_residual": worst,
    }, passed


def handle_unit_vector(payload: UnitVectorPayload, ctx: RunContext) -> Outcome:
    module = build_module(payload.module, ctx.tol)
    cert = unit_vector_certificate(module, ctx.tol)
    full = is_full(module, ctx.tol)
    results: Dict[str, Any] = {"certificate": cert.to_dict(), "full": full, "module_dim": module.dim}
    passed = cert.verdict != "unknown"
    if payload.expect is not None:
        passed = passed and cert.verdict == payload.expect
    if full:
        construction = construct_via_commutant(Endomorphism.identity(module, ctx.tol))
        results["commutant_construction"] = dict(construction.residuals)
        passed = passed and construction.totality and construction.morita_identity and \
            _passes(ctx.tol, construction.residuals, float(construction.fiber.h_dim))
    return results, passed


def handle_endo_unit(payload: EndoPayload, ctx: RunContext) -> Outcome:
    theta = build_endomorphism(payload, ctx)
    construction = construct_via_unit(theta, _unit_vector(payload, theta))
    fiber = construction.fiber
    return {
        "fiber": fiber.describe(),
        "multiplicity": multiplicity_matrix(fiber, ctx.tol),
        "residuals": dict(construction.residuals),
        "note": construction.note,
    }, _passes(ctx.tol, construction.residuals, float(theta.h_dim))


def handle_endo_commutant(payload: EndoPayload, ctx: RunContext) -> Outcome:
    theta = build_endomorphism(payload, ctx)
    construction = construct_via_commutant(theta)
    passed = construction.totality and construction.morita_identity and \
        _passes(ctx.tol, construction.residuals, float(theta.h_dim))
    return {
        "fiber": construction.fiber.describe(),
        "commutant_fiber": construction.fiber_prime.describe(),
        "multiplicity": multiplicity_matrix(construction.fiber, ctx.tol),
        "residuals": dict(construction.residuals),
        "morita_identity": construction.morita_identity,
        "totality": construction.totality,
        "note": construction.note,
    }, passed


def handle_duality(payload: EndoPayload, ctx: RunContext) -> Outcome:
    theta = build_endomorphism(payload, ctx)
    report = duality_check(theta, _unit_vector(payload, theta))
    return report.to_dict(), report.passed


def handle_dilation(payload: EndoPayload, ctx: RunContext) -> Outcome:
    theta = build_endomorphism(payload, ctx)
    report = dilation_check(theta, _unit_vector(payload, theta), payload.steps)
    passed = True
    if payload.expect_order is not None:
        passed = report.order_holds == payload.expect_order
    if report.order_holds:
        scale = float(theta.module.algebra.rep_dim)
        passed = passed and all(ctx.tol.allows(v, scale) for v in report.semigroup_residuals.values())
    return report.to_dict(), passed


def _system(spec, ctx: RunContext):
    system = FiberSystem(build_correspondence(spec.generator, ctx), ctx.tol)
    reference, extra = None, []
    for unit_spec in spec.units:
        xi1 = decode_matrix(unit_spec.xi1)
        if unit_spec.central and reference is None:
            reference = central_unit(system, xi1)
        else:
            extra.append(make_unit(system, xi1))
    if reference is None:
        raise RefusedError("spatial product needs a central reference unit in each system")
    return system, reference, extra


def handle_spatial_product(payload: SpatialProductPayload, ctx: RunContext) -> Outcome:
    s1, w1, extra1 = _system(payload.first, ctx)
    s2, w2, extra2 = _system(payload.second, ctx)
    product = spatial_product(s1, w1, s2, w2, ctx.tol)
    embeddings = product.embedding_report()
    c1 = complement_multiplicity(s1, w1)
    c2 = complement_multiplicity(s2, w2)
    c = complement_multiplicity(product.system, product.unit)
    fibers = {str(n): product.system.power(n).h_dim for n in range(1, payload.fibers + 1)}
    geometric = {k: v for k, v in embeddings.items() if not k.endswith("_dim")}
    scale = float(max(1, product.system.generator.h_dim))
    passed = (np.array_equal(c, c1 + c2)
              and embeddings["intersection_dim"] == embeddings["unit_span_dim"]
              and _passes(ctx.tol, geometric, scale)
              and ctx.tol.allows(product.amalgamation_residual, scale))
    return {
        "h_dim": product.system.generator.h_dim,
        "factor_h_dims": [s1.generator.h_dim, s2.generator.h_dim],
        "fiber_h_dims": fibers,
        "complement_multiplicity": c,
        "factor_complement_multiplicities": [c1, c2],
        "embeddings": embeddings,
        "amalgamation_residual": product.amalgamation_residual,
        "other_units_central": [bool(is_central(u)[0]) for u in extra1 + extra2],
    }, passed


def _datum(spec) -> SpatialDatum:
    if spec.omega is None:
        return SpatialDatum.basis_vector(spec.k)
    omega = decode_vector(spec.omega).reshape(-1)
    return SpatialDatum(spec.k, omega / np.linalg.norm(omega))


def handle_powers(payload: PowersPayload, ctx: RunContext) -> Outcome:
    p = build_powers_map(payload.g_dim, _datum(payload.factor1), _datum(payload.factor2), ctx.tol)
    model = predicted_gns(p, ctx.tol)
    verified = verify_powers_gns(p, ctx.tol)
    comparison = compare_with_spatial_product(p, ctx.tol, payload.steps)
    dims = dict(comparison["dims"])
    dims["H"] = verified["gns_multiplicity"]
    return {
        "dims": dims,
        "verdict": comparison["verdict"],
        "not_tensor_product": comparison["not_tensor_product"],
        "block_formula_residual": p.block_formula_residual(),
        "model_residual": model.residual,
        "gns": verified,
        "spatial": {k: v for k, v in comparison.items() if k not in ("dims", "verdict", "not_tensor_product")},
    }, bool(verified["passed"] and comparison["passed"])


HANDLERS: Dict[str, Callable[[Any, RunContext], Outcome]] = {
    "commutant": handle_commutant,
    "gns": handle_gns,
    "tensor": handle_tensor,
    "flip": handle_flip,
    "lemma": handle_lemma,
    "unit-vector": handle_unit_vector,
    "endo-unit": handle_endo_unit,
    "endo-commutant": handle_endo_commutant,
    "duality": handle_duality,
    "dilation": handle_dilation,
    "spatial-product": handle_spatial_product,
    "powers": handle_powers,
}


# ---------------------------------------------------------------- runner

class ScenarioService:
    """Loads scenario files, resolves their run parameters and turns library errors into verdicts"""

    def __init__(self, handlers: Optional[Dict[str, Callable[[Any, RunContext], Outcome]]] = None):
        self.handlers = dict(handlers or HANDLERS)

    @staticmethod
    def load_scenario(path) -> Scenario:
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ScenarioError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path.name} is not valid JSON: {exc}") from exc
        try:
            return Scenario.model_validate(raw)
        except ValidationError as exc:
            raise ScenarioError(f"{path.name} does not match the scenario schema: {exc}") from exc

    @staticmethod
    def parse_payload(scenario: Scenario):
        try:
            return PAYLOADS[scenario.kind].model_validate(scenario.inputs)
        except ValidationError as exc:
            raise ScenarioError(f"inputs do not match the {scenario.kind} schema: {exc}") from exc

    @staticmethod
    def resolve_context(scenario: Optional[Scenario], tol_override: Optional[float] = None,
                        seed_override: Optional[int] = None) -> RunContext:
        """CLI flags over the scenario file over settings."""
        abs_eps, rel_eps = settings.ABS_EPS, settings.REL_EPS
        seed = settings.DEFAULT_SEED
        if scenario is not None:
            if scenario.tolerance is not None:
                abs_eps = scenario.tolerance.abs_eps if scenario.tolerance.abs_eps is not None else abs_eps
                rel_eps = scenario.tolerance.rel_eps if scenario.tolerance.rel_eps is not None else rel_eps
            if scenario.seed is not None:
                seed = scenario.seed
        if tol_override is not None:
            abs_eps = tol_override
        if seed_override is not None:
            seed = seed_override
        try:
            tol = Tolerance(abs_eps=abs_eps, rel_eps=rel_eps)
        except ValidationError as exc:
            raise ScenarioError(f"invalid tolerance abs_eps={abs_eps}, rel_eps={rel_eps}: {exc}") from exc
        return RunContext(tol, seed)

    def execute(self, scenario: Scenario, ctx: RunContext) -> Report:
        """Run a validated scenario; library errors become verdicts."""
        started = time.perf_counter()
        logger.log_step("scenario_started", {"scenario": scenario.name, "kind": scenario.kind})
        results: Dict[str, Any] = {}
        message = None
        try:
            payload = self.parse_payload(scenario)
            results, passed = self.handlers[scenario.kind](payload, ctx)
            verdict = "pass" if passed else "fail"
        except ScenarioError as exc:
            verdict, message = "error", str(exc)
        except RefusedError as exc:
            verdict, message = "refused", str(exc)
        except CorrlabError as exc:
            verdict, message = "fail", f"{type(exc).__name__}: {exc}"
        if message:
            logger.log_error("scenario_" + verdict, {"scenario": scenario.name, "detail": message})
        logger.log_scenario(scenario.name, scenario.kind, verdict)
        return Report(
            scenario=scenario.name,
            kind=scenario.kind,
            verdict=verdict,
            seed=ctx.seed,
            tolerance={"abs_eps": ctx.tol.abs_eps, "rel_eps": ctx.tol.rel_eps},
            version=settings.VERSION,
            results=results,
            message=message,
            duration_s=time.perf_counter() - started if settings.REPORT_TIMINGS else None,
        )

    @staticmethod
    def _error_report(name: str, exc: ScenarioError, seed_override: Optional[int]) -> Report:
        return Report(
            scenario=name,
            kind="unknown",
            verdict="error",
            seed=seed_override if seed_override is not None else settings.DEFAULT_SEED,
            tolerance={"abs_eps": settings.ABS_EPS, "rel_eps": settings.REL_EPS},
            version=settings.VERSION,
            message=str(exc),
        )

    def run_scenario(self, path, tol_override: Optional[float] = None,
                     seed_override: Optional[int] = None) -> Report:
        try:
            scenario = self.load_scenario(path)
            ctx = self.resolve_context(scenario, tol_override, seed_override)
        except ScenarioError as exc:
            logger.log_error("scenario_unreadable", {"path": str(path), "detail": str(exc)})
            return self._error_report(Path(path).stem, exc, seed_override)
        return self.execute(scenario, ctx)

    def run_suite(self, directory, jobs: Optional[int] = None) -> SuiteReport:
        directory = Path(directory)
        if not directory.is_dir():
            raise ScenarioError(f"{directory} is not a directory")
        started = time.perf_counter()
        paths = sorted(str(p) for p in directory.glob("*.json"))
        warnings: List[str] = []
        if not paths:
            warnings.append(f"no scenarios found in {directory}")
            logger.log_warning("empty_suite", {"directory": str(directory)})
        jobs = jobs or settings.SUITE_JOBS
        if jobs > 1 and len(paths) > 1:
            with Pool(processes=min(jobs, len(paths))) as pool:
                reports = pool.map(_run_path, paths)
        else:
            reports = [self.run_scenario(p) for p in paths]
        reports.sort(key=lambda r: (r.scenario, r.kind))
        counts = {v: sum(1 for r in reports if r.verdict == v) for v in EXIT_CODES}
        verdict = "pass" if counts["pass"] == len(reports) else "fail"
        logger.log_step("suite_completed", {"directory": str(directory), "total": len(reports), "verdict": verdict})
        return SuiteReport(
            directory=directory.name,
            verdict=verdict,
            total=len(reports),
            counts=counts,
            reports=reports,
            warnings=warnings,
            duration_s=time.perf_counter() - started if settings.REPORT_TIMINGS else None,
        )


# Global service instance
scenario_service = ScenarioService()

load_scenario = scenario_service.load_scenario
resolve_context = scenario_service.resolve_context
run_scenario = scenario_service.run_scenario
run_suite = scenario_service.run_suite


def _run_path(path: str) -> Report:
    # pool worker
    return scenario_service.run_scenario(path)


def exit_code(verdict: str) -> int:
    return EXIT_CODES.get(verdict, 1)
