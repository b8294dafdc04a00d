"""Superselection condition checks, sector mixtures and path-law comparisons."""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import asdict, dataclass, field

import numpy as np

from .belljump import (
    EXACT_MAX_CONFIGS,
    EXACT_MAX_STEPS,
    OCCUPATION_FLOOR,
    BellProcess,
    PathEnsemble,
    derive_seed,
    make_rng,
    rate_matrix,
)
from .hilbert import (
    PVM,
    DomainError,
    EigDecomposition,
    Propagator,
    as_state,
    commutator,
    commutator_norm,
    eigendecompose,
    expectation,
    random_state,
    require_hermitian,
)
from .models import Model
from .stats import StatResult, bonferroni, chi2_two_sample

SECTOR_FLOOR = 1e-14
VERDICTS = ("strong", "weak-only", "neither-strong", "neither", "inconclusive")


@dataclass(frozen=True)
class ConditionResult:
    name: str
    passed: bool
    value: float
    detail: str = ""


@dataclass
class SuperselectionReport:
    observable: str
    conditions: dict[str, ConditionResult] = field(default_factory=dict)
    statistics: list[StatResult] = field(default_factory=list)
    exact: dict = field(default_factory=dict)
    verdict: str = "inconclusive"
    meta: dict = field(default_factory=dict)
    ensemble: PathEnsemble | None = field(default=None, repr=False)

    def add(self, *results: ConditionResult) -> None:
        for r in results:
            self.conditions[r.name] = r

    def decide(self, min_samples: int = 200) -> str:
        self.verdict = decide_verdict(self.conditions, self.statistics, self.exact, min_samples)
        return self.verdict

    def to_dict(self) -> dict:
        return {
            "observable": self.observable,
            "verdict": self.verdict,
            "conditions": {k: asdict(v) for k, v in self.conditions.items()},
            "statistics": [dict(asdict(s), passed=s.passed) for s in self.statistics],
            "exact": dict(self.exact),
            "meta": dict(self.meta),
        }


def decide_verdict(conditions: dict[str, ConditionResult], statistics: Sequence[StatResult],
                   exact: dict, min_samples: int = 200) -> str:
    """Map recorded conditions and path evidence to a verdict.

    strong: function-of-configuration and [G, H] = 0 hold and no path test
    contradicts them.  weak-only: the strong conditions fail but either weak
    criterion holds.  neither: [G, H] != 0.  neither-strong: [G, H] = 0 yet
    no criterion certifies weak superselection.  inconclusive: path evidence
    is contradictory or too thin to support the conditions.
    """
    def ok(name):
        c = conditions.get(name)
        return None if c is None else c.passed

    commutes = ok("commutes_with_hamiltonian")
    if ok("function_of_configuration") and commutes:
        exact_ok = exact.get("passed", True) if exact.get("available") else True
        stats_ok = all(s.passed for s in statistics)
        # every recorded consequence must agree with the two conditions
        consistent = all(c.passed for c in conditions.values())
        if not (exact_ok and stats_ok and consistent):
            return "inconclusive"
        if statistics and not exact.get("available"):
            if min(min(s.n_a, s.n_b) if s.n_b else s.n_a for s in statistics) < min_samples:
                return "inconclusive"
        return "strong"
    weak_config = ok("commutes_with_configuration") and commutes
    weak_subsystem = ok("commutes_with_system_hamiltonian") and ok("commutes_with_interaction")
    if weak_config or weak_subsystem:
        return "weak-only"
    if commutes is False:
        return "neither"
    return "neither-strong"


# -- configuration functions --------------------------------------------------

@dataclass(frozen=True)
class ConfigFunction:
    ok: bool
    values: dict[int, float] | None
    residual: float
    witness: tuple[int, int, complex] | None = None

    def __bool__(self) -> bool:
        return self.ok


def extract_config_function(g, pvm: PVM, tol: float = 1e-10) -> ConfigFunction:
    """Write G as sum_q f(q) P(q) if possible; otherwise return the worst entry."""
    g = require_hermitian(g, what="observable")
    diag = np.real(np.diag(g))
    f = np.zeros(pvm.n_cells)
    for q in pvm.used_cells():
        f[q] = diag[pvm.indices(q)].mean()
    residual = g - np.diag(f[pvm.cell_of])
    mag = np.abs(residual)
    worst = float(mag.max()) if mag.size else 0.0
    if worst <= tol:
        return ConfigFunction(True, {q: float(f[q]) for q in pvm.used_cells()}, worst)
    i, j = np.unravel_index(int(np.argmax(mag)), mag.shape)
    return ConfigFunction(False, None, worst, (int(i), int(j), complex(g[i, j])))


def _sector_indices(dec: EigDecomposition, fvals: dict[int, float], n_cells: int) -> np.ndarray:
    """Eigenvalue index of f(q) for every cell (-1 where undefined)."""
    out = np.full(n_cells, -1, dtype=np.int64)
    for q, v in fvals.items():
        k = dec.index_of(v)
        out[q] = -1 if k is None else k
    return out


def check_strong_conditions(g, model: Model, tol: float = 1e-12) -> list[ConditionResult]:
    """Function-of-configuration and [G, H] = 0, plus their listed consequences."""
    g = require_hermitian(g, what="observable")
    out = []
    fc = extract_config_function(g, model.pvm, tol=max(tol, 1e-10))
    detail = "" if fc.ok else f"witness entry {fc.witness[:2]} = {fc.witness[2]:.3g}"
    out.append(ConditionResult("function_of_configuration", fc.ok, fc.residual, detail))
    c_h = commutator_norm(g, model.h_total)
    out.append(ConditionResult("commutes_with_hamiltonian", c_h <= tol, c_h))
    c_jump = commutator_norm(g, model.h_jump)
    c_diag = commutator_norm(g, model.h_diag)
    out.append(ConditionResult("commutes_with_h_jump", c_jump <= tol, c_jump))
    out.append(ConditionResult("commutes_with_h_diag", c_diag <= tol, c_diag))
    dec = eigendecompose(g)
    cross = 0.0
    for a, pa in enumerate(dec.projectors):
        for b, pb in enumerate(dec.projectors):
            if a != b:
                cross = max(cross, float(np.max(np.abs(pa @ model.h_jump @ pb))))
    out.append(ConditionResult("no_cross_sector_jumps", cross <= tol, cross))
    if fc.ok:
        vals = np.array([fc.values[q] for q in model.pvm.used_cells()])
        in_spec = all(dec.index_of(v) is not None for v in vals)
        out.append(ConditionResult("function_values_are_eigenvalues", in_spec,
                                   float(len(dec)), f"eigenvalues {np.round(dec.eigenvalues, 12).tolist()}"))
        spread = 0.0
        comps: dict[int, list[float]] = {}
        for q in model.pvm.used_cells():
            comps.setdefault(model.space.component_of[q], []).append(fc.values[q])
        for vs in comps.values():
            spread = max(spread, max(vs) - min(vs))
        out.append(ConditionResult("constant_on_components", spread <= 1e-10, spread))
    return out


def configuration_commutator(g, pvm: PVM) -> float:
    """max_B ||[G, P(B)]|| over the configuration cells."""
    g = np.asarray(g)
    worst = 0.0
    for q in pvm.used_cells():
        worst = max(worst, commutator_norm(g, pvm.projector(q)))
    return worst


# -- mixtures -----------------------------------------------------------------

@dataclass(frozen=True)
class Mixture:
    states: tuple[np.ndarray, ...]
    weights: tuple[float, ...]
    eigenvalues: tuple[float, ...]
    skipped: tuple[float, ...] = ()
    source_psi: np.ndarray | None = None
    source_observable: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.states)

    @property
    def members(self) -> list[tuple[np.ndarray, float]]:
        return list(zip(self.states, self.weights))

    def with_weights(self, weights: Sequence[float]) -> "Mixture":
        w = np.asarray(weights, dtype=float)
        if w.size != len(self) or np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise DomainError("replacement weights must be a probability vector over the members")
        return Mixture(self.states, tuple(float(x) for x in w), self.eigenvalues, self.skipped,
                       self.source_psi, self.source_observable)

    def density_matrix(self) -> np.ndarray:
        return sum(w * np.outer(s, s.conj()) for s, w in self.members)


def build_mixture(psi, g, floor: float = SECTOR_FLOOR, decomposition: EigDecomposition | None = None) -> Mixture:
    """Renormalized sector components P_G(nu) psi with weights ||P_G(nu) psi||^2."""
    psi = as_state(psi)
    dec = decomposition or eigendecompose(g)
    states, weights, values, skipped = [], [], [], []
    for nu, p in zip(dec.eigenvalues, dec.projectors):
        comp = p @ psi
        w = float(np.real(np.vdot(comp, comp)))
        if w > floor:
            states.append(comp / np.sqrt(w))
            weights.append(w)
            values.append(float(nu))
        else:
            skipped.append(float(nu))
    total = sum(weights)
    weights = [w / total for w in weights]
    return Mixture(tuple(states), tuple(weights), tuple(values), tuple(skipped), psi, np.asarray(g))


def mixture_density_matrix(psi, g, decomposition: EigDecomposition | None = None) -> np.ndarray:
    """rho^psi = sum_nu P_G(nu) |psi><psi| P_G(nu)."""
    psi = as_state(psi)
    dec = decomposition or eigendecompose(g)
    rho = np.zeros((psi.size, psi.size), dtype=complex)
    for p in dec.projectors:
        v = p @ psi
        rho += np.outer(v, v.conj())
    return rho


def density_matrix_errors(rho) -> dict[str, float]:
    rho = np.asarray(rho)
    return {
        "hermitian": float(np.max(np.abs(rho - rho.conj().T))),
        "trace": float(abs(np.trace(rho) - 1)),
        "min_eigenvalue": float(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()),
    }


# -- exact identities ---------------------------------------------------------

@dataclass(frozen=True)
class RateIdentityResult:
    max_rate_deviation: float
    max_state_deviation: float
    comparisons: int


def verify_rate_identity(psi, g, model: Model, t_samples: Sequence[float],
                         floor: float = OCCUPATION_FLOOR) -> RateIdentityResult:
    """Compare rates under psi_t and under (psi^nu)_t out of sector-nu configurations.

    Also checks that projecting then evolving equals evolving then
    projecting.  If G is not a configuration function every occupied source
    configuration is compared against every sector.
    """
    psi = as_state(psi)
    dec = eigendecompose(g)
    mix = build_mixture(psi, g, decomposition=dec)
    fc = extract_config_function(g, model.pvm)
    sector_of = _sector_indices(dec, fc.values, model.n_configs) if fc.ok else None
    prop = Propagator(model.h_total, model.hbar)
    worst_rate = worst_state = 0.0
    n_cmp = 0
    for t in t_samples:
        psi_t = prop.evolve(psi, t)
        rates, occ = rate_matrix(psi_t, model.pvm, model.h_jump, model.hbar, floor)
        for state, nu in zip(mix.states, mix.eigenvalues):
            k = dec.index_of(nu)
            evolved_member = prop.evolve(state, t)
            comp = dec.projectors[k] @ psi_t
            comp_norm = np.linalg.norm(comp)
            if comp_norm > 0:
                worst_state = max(worst_state, float(np.max(np.abs(comp / comp_norm - evolved_member))))
            r_nu, occ_nu = rate_matrix(evolved_member, model.pvm, model.h_jump, model.hbar, floor)
            sources = occ & occ_nu
            if sector_of is not None:
                sources &= sector_of == k
            for q in np.flatnonzero(sources):
                worst_rate = max(worst_rate, float(np.max(np.abs(rates[:, q] - r_nu[:, q]))))
                n_cmp += 1
    return RateIdentityResult(worst_rate, worst_state, n_cmp)


@dataclass(frozen=True)
class ConditionalResult:
    max_deviation: float
    skipped: tuple[float, ...]


def verify_conditional_distribution(psi, g, model: Model, t: float) -> ConditionalResult:
    """|psi^nu_t|^2 on cells vs the psi_t law conditioned on f = nu."""
    psi = as_state(psi)
    dec = eigendecompose(g)
    fc = extract_config_function(g, model.pvm)
    if not fc.ok:
        raise DomainError("observable is not a function of the configuration")
    sector_of = _sector_indices(dec, fc.values, model.n_configs)
    prop = Propagator(model.h_total, model.hbar)
    psi_t = prop.evolve(psi, t)
    p_t = model.pvm.probabilities(psi_t)
    worst = 0.0
    skipped = []
    for k, (nu, proj) in enumerate(zip(dec.eigenvalues, dec.projectors)):
        comp0 = proj @ psi
        w0 = float(np.real(np.vdot(comp0, comp0)))
        weight_t = float(np.real(np.vdot(proj @ psi_t, proj @ psi_t)))
        if w0 <= SECTOR_FLOOR or weight_t <= SECTOR_FLOOR:
            skipped.append(float(nu))
            continue
        member_t = prop.evolve(comp0 / np.sqrt(w0), t)
        left = model.pvm.probabilities(member_t)
        right = np.where(sector_of == k, p_t, 0.0) / weight_t
        worst = max(worst, float(np.max(np.abs(left - right))))
    return ConditionalResult(worst, tuple(skipped))


def expectation_drift(psi, g, model: Model, times: Sequence[float]) -> float:
    """max_t |<psi_t|G|psi_t> - <psi|G|psi>|."""
    prop = Propagator(model.h_total, model.hbar)
    g0 = expectation(psi, g)
    return max(abs(expectation(prop.evolve(psi, t), g) - g0) for t in times)


def expectation_derivative_check(psi, g, model: Model, t: float, h: float = 1e-4) -> tuple[float, float]:
    """(central finite difference of <G>_t, exact (i/hbar)<[H, G]>_t)."""
    prop = Propagator(model.h_total, model.hbar)
    fd = (expectation(prop.evolve(psi, t + h), g) - expectation(prop.evolve(psi, t - h), g)) / (2 * h)
    psi_t = prop.evolve(psi, t)
    exact = float(np.real(1j / model.hbar * np.vdot(psi_t, commutator(model.h_total, g) @ psi_t)))
    return fd, exact


def check_conservation_conditions(g, model: Model, ensemble: PathEnsemble, psi,
                                  times: Sequence[float] | None = None,
                                  drift_tol: float = 1e-9) -> list[ConditionResult]:
    """f(Q_t) constant along every sampled path, and <G>_t constant in time."""
    fc = extract_config_function(g, model.pvm)
    out = [ConditionResult("function_of_configuration", fc.ok, fc.residual)]
    if fc.ok:
        f = np.array([fc.values.get(q, np.nan) for q in range(model.n_configs)])
        vals = f[ensemble.skeletons]
        changed = int(np.sum(np.any(vals != vals[:, :1], axis=1)))
        out.append(ConditionResult("conserved_on_paths", changed == 0, float(changed),
                                   f"{changed} of {len(ensemble)} paths change f"))
    times = ensemble.times if times is None else times
    drift = expectation_drift(psi, g, model, times)
    out.append(ConditionResult("expectation_constant", drift <= drift_tol, drift))
    return out


# -- path-law comparison ------------------------------------------------------

DEFAULT_FEATURES = ("occupancy_1", "occupancy_2", "occupancy_3", "jump_count",
                    "first_jump_time", "sector_value")


def _features(skel: np.ndarray, f_of_config: np.ndarray, n_steps: int) -> dict[str, np.ndarray]:
    moves = skel[:, 1:] != skel[:, :-1]
    first = np.where(moves.any(axis=1), moves.argmax(axis=1), n_steps)
    n_bins = min(20, n_steps + 1)
    edges = np.linspace(0, n_steps + 1, n_bins + 1)
    ks = [max(1, n_steps // 3), max(1, (2 * n_steps) // 3), n_steps]
    return {
        "occupancy_1": skel[:, ks[0]],
        "occupancy_2": skel[:, ks[1]],
        "occupancy_3": skel[:, ks[2]],
        "jump_count": moves.sum(axis=1),
        "first_jump_time": np.digitize(first, edges[1:-1]),
        "sector_value": np.nan_to_num(f_of_config[skel[:, 0]], nan=-1e300),
    }


def sample_mixture_skeletons(model: Model, mixture: Mixture, n: int, horizon: float, dt: float,
                             seed: int) -> tuple[np.ndarray, np.ndarray, list[BellProcess]]:
    """Per path: draw a member by weight, then a Bell path from that member."""
    u = make_rng(derive_seed(seed, 1)).random(n)
    cum = np.cumsum(mixture.weights)
    cum[-1] = 1.0
    member = np.searchsorted(cum, u, side="right")
    procs = [BellProcess(model, s, horizon, dt) for s in mixture.states]
    skel = np.empty((n, procs[0].n_steps + 1), dtype=np.int64)
    for m, proc in enumerate(procs):
        idx = np.flatnonzero(member == m)
        if idx.size == 0:
            continue
        uu = np.array([proc.uniforms(derive_seed(seed, 2, int(i))) for i in idx])
        q0 = proc.initial_configs(uu[:, 0])
        skel[idx] = proc.run_skeletons(q0, uu[:, 1:])
    return skel, member, procs


def mixture_path_law(mixture: Mixture, procs: Sequence[BellProcess]) -> dict[tuple[int, ...], float]:
    law: dict[tuple[int, ...], float] = {}
    for w, proc in zip(mixture.weights, procs):
        for key, p in proc.exact_path_law().items():
            law[key] = law.get(key, 0.0) + w * p
    return law


def law_distance(a: dict, b: dict) -> float:
    keys = set(a) | set(b)
    return max((abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys), default=0.0)


def strong_superselection_test(model: Model, g, psi, n: int, horizon: float, dt: float, seed: int,
                               features: Sequence[str] = DEFAULT_FEATURES, alpha: float = 0.01,
                               weights: Sequence[float] | None = None, exact: bool = True,
                               exact_tol: float = 1e-8, name: str = "G") -> SuperselectionReport:
    """Compare the path law of psi with that of its sector mixture.

    Ensemble A samples from psi; ensemble B draws a sector by weight (or by
    the supplied ``weights``) and then a path from the renormalized sector
    state.  Each feature is tested at the Bonferroni level ``alpha/len``.
    When the exact-enumeration guards allow, the two exact laws are compared
    as well.
    """
    psi = as_state(psi)
    report = SuperselectionReport(name)
    report.add(*check_strong_conditions(g, model))
    mix = build_mixture(psi, g)
    if weights is not None:
        mix = mix.with_weights(weights)
    fc = extract_config_function(g, model.pvm)
    f_of_config = np.full(model.n_configs, np.nan)
    if fc.ok:
        for q, v in fc.values.items():
            f_of_config[q] = v

    proc_a = BellProcess(model, psi, horizon, dt)
    ens_a = proc_a.sample(n, derive_seed(seed, 0))
    skel_b, _, procs = sample_mixture_skeletons(model, mix, n, horizon, dt, seed)
    feats_a = _features(ens_a.skeletons, f_of_config, proc_a.n_steps)
    feats_b = _features(skel_b, f_of_config, proc_a.n_steps)
    level = bonferroni(alpha, len(features))
    for feat in features:
        report.statistics.append(chi2_two_sample(feats_a[feat], feats_b[feat], feat, level))

    can_enumerate = model.n_configs <= EXACT_MAX_CONFIGS and proc_a.n_steps <= EXACT_MAX_STEPS
    report.add(*check_conservation_conditions(g, model, ens_a, psi)[1:])
    report.ensemble = ens_a
    report.exact = {"available": bool(exact and can_enumerate)}
    if exact and can_enumerate:
        dev = law_distance(proc_a.exact_path_law(), mixture_path_law(mix, procs))
        report.exact.update(max_deviation=dev, tol=exact_tol, passed=dev <= exact_tol)
    report.meta.update(n=n, horizon=horizon, dt=proc_a.dt, seed=seed, alpha=alpha,
                       level_per_feature=level, weights=list(mix.weights),
                       eigenvalues=list(mix.eigenvalues), skipped_sectors=list(mix.skipped))
    report.decide()
    return report


# -- weak superselection ------------------------------------------------------

@dataclass(frozen=True)
class WeakConfigResult:
    max_deviation: float
    configuration_commutator: float
    hamiltonian_commutator: float
    conditions_hold: bool


def weak_config_distribution_check(psi, g, model: Model, t_samples: Sequence[float],
                                   tol: float = 1e-12) -> WeakConfigResult:
    """tr(P(q) rho^{psi_t}) against <psi_t|P(q)|psi_t> at the sampled times."""
    psi = as_state(psi)
    dec = eigendecompose(g)
    prop = Propagator(model.h_total, model.hbar)
    worst = 0.0
    for t in t_samples:
        psi_t = prop.evolve(psi, t)
        rho = mixture_density_matrix(psi_t, g, dec)
        p_rho = np.bincount(model.pvm.cell_of, weights=np.real(np.diag(rho)), minlength=model.n_configs)
        worst = max(worst, float(np.max(np.abs(p_rho - model.pvm.probabilities(psi_t)))))
    c_p = configuration_commutator(g, model.pvm)
    c_h = commutator_norm(g, model.h_total)
    return WeakConfigResult(worst, c_p, c_h, c_p <= tol and c_h <= tol)


def min_gap(g) -> float:
    ev = eigendecompose(g).eigenvalues
    return float(np.min(np.diff(ev))) if ev.size > 1 else np.inf


def decoherence_convergence(psi, g, s_values: Sequence[float]) -> list[tuple[float, float]]:
    """Operator-norm distance between the s-averaged rho_S and rho^psi."""
    psi = as_state(psi)
    dec = eigendecompose(g)
    comps = [p @ psi for p in dec.projectors]
    rho_inf = sum(np.outer(c, c.conj()) for c in comps)
    out = []
    for S in s_values:
        rho = np.zeros_like(rho_inf)
        for a, ca in enumerate(comps):
            for b, cb in enumerate(comps):
                delta = dec.eigenvalues[a] - dec.eigenvalues[b]
                if a == b:
                    factor = 1.0
                else:
                    x = delta * S
                    factor = np.expm1(1j * x) / (1j * x)
                rho += factor * np.outer(ca, cb.conj())
        out.append((float(S), float(np.linalg.norm(rho - rho_inf, 2))))
    return out


@dataclass(frozen=True)
class SubsystemResult:
    system_commutator: float
    interaction_commutator: float
    conditions_hold: bool
    max_probability_deviation: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.conditions_hold and self.max_probability_deviation <= 1e-9

    def conditions(self) -> list[ConditionResult]:
        return [
            ConditionResult("commutes_with_system_hamiltonian",
                            self.system_commutator <= self.tol, self.system_commutator),
            ConditionResult("commutes_with_interaction",
                            self.interaction_commutator <= self.tol, self.interaction_commutator),
        ]


def weak_superselection_subsystem_check(model: Model, g_s, tol: float = 1e-12,
                                        times: Sequence[float] = (0.4, 1.3, 2.9),
                                        s_values: Sequence[float] = (0.7, 1.9, 3.1),
                                        seed: int = 0) -> SubsystemResult:
    """[G, H_S] = 0 = [G (x) 1, H_SE] and the s-independence of outcome probabilities.

    Starts from (e^{iGs} psi) (x) phi for random psi, phi, evolves with H
    and compares the probabilities of every environment configuration cell
    across s.
    """
    fact = model.factorization
    if fact is None:
        raise DomainError("model declares no system/environment factorization")
    g_s = require_hermitian(g_s, what="system observable")
    if g_s.shape != (fact.dim_s, fact.dim_s):
        raise DomainError(f"system observable must be {fact.dim_s}x{fact.dim_s}")
    h_s, _, h_se = fact.split(model.h_total)
    g_full = np.kron(g_s, np.eye(fact.dim_e))
    c_s = commutator_norm(g_s, h_s)
    c_se = commutator_norm(g_full, h_se)
    rng = np.random.default_rng(seed)
    psi_s = random_state(fact.dim_s, rng)
    phi_e = random_state(fact.dim_e, rng)
    h_f = fact.to_factored(model.h_total)
    prop = Propagator(h_f, model.hbar)
    w, v = np.linalg.eigh(g_s)
    n_cells = int(fact.env_cell_of.max()) + 1

    def outcome_probs(s, t):
        rotated = (v * np.exp(1j * w * s)) @ v.conj().T @ psi_s
        big = prop.evolve(np.kron(rotated, phi_e), t).reshape(fact.dim_s, fact.dim_e)
        per_env = np.sum(np.abs(big) ** 2, axis=0)
        return np.bincount(fact.env_cell_of, weights=per_env, minlength=n_cells)

    worst = 0.0
    for t in times:
        ref = outcome_probs(0.0, t)
        for s in s_values:
            worst = max(worst, float(np.max(np.abs(outcome_probs(s, t) - ref))))
    return SubsystemResult(c_s, c_se, c_s <= tol and c_se <= tol, worst, tol)
