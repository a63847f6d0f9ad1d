"""The multi-stage private optimization drivers.

Every driver owns its stage schedule, per-release noise formula and a
sample-budget ledger (disjoint index ranges are the precondition of the
parallel-composition privacy argument).  A driver run is single-threaded
and owns its RNG; independent runs may execute in parallel.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from . import engine, geometry, schedules
from .core import (LabeledDataset, LossModel, PrivacyBudget, ReleaseMeta,
                   RunRecord, empirical_risk, proximal_wrapped, risk_value)
from .mechanisms import (GAUSS_MULTIPLIER, NoiseSpec, gaussian_scale,
                         laplace_scale, sample_noise)


class DriverError(RuntimeError):
    pass


def _release(record: RunRecord, w_bar: np.ndarray, sens2: float,
             budget: PrivacyBudget, rng: np.random.Generator,
             label: str, span: tuple[int, int],
             multiplier: float = GAUSS_MULTIPLIER) -> np.ndarray:
    """Add calibrated noise to w_bar and ledger the release."""
    d = w_bar.shape[0]
    if budget.mode == "approximate":
        family = "gaussian"
        scale = gaussian_scale(sens2, budget, multiplier)
    else:
        family = "laplace"
        scale = laplace_scale(multiplier * sens2 * math.sqrt(d),
                              budget.epsilon)
    if record.noiseless or scale == 0.0:
        released = w_bar.copy()
    else:
        released = w_bar + sample_noise(NoiseSpec(family, scale, d), rng)
    meta = ReleaseMeta(release_id=len(record.released_iterates),
                       family=family, sensitivity2=sens2,
                       multiplier=multiplier, epsilon=budget.epsilon,
                       delta=budget.delta, dimension=d, scale=scale)
    record.add_release(released, meta, label, span)
    return released


def _warm_start(fset, w):
    """Noisy releases can leave the set; warm starts are re-projected."""
    if geometry.membership(fset, w, 1e-9):
        return w
    return geometry.project(fset, w)


def _clamp_step(eta: float, model: LossModel, record: RunRecord,
                label: str, cap_factor: float = 1.0) -> float:
    """Clamp eta to cap_factor / beta (every utility lemma needs it)."""
    beta = model.smoothness
    if beta > 0 and math.isfinite(beta) and eta > cap_factor / beta:
        record.notes.setdefault("step_clamps", []).append(label)
        return cap_factor / beta
    return eta


def phased_sgd(data: LabeledDataset, model: LossModel,
               fset: geometry.FeasibleSet, w0: np.ndarray,
               eta: float | None, budget: PrivacyBudget,
               rng: np.random.Generator, *, record: RunRecord | None = None,
               span: tuple[int, int] | None = None,
               multiplier: float = GAUSS_MULTIPLIER,
               label: str = "phased_sgd", D: float | None = None,
               clip: bool = True) -> np.ndarray:
    """Halving-segment SGD: stage i runs one pass on floor(2^-i n) samples
    with step 4^-i eta, then releases the averaged iterate with noise scale
    4 L eta_i sqrt(ln(1/delta))/eps (Gaussian) or 4 L eta_i sqrt(d)/eps
    (Laplace)."""
    own_record = record is None
    if own_record:
        record = RunRecord(seed=-1)
    start, stop = span if span is not None else (0, data.n)
    n = stop - start
    L = model.lipschitz
    if eta is None:
        if D is None:
            D = fset.diameter
        eta = schedules.lemma_step_size(D, L, n, data.d, budget)
    eta = _clamp_step(eta, model, record, label)
    sched = schedules.phased_sgd_schedule(n, eta)
    if sched.extra["truncated"]:
        warnings.warn(f"{label}: halving stages truncated before "
                      f"k={sched.extra['k']} (tail size reached 0)")

    w = np.asarray(w0, dtype=float)
    pos = start
    for i, (ni, eta_i) in enumerate(zip(sched.stage_sizes, sched.stepsizes),
                                    start=1):
        seg = engine.Segment(pos, pos + ni)
        w_bar, _ = engine.sgd_pass(
            model, data, seg, _warm_start(fset, w), eta_i, fset,
            clip_to=L if clip else None,
            residual_sink=record.dykstra_residuals)
        w = _release(record, w_bar, L * eta_i, budget, rng,
                     f"{label}/stage{i}", (pos, pos + ni), multiplier)
        pos += ni
    record.mark_unused(f"{label}/unused", (pos, stop))
    if own_record:
        record.final_point = w
    return w


def phased_erm(data: LabeledDataset, model: LossModel,
               fset: geometry.FeasibleSet, w0: np.ndarray,
               eta: float | None, budget: PrivacyBudget,
               rng: np.random.Generator, *, record: RunRecord | None = None,
               span: tuple[int, int] | None = None,
               multiplier: float = GAUSS_MULTIPLIER,
               label: str = "phased_erm", D: float | None = None) -> np.ndarray:
    """Non-smooth variant: each stage solves the regularized segment ERM
    F_i(w) = mean_{S_i} f(w, x) + ||w - w_{i-1}||^2 / (eta_i n_i) to
    suboptimality <= L^2 eta_i / n_i, then adds Gaussian noise."""
    if budget.mode != "approximate":
        raise DriverError("phased_erm is defined for approximate DP only")
    own_record = record is None
    if own_record:
        record = RunRecord(seed=-1)
    start, stop = span if span is not None else (0, data.n)
    n = stop - start
    L = model.lipschitz
    if eta is None:
        if D is None:
            D = fset.diameter
        eta = schedules.lemma_step_size(D, L, n, data.d, budget)
    sched = schedules.phased_sgd_schedule(n, eta)

    w = geometry.project(fset, np.asarray(w0, dtype=float))
    pos = start
    for i, (ni, eta_i) in enumerate(zip(sched.stage_sizes, sched.stepsizes),
                                    start=1):
        X = data.features[pos:pos + ni]
        y = data.labels[pos:pos + ni]
        target = L ** 2 * eta_i / ni
        w_tilde, gap_bound = _solve_regularized_erm(
            model, X, y, fset, center=w, coeff=1.0 / (eta_i * ni),
            target=target)
        if gap_bound > target:
            raise DriverError(
                f"{label}: inner solver certified gap {gap_bound:.3e} "
                f"> target {target:.3e} at stage {i}")
        record.notes.setdefault("erm_gap_bounds", []).append(gap_bound)
        released = _release(record, w_tilde, L * eta_i, budget, rng,
                            f"{label}/stage{i}", (pos, pos + ni), multiplier)
        w = _warm_start(fset, released)
        pos += ni
    record.mark_unused(f"{label}/unused", (pos, stop))
    final = record.released_iterates[-1]
    if own_record:
        record.final_point = final
    return final


def _solve_regularized_erm(model: LossModel, X, y, fset, center, coeff,
                           target, max_iter: int = 200_000):
    """Minimize mean loss + coeff ||w - center||^2 over fset to within
    ``target``, with a post-hoc certificate.

    Nonsmooth kinds are Huber-smoothed with parameter s = target (uniform
    one-sided error <= s/2), which makes the gradient-mapping certificate
    gap <= ||G||^2/(2 mu) + s/2 valid; mu = 2 coeff is the strong convexity
    of the quadratic term.
    """
    from .core import risk_gradient

    mu = 2.0 * coeff
    smooth_param = target if not math.isfinite(model.smoothness) else 0.0

    xmax2 = float(np.max(np.sum(X ** 2, axis=1))) if len(X) else 1.0
    if smooth_param > 0:
        beta = xmax2 / smooth_param + mu
    else:
        beta = max(model.smoothness, 1e-12) + mu

    def grad(w):
        if smooth_param > 0 and model.kind == "hinge":
            z = 1.0 - y * (X @ w)
            slope = np.clip(z / smooth_param, 0.0, 1.0)
            g = -(X.T @ (y * slope)) / len(X)
        else:
            g = risk_gradient(model, w, X, y)
        return g + mu * (w - center)

    # projected gradient with Nesterov momentum for strongly convex objectives
    w = center.copy()
    v = w.copy()
    q = mu / beta
    mom = (1.0 - math.sqrt(q)) / (1.0 + math.sqrt(q))
    step = 1.0 / beta
    cert = math.inf
    for it in range(max_iter):
        g = grad(v)
        w_next = geometry.project(fset, v - step * g)
        G = (v - w_next) / step
        cert = float(G @ G) / (2.0 * mu) + smooth_param / 2.0
        if cert <= target:
            return w_next, cert
        v = w_next + mom * (w_next - w)
        w = w_next
    return w, cert


def phased_sgd_sc(data: LabeledDataset, model: LossModel,
                  fset: geometry.FeasibleSet, w0: np.ndarray, gamma: float,
                  budget: PrivacyBudget, rng: np.random.Generator, *,
                  record: RunRecord | None = None,
                  span: tuple[int, int] | None = None,
                  multiplier: float = GAUSS_MULTIPLIER,
                  label: str = "phased_sgd_sc",
                  D: float | None = None) -> np.ndarray:
    """Strongly convex variant: chains phased_sgd stages on the loss
    f(w, x) + ||w - w0||^2/(2 gamma), regularized toward the ORIGINAL w0."""
    if not gamma > 0:
        raise DriverError("gamma must be positive")
    own_record = record is None
    if own_record:
        record = RunRecord(seed=-1)
    start, stop = span if span is not None else (0, data.n)
    n = stop - start
    try:
        sched = schedules.phased_sgd_sc_schedule(n)
    except schedules.ScheduleError as exc:
        raise DriverError(f"{label}: {exc}") from exc
    w0 = np.asarray(w0, dtype=float)
    prox_model = proximal_wrapped(model, w0, gamma)
    if D is None:
        D = fset.diameter
    w = w0
    pos = start
    for t, nt in enumerate(sched.stage_sizes, start=1):
        eta_t = schedules.lemma_step_size(D, model.lipschitz, nt, data.d,
                                          budget)
        w = phased_sgd(data, prox_model, fset, _warm_start(fset, w), eta_t,
                       budget, rng, record=record, span=(pos, pos + nt),
                       multiplier=multiplier, label=f"{label}/stage{t}")
        pos += nt
    record.mark_unused(f"{label}/unused", (pos, stop))
    if own_record:
        record.final_point = w
    return w


def psa(data: LabeledDataset, model: LossModel, fset: geometry.FeasibleSet,
        w1: np.ndarray, R0: float | None, budget: PrivacyBudget,
        rng: np.random.Generator, *, record: RunRecord | None = None,
        span: tuple[int, int] | None = None,
        multiplier: float = GAUSS_MULTIPLIER) -> np.ndarray:
    """Shrinking-ball stochastic approximation: stage k runs phased_sgd on
    the intersection of the base set with a ball of halving radius around
    the previous stage output, projected via Dykstra."""
    own_record = record is None
    if own_record:
        record = RunRecord(seed=-1)
    start, stop = span if span is not None else (0, data.n)
    n = stop - start
    if n < 256:
        warnings.warn("psa analyzed for n >= 256; smaller n is best-effort")
    try:
        sched = schedules.psa_schedule(n)
    except schedules.ScheduleError as exc:
        raise DriverError(f"psa: {exc}") from exc
    m, n0 = sched.extra["m"], sched.extra["n0"]
    if R0 is None:
        R0 = fset.diameter
    L = model.lipschitz
    if budget.mode == "approximate":
        priv = budget.epsilon / (2.0 * math.sqrt(
            data.d * math.log(1.0 / budget.delta)))
    else:
        priv = budget.epsilon / data.d
    base_step = min(4.0 / math.sqrt(n0), priv)

    w_hat = np.asarray(w1, dtype=float)
    R = R0
    pos = start
    for k in range(1, m + 1):
        gamma_k = (R / L) * base_step
        stage_set = geometry.Intersection(
            (fset, geometry.L2Ball(center=w_hat.copy(), radius=R)))
        w_hat = phased_sgd(data, model, stage_set,
                           _warm_start(stage_set, w_hat), gamma_k, budget,
                           rng, record=record, span=(pos, pos + n0),
                           multiplier=multiplier, label=f"psa/stage{k}")
        R = R / 2.0
        pos += n0
    record.mark_unused("psa/unused", (pos, stop))
    # the release can leave the feasible set; the returned point is the last
    # noisy release re-projected onto the base set
    final = _warm_start(fset, w_hat)
    if own_record:
        record.final_point = final
    return final


def psa2(data: LabeledDataset, model: LossModel, fset: geometry.FeasibleSet,
         w0: np.ndarray, chi0: float | None, theta: float, lam: float,
         budget: PrivacyBudget, rng: np.random.Generator, *,
         record: RunRecord | None = None,
         eval_data: LabeledDataset | None = None,
         multiplier: float = GAUSS_MULTIPLIER):
    """Halving-gamma chain of phased_sgd_sc stages, centered at the previous
    stage output.  Returns (trajectory, selected); the selection is
    NON-PRIVATE (by test-set risk) and flagged as evaluation-only."""
    own_record = record is None
    if own_record:
        record = RunRecord(seed=-1)
    n = data.n
    L = model.lipschitz
    try:
        sched = schedules.psa2_schedule(n, data.d, theta, lam, L, budget)
    except schedules.ScheduleError as exc:
        raise DriverError(f"psa2: {exc}") from exc
    m, n0 = sched.extra["m"], sched.extra["n0"]
    if chi0 is None:
        chi0 = L * fset.diameter
    gamma0 = schedules.psa2_gamma0(chi0, L, n0, data.d, budget)
    if gamma0 < fset.diameter / L:
        warnings.warn("psa2: gamma_0 < diameter/L; the utility analysis "
                      "assumes a larger initial gamma")

    w = np.asarray(w0, dtype=float)
    gamma = gamma0
    trajectory = []
    pos = 0
    for k in range(1, m + 1):
        gamma = gamma / 2.0
        w = phased_sgd_sc(data, model, fset, _warm_start(fset, w), gamma,
                          budget, rng, record=record, span=(pos, pos + n0),
                          multiplier=multiplier, label=f"psa2/stage{k}")
        trajectory.append(np.array(w))
        pos += n0
    record.mark_unused("psa2/unused", (pos, n))

    sel_data = eval_data if eval_data is not None else data
    record.notes["psa2_selection"] = (
        "non-private selection by held-out risk; evaluation-only"
        if eval_data is not None else
        "non-private selection by TRAINING risk (no eval set given); "
        "evaluation-only")
    risks = [empirical_risk(model, _warm_start(fset, wk), sel_data)
             for wk in trajectory]
    selected = trajectory[int(np.argmin(risks))]
    if own_record:
        record.final_point = selected
    return trajectory, selected


def iterated_phased_sgd(data: LabeledDataset, model: LossModel,
                        fset: geometry.FeasibleSet, w0: np.ndarray,
                        theta_bar: float, D: float | None,
                        budget: PrivacyBudget, rng: np.random.Generator, *,
                        record: RunRecord | None = None,
                        span: tuple[int, int] | None = None,
                        multiplier: float = GAUSS_MULTIPLIER) -> np.ndarray:
    """Growing-segment chain of phased_sgd stages, warm-started."""
    own_record = record is None
    if own_record:
        record = RunRecord(seed=-1)
    start, stop = span if span is not None else (0, data.n)
    n = stop - start
    try:
        sched = schedules.iterated_schedule(n, theta_bar)
    except schedules.ScheduleError as exc:
        raise DriverError(f"iterated_phased_sgd: {exc}") from exc
    if not sched.extra["condition_ok"]:
        warnings.warn("iterated_phased_sgd: n too small for theta_bar "
                      ">= 2^(loglog n/(log n - 1)); proceeding anyway")
    if D is None:
        D = fset.diameter
    w = np.asarray(w0, dtype=float)
    pos = start
    for t, nt in enumerate(sched.stage_sizes, start=1):
        eta_t = schedules.lemma_step_size(D, model.lipschitz, nt, data.d,
                                          budget)
        w = phased_sgd(data, model, fset, _warm_start(fset, w), eta_t,
                       budget, rng, record=record, span=(pos, pos + nt),
                       multiplier=multiplier,
                       label=f"iterated/stage{t}")
        pos += nt
    record.mark_unused("iterated/unused", (pos, stop))
    if own_record:
        record.final_point = w
    return w


def epoch_dp_sgd(data: LabeledDataset, model: LossModel,
                 fset: geometry.FeasibleSet, eta1: float, n1: int,
                 w0: np.ndarray, budget: PrivacyBudget,
                 rng: np.random.Generator, *,
                 record: RunRecord | None = None,
                 span: tuple[int, int] | None = None,
                 multiplier: float = GAUSS_MULTIPLIER,
                 label: str = "epoch") -> np.ndarray:
    """Doubling epochs with halving steps; the per-epoch release noise comes
    from the uniform-stability sensitivity 2L^2/(lambda n_i) of the average
    (so the default Gaussian scale is 8L^2 sqrt(ln(1/delta))/(n_i eps
    lambda))."""
    if not model.strong_convexity > 0:
        raise DriverError("epoch_dp_sgd needs a strongly convex model")
    own_record = record is None
    if own_record:
        record = RunRecord(seed=-1)
    start, stop = span if span is not None else (0, data.n)
    n = stop - start
    try:
        sched = schedules.epoch_schedule(n, n1)
    except schedules.ScheduleError as exc:
        raise DriverError(f"epoch_dp_sgd: {exc}") from exc
    eta = _clamp_step(eta1, model, record, f"{label}/epoch1")
    L = model.lipschitz
    w = np.asarray(w0, dtype=float)
    pos = start
    for i, ni in enumerate(sched.stage_sizes, start=1):
        seg = engine.Segment(pos, pos + ni)
        w_bar, _ = engine.sgd_pass(model, data, seg, _warm_start(fset, w),
                                   eta, fset, clip_to=L,
                                   residual_sink=record.dykstra_residuals)
        # noise scale uses the true epoch size including appended leftovers
        sens = engine.stability_sensitivity(model, ni)
        w = _release(record, w_bar, sens, budget, rng,
                     f"{label}/epoch{i}", (pos, pos + ni), multiplier)
        eta = eta / 2.0
        pos += ni
    if own_record:
        record.final_point = w
    return w


def faster_dpsgd_sc(data: LabeledDataset, model: LossModel,
                    fset: geometry.FeasibleSet, w0: np.ndarray, tau: float,
                    budget: PrivacyBudget, rng: np.random.Generator, *,
                    record: RunRecord | None = None,
                    multiplier: float = GAUSS_MULTIPLIER) -> np.ndarray:
    """Two-stage driver: iterated_phased_sgd(theta_bar=2) on the first half,
    then epoch_dp_sgd warm-started on the second half.  Each half gets the
    full budget (disjoint data)."""
    if tau <= 1:
        raise DriverError("tau must exceed 1")
    if not model.strong_convexity > 0 or not model.smoothness > 0:
        raise DriverError("faster_dpsgd_sc needs lambda_sc > 0 and beta > 0")
    own_record = record is None
    if own_record:
        record = RunRecord(seed=-1)
    n = data.n
    half = n // 2
    kappa = model.smoothness / model.strong_convexity
    if n < kappa ** tau:
        warnings.warn("faster_dpsgd_sc: n < kappa^tau; outside the analyzed "
                      "regime")
    n1 = math.ceil(2.0 ** (2 * tau + 3) * kappa)
    if n1 >= half / 2:
        raise DriverError(
            f"first epoch size {n1} >= n/4; use a smaller tau or more data")
    w_hat = iterated_phased_sgd(data, model, fset, w0, 2.0, None, budget,
                                rng, record=record, span=(0, half),
                                multiplier=multiplier)
    eta1 = 1.0 / (4.0 * model.smoothness)
    w_tilde = epoch_dp_sgd(data, model, fset, eta1, n1,
                           _warm_start(fset, w_hat), budget, rng,
                           record=record, span=(half, 2 * half),
                           multiplier=multiplier, label="faster/epoch")
    record.mark_unused("faster/unused", (2 * half, n))
    if own_record:
        record.final_point = w_tilde
    return w_tilde


def audit_ledger_disjoint(record: RunRecord) -> bool:
    """No sample index may appear in two ledger entries."""
    spans = sorted(span for _, span, _ in record.sample_ledger
                   if span[1] > span[0])
    for (a, b), (c, d) in zip(spans, spans[1:]):
        if c < b:
            return False
    return True


def audit_noise_scales(record: RunRecord) -> bool:
    """Every recorded scale must equal its formula output, bit-exact."""
    for meta, scale in zip(record.release_meta, record.noise_scales):
        if meta.family == "gaussian":
            expected = (meta.multiplier * meta.sensitivity2
                        * math.sqrt(math.log(1.0 / meta.delta))
                        / meta.epsilon)
        else:
            expected = (meta.multiplier * meta.sensitivity2
                        * math.sqrt(meta.dimension) / meta.epsilon)
        if expected != scale:
            return False
    return True
