"""
Online metric learning over label-space codewords.

Each round finds the nearest stored neighbor (x, y) of the incoming x_t, scores
the hinge loss

    l_t = max{0, ||y_t - y||_1 - (||V^T(P^T x_t - y)||^2 - ||V^T(P^T x_t - y_t)||^2)}

and, when it is positive, moves V through the rank-2 matrix
A = u u^T - v v^T (u = P^T x_t - y, v = P^T x_t - y_t):

    exact:        V_{t+1}^T = V_t^T (I - 2 lam A)^{-1}
    first_order:  V_{t+1}^T = V_t^T (I + 2 lam A)

The step lam maximizes the cubic f(lam) = a lam^3 + b lam^2 + c lam obtained by
substituting the first-order form into the Lagrangian, clamped to [m, M]. The
exact rule additionally never steps past the point where its own update meets
the constraint (see ``exact_step_limit``).
"""

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from oml_stream.core.data_io import StreamDataset
from oml_stream.core.knn_predictor import NeighborStore, nearest_neighbor_train
from oml_stream.core.projection import ProjectionP, fit_projection, project_instance
from oml_stream.exceptions import (
    ConfigError,
    NumericError,
    ShapeError,
    SingularUpdateError,
    StoreStateError,
    require_finite,
)
from oml_stream.models.schemas import Hyperparams, UpdateRule

logger = logging.getLogger(__name__)

# 2x2 Woodbury cores above this condition number are treated as singular
SINGULAR_CONDITION = 1e12

_versions = itertools.count()


@dataclass(frozen=True)
class MetricV:
    """q x d matrix V; the learned metric is Q = V V^T."""

    matrix: np.ndarray
    version: int = field(default_factory=lambda: next(_versions))

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=np.float64, order="C")
        if matrix.ndim != 2:
            raise ShapeError("V must be a q x d matrix", actual=list(matrix.shape))
        require_finite("metric V", matrix)
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def q(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def d(self) -> int:
        return int(self.matrix.shape[1])


@dataclass(frozen=True)
class Rank2Update:
    """Residuals u = P^T x_t - y (neighbor) and v = P^T x_t - y_t (truth)."""

    u: np.ndarray
    v: np.ndarray

    @property
    def A(self) -> np.ndarray:
        return np.outer(self.u, self.u) - np.outer(self.v, self.v)

    @property
    def is_zero(self) -> bool:
        """A = 0 exactly when u = v or u = -v."""
        return bool(np.array_equal(self.u, self.v) or np.array_equal(self.u, -self.v))


@dataclass(frozen=True)
class CubicCoeffs:
    """f(lam) = a lam^3 + b lam^2 + c lam."""

    a: float
    b: float
    c: float

    def __call__(self, lam: float | np.ndarray) -> float | np.ndarray:
        return ((self.a * lam + self.b) * lam + self.c) * lam

    def derivative(self, lam: float) -> float:
        return (3.0 * self.a * lam + 2.0 * self.b) * lam + self.c

    def curvature(self, lam: float) -> float:
        return 6.0 * self.a * lam + 2.0 * self.b

    @property
    def is_zero(self) -> bool:
        return self.a == 0.0 and self.b == 0.0 and self.c == 0.0


@dataclass
class ModelState:
    """Single-writer online state: frozen P, current V, memory D and counters."""

    P: ProjectionP
    V: MetricV
    store: NeighborStore
    round: int = 0
    cumulative_loss: float = 0.0
    loss_positive_rounds: int = 0
    singular_fallbacks: int = 0


@dataclass(frozen=True)
class RoundResult:
    """What one online round did."""

    loss: float
    step: float | None = None
    cubic_step: float | None = None
    rule: UpdateRule | None = None
    post_loss: float | None = None
    post_loss_first_order: float | None = None
    fell_back: bool = False
    neighbor_index: int = -1


def margin(y_t: np.ndarray, y: np.ndarray) -> float:
    """||y_t - y||_1; for 0/1 vectors the number of differing labels."""
    y_t = np.asarray(y_t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y_t.shape != y.shape:
        raise ShapeError(
            "label vectors differ in length", expected=list(y_t.shape), actual=list(y.shape)
        )
    return float(np.abs(y_t - y).sum())


def _check_dims(V: MetricV, P: ProjectionP) -> None:
    if V.q != P.q:
        raise ShapeError("V and P disagree on q", expected=P.q, actual=V.q)


def build_update(
    P: ProjectionP, x_t: np.ndarray, y_t: np.ndarray, y: np.ndarray
) -> Rank2Update:
    """u = P^T x_t - y, v = P^T x_t - y_t."""
    w = project_instance(P, x_t)
    y_t = np.asarray(y_t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y_t.shape != (P.q,) or y.shape != (P.q,):
        raise ShapeError(
            "label vectors must have length q",
            expected=P.q,
            actual=[list(y_t.shape), list(y.shape)],
        )
    return Rank2Update(u=w - y, v=w - y_t)


def _loss_from_update(V: MetricV, upd: Rank2Update, delta: float) -> float:
    zu = V.matrix.T @ upd.u
    zv = V.matrix.T @ upd.v
    value = delta - (float(zu @ zu) - float(zv @ zv))
    if not math.isfinite(value):
        raise NumericError("hinge loss: non-finite value encountered")
    return max(0.0, value)


def hinge_loss(
    V: MetricV, P: ProjectionP, x_t: np.ndarray, y_t: np.ndarray, y: np.ndarray
) -> float:
    """Hinge loss of V on the triple (x_t, y_t, neighbor label y)."""
    _check_dims(V, P)
    return _loss_from_update(V, build_update(P, x_t, y_t, y), margin(y_t, y))


def cubic_coefficients(V_t: MetricV, upd: Rank2Update, delta: float) -> CubicCoeffs:
    """
    Coefficients of f(lam) = L(V_bar(lam)) with V_bar^T = V_t^T (I + 2 lam A).

    With Q = V_t V_t^T:
        a = -4 (u^T A Q A u - v^T A Q A v)
        b = 2 ||V_t^T A||_F^2 - 4 (u^T A Q u - v^T A Q v)
        c = delta - (u^T Q u - v^T Q v)
    All terms are formed from d-vectors, O(q d).
    """
    if upd.is_zero:
        return CubicCoeffs(0.0, 0.0, float(delta))

    V = V_t.matrix
    u, v = upd.u, upd.v
    au, av = V.T @ u, V.T @ v
    uu, vv, uv = float(u @ u), float(v @ v), float(u @ v)

    # V^T A u and V^T A v
    vau = au * uu - av * uv
    vav = au * uv - av * vv

    va_frob_sq = float(au @ au) * uu - 2.0 * float(au @ av) * uv + float(av @ av) * vv
    a = -4.0 * (float(vau @ vau) - float(vav @ vav))
    b = 2.0 * va_frob_sq - 4.0 * (float(vau @ au) - float(vav @ av))
    c = float(delta) - (float(au @ au) - float(av @ av))
    coef = CubicCoeffs(a, b, c)
    require_finite("cubic coefficients", np.array([a, b, c]))
    return coef


def approximate_lagrangian(
    V_t: MetricV, upd: Rank2Update, delta: float, lam: float
) -> float:
    """
    Dense evaluation of the Lagrangian at the first-order point V_bar(lam).

    1/2 ||V_bar - V_t||_F^2 + lam (delta - (||V_bar^T u||^2 - ||V_bar^T v||^2));
    equals cubic_coefficients(...)(lam) exactly in exact arithmetic.
    """
    V = V_t.matrix
    A = upd.A
    V_bar = (np.eye(V.shape[0]) + 2.0 * lam * A) @ V
    du = V_bar.T @ upd.u
    dv = V_bar.T @ upd.v
    proximal = 0.5 * float(np.sum((V_bar - V) ** 2))
    return proximal + lam * (delta - (float(du @ du) - float(dv @ dv)))


def _stationary_points(coef: CubicCoeffs) -> list[float]:
    qa, qb, qc = 3.0 * coef.a, 2.0 * coef.b, coef.c
    if qa == 0.0:
        return [] if qb == 0.0 else [-qc / qb]
    disc = qb * qb - 4.0 * qa * qc
    if disc < 0.0:
        return []
    # numerically stable quadratic roots
    half = -0.5 * (qb + math.copysign(math.sqrt(disc), qb))
    roots = [half / qa]
    if half != 0.0:
        roots.append(qc / half)
    return roots


def select_lambda(coef: CubicCoeffs, m: float, M: float) -> float:
    """
    Maximizer of f over {m, M} and the interior local maxima in (m, M).

    Covers the clamp cases (f decreasing -> m, peak inside -> beta, f still
    increasing at M -> M) and the degenerate quadratic/linear/zero cubics.
    Ties go to the smaller step.
    """
    if not 0.0 < m < M:
        raise ConfigError(f"need 0 < m < M, got m={m}, M={M}")
    if coef.is_zero:
        return m

    candidates = [m, M]
    for root in _stationary_points(coef):
        if m < root < M and coef.curvature(root) < 0.0:
            candidates.append(root)
    candidates.sort()
    values = [float(coef(lam)) for lam in candidates]
    return candidates[int(np.argmax(values))]


def update_V(
    V_t: MetricV, lam: float, upd: Rank2Update, rule: UpdateRule = UpdateRule.EXACT
) -> MetricV:
    """
    Apply one update to V.

    The exact rule uses A = U C U^T with U = [u v], C = diag(1, -1):
    (I - U G U^T)^{-1} = I + U (I_2 - G U^T U)^{-1} G U^T with G = 2 lam C,
    so only a 2x2 system is solved.
    """
    if V_t.q != upd.u.shape[0]:
        raise ShapeError("update length does not match V", expected=V_t.q, actual=upd.u.shape[0])
    if upd.is_zero:
        return V_t

    V = V_t.matrix
    U = np.column_stack([upd.u, upd.v])
    G = np.array([2.0 * lam, -2.0 * lam])
    T = U.T @ V  # 2 x d

    if rule == UpdateRule.FIRST_ORDER:
        return MetricV(V + U @ (G[:, None] * T))

    core = np.eye(2) - G[:, None] * (U.T @ U)
    if not np.all(np.isfinite(core)) or np.linalg.cond(core) > SINGULAR_CONDITION:
        raise SingularUpdateError(
            f"I - 2*lambda*A is singular at lambda={lam:.6g}", step=lam
        )
    # V_+ = (I + U K^{-1} G U^T)^T V = V + U G K^{-T} U^T V
    correction = G[:, None] * np.linalg.solve(core.T, T)
    V_new = V + U @ correction
    require_finite("updated V", V_new)
    return MetricV(V_new)


def _exact_slack(
    gram: tuple[float, float, float], code: tuple[float, float, float], lam: float, delta: float
) -> float:
    """
    delta - (||V(lam)^T u||^2 - ||V(lam)^T v||^2) for the exact update at lam.

    ``gram`` is (u.u, u.v, v.v) and ``code`` is (u^T Q u, u^T Q v, v^T Q v).
    V(lam)^T [u v] = V_t^T [u v] N with N = I_2 + K^{-1} G S, so each squared
    norm is a 2x2 quadratic form in the Q block; all in plain floats.
    """
    uu, uv, vv = gram
    quu, quv, qvv = code
    g = 2.0 * lam
    # K = I_2 - G S with G = diag(g, -g)
    k00, k01, k10, k11 = 1.0 - g * uu, -g * uv, g * uv, 1.0 + g * vv
    det = k00 * k11 - k01 * k10
    if det == 0.0:
        return -math.inf
    # G S
    s00, s01, s10, s11 = g * uu, g * uv, -g * uv, -g * vv
    n00 = 1.0 + (k11 * s00 - k01 * s10) / det
    n01 = (k11 * s01 - k01 * s11) / det
    n10 = (k00 * s10 - k10 * s00) / det
    n11 = 1.0 + (k00 * s11 - k10 * s01) / det
    pull = quu * n00 * n00 + 2.0 * quv * n00 * n10 + qvv * n10 * n10
    push = quu * n01 * n01 + 2.0 * quv * n01 * n11 + qvv * n11 * n11
    return delta - (pull - push)


def exact_step_limit(V_t: MetricV, upd: Rank2Update, delta: float, upper: float) -> float:
    """
    Largest step in (0, upper] the exact rule can take without overshooting.

    With V(lam)^T = V_t^T (I - 2 lam A)^{-1}, the slack
    h(lam) = delta - (||V(lam)^T u||^2 - ||V(lam)^T v||^2) equals the hinge
    loss at 0 and decreases towards the pole lam = 1 / (2 mu), mu the positive
    eigenvalue of A. Its root is the maximizer of the exact dual and gives a
    zero post-update loss. Beyond the pole I - 2 lam A is indefinite and the
    inverse contracts V along span(u, v) instead.

    Returns ``upper`` when h stays non-negative on (0, upper]. Must only be
    called with a positive loss.
    """
    if upd.is_zero:
        return upper

    u, v = upd.u, upd.v
    uu, uv, vv = float(u @ u), float(u @ v), float(v @ v)
    au, av = V_t.matrix.T @ u, V_t.matrix.T @ v
    gram = (uu, uv, vv)
    code = (float(au @ au), float(au @ av), float(av @ av))
    trace = uu - vv
    mu = 0.5 * (trace + math.sqrt(trace * trace + 4.0 * max(uu * vv - uv * uv, 0.0)))

    def slack(lam: float) -> float:
        return _exact_slack(gram, code, lam, delta)

    pole = 1.0 / (2.0 * mu) if mu > 0.0 else math.inf
    if upper < pole:
        if slack(upper) >= 0.0:
            return upper
        hi = upper
    else:
        # walk towards the pole until the slack changes sign
        for k in range(1, 50):
            hi = pole * (1.0 - 2.0**-k)
            if slack(hi) < 0.0:
                break
        else:
            return hi

    return float(brentq(slack, 0.0, hi, xtol=1e-15 * hi, maxiter=200))


def default_embedding_dim(q: int) -> int:
    """max(1, floor(0.8 q)), kept below q."""
    return max(1, min(q - 1, int(math.floor(0.8 * q))))


def init_metric(q: int, d: int, rng_seed: int) -> MetricV:
    """V_1 with i.i.d. N(0, 1) entries scaled by 1/sqrt(q)."""
    if q < 2:
        raise ConfigError(f"online metric learning needs q >= 2, got q={q}")
    if not 1 <= d < q:
        raise ConfigError(f"embedding dim must satisfy 1 <= d < q, got d={d}, q={q}")
    rng = np.random.default_rng([rng_seed, 1])
    matrix = rng.standard_normal((q, d)) / math.sqrt(q)
    return MetricV(matrix)


def init_state(seed: StreamDataset, hp: Hyperparams) -> ModelState:
    """Fit P on the seed set, draw V_1, and load the seed into the store."""
    P = fit_projection(seed.features, seed.labels, hp.ridge)
    d = hp.d if hp.d is not None else default_embedding_dim(seed.q)
    V = init_metric(seed.q, d, hp.rng_seed)
    store = NeighborStore(seed.p, seed.q, projection=P, max_size=hp.max_store_size)
    store.extend(seed.features, seed.labels)
    logger.info(
        "initialized state: p=%d q=%d d=%d, %d seed examples", seed.p, seed.q, d, len(store)
    )
    return ModelState(P=P, V=V, store=store)


def online_round(
    state: ModelState, x_t: np.ndarray, y_t: np.ndarray, hp: Hyperparams
) -> tuple[RoundResult, ModelState]:
    """
    One round: nearest neighbor, hinge loss, optional V update, append to D.

    The state is advanced in place and returned. Zero-loss rounds keep the
    same V object. Numeric failures are re-raised naming the round, the rule
    and the step.
    """
    if len(state.store) == 0:
        raise StoreStateError("online round on an empty neighbor store")

    round_no = state.round + 1
    nearest = nearest_neighbor_train(state.store, x_t, hp.train_nn_metric, state.V)
    upd = build_update(state.P, x_t, y_t, nearest.labels)
    delta = margin(y_t, nearest.labels)

    rule = hp.update_rule
    lam: float | None = None
    try:
        loss = _loss_from_update(state.V, upd, delta)
        result = RoundResult(loss=loss, neighbor_index=nearest.index)
        if loss > 0.0:
            coef = cubic_coefficients(state.V, upd, delta)
            cubic_lam = select_lambda(coef, hp.m, hp.M)
            lam = cubic_lam
            fell_back = False
            first_order = update_V(state.V, cubic_lam, upd, UpdateRule.FIRST_ORDER)
            if rule == UpdateRule.FIRST_ORDER:
                V_next = first_order
            else:
                lam = max(hp.m, exact_step_limit(state.V, upd, delta, cubic_lam))
                try:
                    V_next = update_V(state.V, lam, upd, UpdateRule.EXACT)
                except SingularUpdateError:
                    logger.warning(
                        "round %d: singular exact update at lambda=%.6g, using first order",
                        round_no,
                        lam,
                    )
                    V_next = update_V(state.V, lam, upd, UpdateRule.FIRST_ORDER)
                    rule = UpdateRule.FIRST_ORDER
                    fell_back = True
                    state.singular_fallbacks += 1

            result = RoundResult(
                loss=loss,
                step=lam,
                cubic_step=cubic_lam,
                rule=rule,
                post_loss=_loss_from_update(V_next, upd, delta),
                post_loss_first_order=_loss_from_update(first_order, upd, delta),
                fell_back=fell_back,
                neighbor_index=nearest.index,
            )
            state.V = V_next
            state.loss_positive_rounds += 1
            logger.debug(
                "round %d: loss=%.6g lambda=%.6g (cubic %.6g) post=%.6g",
                round_no,
                loss,
                lam,
                cubic_lam,
                result.post_loss,
            )
    except NumericError as e:
        step = "n/a" if lam is None else f"{lam:.6g}"
        raise NumericError(
            f"round {round_no}, {rule.value} rule, lambda={step}: {e.message}",
            details={**e.details, "round": round_no, "update_rule": rule.value, "lambda": lam},
        ) from e

    state.store.append(x_t, y_t)
    state.round = round_no
    state.cumulative_loss += loss
    return result, state
