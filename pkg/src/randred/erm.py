"""Regularized empirical risk minimization and the reduction pipelines.

The primal problem is

    min_w  (1/n) sum_i loss(w.T x_i, y_i) + (lam/2) ||w||^2

solved either in the original feature space or after one of three
reductions: a data-dependent subspace (sample-axis sketch, orthonormal
basis, feature reduction), a plain oblivious projection, or an oblivious
projection followed by dual recovery of a full-dimensional model.  The
hinge loss is solved in the dual by stochastic coordinate ascent with
exact per-coordinate maximization and a duality-gap stopping rule; the
multiclass softmax loss is solved in the primal by monotone gradient
descent.
"""

import json
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .errors import (InvalidInputError, TrainingFailedError,
                     UndefinedMetricError)
from .linalg import is_sparse
from .rng import generator
from .sketch import (Axis, SketchOperator, apply_features, operator_config,
                     operator_from_config, selection_operator)
from .subspace import (SubspaceProjector, approx_error, projector_direct,
                       projector_fast_sparse, reduce as reduce_features)
from .sketch import apply_samples

# ------------------------------------------------------------------- losses


@dataclass(frozen=True)
class LossSpec:
    """Loss family with its Lipschitz constant.

    hinge: max(0, 1 - y z), binary labels in {-1, +1}, G = 1; the dual
    variable satisfies alpha_i * y_i in [-1, 0].
    softmax: multiclass cross entropy, G bounded by 2, solved primal-only
    (its conjugate is not used anywhere in the package).
    """

    variant: str

    def __post_init__(self):
        if self.variant not in ("hinge", "softmax"):
            raise InvalidInputError(f"unknown loss {self.variant!r}")

    @property
    def lipschitz(self) -> float:
        return 1.0 if self.variant == "hinge" else 2.0


HINGE = LossSpec("hinge")
SOFTMAX = LossSpec("softmax")


@dataclass
class ErmProblem:
    data: object          # (d, n) dense array or CSC
    labels: np.ndarray
    loss: LossSpec
    lam: float

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if self.labels.shape != (self.data.shape[1],):
            raise InvalidInputError("label count must match the number of columns")
        if self.lam <= 0:
            raise InvalidInputError("lam must be strictly positive")
        if self.loss.variant == "hinge":
            vals = np.unique(self.labels)
            if not np.all(np.isin(vals, (-1, 1))):
                raise InvalidInputError("hinge labels must be +-1")
            self.labels = self.labels.astype(np.float64)

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[0]


@dataclass
class ErmSolution:
    weights: np.ndarray
    alpha: Optional[np.ndarray]
    primal_obj: float
    dual_obj: Optional[float]
    duality_gap: Optional[float]
    epochs: int
    converged: bool
    history: list = field(default_factory=list, repr=False)


@dataclass(frozen=True)
class SolverConfig:
    gap_tol: float = 1e-3     # dual stopping rule
    max_epochs: int = 1000
    primal_tol: float = 1e-5  # gradient / certificate tolerance
    max_iter: int = 20000
    seed: int = 0


# ---------------------------------------------------------------- objectives

def _hinge_primal(w, X, y, lam):
    margins = y * (X.T @ w)
    return float(np.mean(np.maximum(0.0, 1.0 - margins)) + 0.5 * lam * (w @ w))


def _softmax_value(W, X, yidx, lam):
    Z = W.T @ X
    lse = logsumexp(Z, axis=0)
    picked = Z[yidx, np.arange(Z.shape[1])]
    return float(np.mean(lse - picked) + 0.5 * lam * np.sum(W * W))


def objective_F(w, X, labels, loss: LossSpec, lam: float) -> float:
    """Finite-sum regularized objective at the given weights."""
    if loss.variant == "hinge":
        y = np.asarray(labels, dtype=np.float64)
        return _hinge_primal(np.asarray(w, dtype=np.float64), X, y, lam)
    classes, yidx = np.unique(np.asarray(labels), return_inverse=True)
    W = np.asarray(w, dtype=np.float64)
    if W.ndim != 2 or W.shape[1] != classes.size:
        raise InvalidInputError(
            f"softmax weights must be (d, {classes.size}), got {W.shape}")
    return _softmax_value(W, X, yidx, lam)


# --------------------------------------------------------------- dual solver

def _column_sqnorms(X) -> np.ndarray:
    if is_sparse(X):
        return np.asarray(X.multiply(X).sum(axis=0)).ravel()
    return np.einsum("ij,ij->j", X, X)


def solve_dual(problem: ErmProblem, gap_tol: float = 1e-3,
               max_epochs: int = 1000, seed: int = 0) -> ErmSolution:
    """Hinge-loss dual coordinate ascent.

    Visits coordinates in a fresh seeded permutation each epoch and
    applies the exact per-coordinate maximizer.  The maintained primal
    ``w = -X alpha / (lam n)`` is recomputed from alpha at every epoch
    boundary, so the reported primal-dual link is exact to roundoff.
    Terminates once the duality gap drops to ``gap_tol``; if
    ``max_epochs`` runs out first the solution is flagged unconverged.
    """
    if problem.loss.variant != "hinge":
        raise InvalidInputError("the dual solver supports the hinge loss only")
    X, y, lam = problem.data, problem.labels, problem.lam
    n = problem.n
    d = problem.dim
    lamn = lam * n
    sq = _column_sqnorms(X)
    beta = np.zeros(n)
    w = np.zeros(d)
    rng = generator(seed)
    sparse_path = is_sparse(X)
    if sparse_path:
        Xc = X.tocsc()
        indptr, indices, data = Xc.indptr, Xc.indices, Xc.data
    else:
        Xc = np.asfortranarray(np.asarray(X, dtype=np.float64))
    history = []
    primal = _hinge_primal(w, X, y, lam)
    dual = 0.0
    gap = primal - dual
    epochs = 0
    converged = gap <= gap_tol
    while not converged and epochs < max_epochs:
        perm = rng.permutation(n)
        if sparse_path:
            for i in perm:
                lo, hi = indptr[i], indptr[i + 1]
                idx = indices[lo:hi]
                val = data[lo:hi]
                q = sq[i]
                if q == 0.0:
                    beta[i] = 1.0
                    continue
                margin = y[i] * (w[idx] @ val)
                b_new = beta[i] + (1.0 - margin) * lamn / q
                b_new = min(1.0, max(0.0, b_new))
                delta = b_new - beta[i]
                if delta != 0.0:
                    w[idx] += (delta * y[i] / lamn) * val
                    beta[i] = b_new
        else:
            for i in perm:
                x = Xc[:, i]
                q = sq[i]
                if q == 0.0:
                    beta[i] = 1.0
                    continue
                margin = y[i] * (w @ x)
                b_new = beta[i] + (1.0 - margin) * lamn / q
                b_new = min(1.0, max(0.0, b_new))
                delta = b_new - beta[i]
                if delta != 0.0:
                    w += (delta * y[i] / lamn) * x
                    beta[i] = b_new
        epochs += 1
        w = np.asarray(X @ (beta * y)) / lamn  # drift-free primal from beta
        primal = _hinge_primal(w, X, y, lam)
        dual = float(np.mean(beta) - 0.5 * lam * (w @ w))
        gap = primal - dual
        history.append((primal, dual))
        converged = gap <= gap_tol
    alpha = -y * beta
    return ErmSolution(weights=w, alpha=alpha, primal_obj=primal,
                       dual_obj=dual, duality_gap=gap, epochs=epochs,
                       converged=converged, history=history)


# ------------------------------------------------------------- primal solver

def _solve_primal_hinge(problem: ErmProblem, tol, max_iter) -> ErmSolution:
    # Deterministic full-batch subgradient descent with the classic
    # 1/(lam t) step size.  Only improving iterates are accepted into the
    # reported solution, and progress is certified by the duality gap of
    # the margin-violation dual point.
    X, y, lam = problem.data, problem.labels, problem.lam
    d, n = problem.dim, problem.n
    w = np.zeros(d)
    best_w = w.copy()
    best_obj = _hinge_primal(w, X, y, lam)
    history = [best_obj]
    dual = None
    gap = None
    converged = False
    check_every = 50
    it = 0
    for it in range(1, max_iter + 1):
        margins = y * (X.T @ w)
        obj = float(np.mean(np.maximum(0.0, 1.0 - margins)) + 0.5 * lam * (w @ w))
        if obj < best_obj:
            best_obj = obj
            best_w = w.copy()
            history.append(best_obj)  # accepted steps only
        coeff = np.where(margins < 1.0, -y, 0.0) / n
        g = np.asarray(X @ coeff) + lam * w
        w = w - g / (lam * (it + 1.0))
        if it % check_every == 0 or it == max_iter:
            bm = y * (X.T @ best_w)
            beta = (bm < 1.0).astype(np.float64)
            wd = np.asarray(X @ (beta * y)) / (lam * n)
            dual = float(np.mean(beta) - 0.5 * lam * (wd @ wd))
            gap = best_obj - dual
            if gap <= tol * max(1.0, abs(best_obj)):
                converged = True
                break
    return ErmSolution(weights=best_w, alpha=None, primal_obj=best_obj,
                       dual_obj=dual, duality_gap=gap, epochs=it,
                       converged=converged, history=history)


def _solve_primal_softmax(problem: ErmProblem, tol, max_iter) -> ErmSolution:
    X, lam = problem.data, problem.lam
    d, n = problem.dim, problem.n
    classes, yidx = np.unique(problem.labels, return_inverse=True)
    C = classes.size
    cols = np.arange(n)

    def value_grad(W):
        Z = np.asarray(W.T @ X)
        lse = logsumexp(Z, axis=0)
        val = float(np.mean(lse - Z[yidx, cols]) + 0.5 * lam * np.sum(W * W))
        P = np.exp(Z - lse)
        P[yidx, cols] -= 1.0
        G = np.asarray(X @ P.T) / n + lam * W
        return val, G

    W = np.zeros((d, C))
    obj, G = value_grad(W)
    history = [obj]
    eta = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        gnorm2 = float(np.sum(G * G))
        if math.sqrt(gnorm2) <= tol:
            converged = True
            break
        eta = min(eta * 2.0, 1e8)
        while True:
            W_new = W - eta * G
            obj_new = _softmax_value(W_new, X, yidx, lam)
            if obj_new <= obj - 0.25 * eta * gnorm2:
                break
            eta *= 0.5
            if eta < 1e-18:
                break
        if eta < 1e-18:
            break
        W = W_new
        obj, G = value_grad(W)
        history.append(obj)
    return ErmSolution(weights=W, alpha=None, primal_obj=obj, dual_obj=None,
                       duality_gap=None, epochs=it, converged=converged,
                       history=history)


def solve_primal(problem: ErmProblem, tol: float = 1e-5,
                 max_iter: int = 20000) -> ErmSolution:
    """Deterministic primal descent; monotone in the accepted iterates."""
    if problem.loss.variant == "hinge":
        return _solve_primal_hinge(problem, tol, max_iter)
    return _solve_primal_softmax(problem, tol, max_iter)


def _solve(problem: ErmProblem, solver: SolverConfig) -> ErmSolution:
    if problem.loss.variant == "hinge":
        return solve_dual(problem, gap_tol=solver.gap_tol,
                          max_epochs=solver.max_epochs, seed=solver.seed)
    return _solve_primal_softmax(problem, solver.primal_tol, solver.max_iter)


# ------------------------------------------------------------ trained models

@dataclass
class TrainedModel:
    """A model plus whatever reduction it needs at prediction time."""

    mode: str                 # "full" | "nor" | "rp" | "rpdr"
    loss: LossSpec
    lam: float
    weights: np.ndarray
    projector: Optional[SubspaceProjector] = None
    operator: Optional[SketchOperator] = None
    classes: Optional[np.ndarray] = None
    solution: Optional[ErmSolution] = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    def decision_function(self, X) -> np.ndarray:
        """Scores on raw-feature-space data: (n,) for binary hinge models,
        (C, n) for softmax models."""
        if self.mode == "nor":
            Z = reduce_features(self.projector, X)
        elif self.mode == "rp":
            Z = apply_features(self.operator, X)
        else:
            Z = X
        W = self.weights
        if W.ndim == 1:
            return np.asarray(Z.T @ W).ravel()
        return np.asarray(W.T @ Z)

    def predict(self, X) -> np.ndarray:
        scores = self.decision_function(X)
        if scores.ndim == 1:
            return np.where(scores >= 0.0, 1.0, -1.0)
        return self.classes[np.argmax(scores, axis=0)]


def _finish(mode, problem, sol, *, projector=None, operator=None,
            reduce_ms=0.0, opt_ms=0.0, extra=None) -> TrainedModel:
    classes = None
    if problem.loss.variant == "softmax":
        classes = np.unique(problem.labels)
    meta = {"reduce_time_ms": reduce_ms, "opt_time_ms": opt_ms,
            "epochs": sol.epochs, "converged": sol.converged,
            "duality_gap": sol.duality_gap}
    if extra:
        meta.update(extra)
    return TrainedModel(mode=mode, loss=problem.loss, lam=problem.lam,
                        weights=sol.weights, projector=projector,
                        operator=operator, classes=classes, solution=sol,
                        meta=meta)


def train_full(X, labels, loss: LossSpec, lam: float,
               solver: SolverConfig = SolverConfig()) -> TrainedModel:
    """Baseline: solve the problem on the raw features."""
    problem = ErmProblem(X, labels, loss, lam)
    t0 = time.perf_counter()
    sol = _solve(problem, solver)
    opt_ms = (time.perf_counter() - t0) * 1e3
    return _finish("full", problem, sol, opt_ms=opt_ms)


def train_nor(X, labels, loss: LossSpec, lam: float, omega: SketchOperator,
              solver: SolverConfig = SolverConfig(),
              rank_tol: float = 1e-10) -> TrainedModel:
    """Non-oblivious pipeline: sketch samples, project, solve reduced.

    Steps: Y = X Omega, orthonormal basis of range(Y) (Gram route when X
    is sparse), reduced data U.T X, then the reduced problem.  Reduction
    and optimization are timed separately.
    """
    if omega.axis is not Axis.SAMPLE:
        raise InvalidInputError("train_nor needs a sample-axis operator")
    t0 = time.perf_counter()
    if is_sparse(X):
        P = projector_fast_sparse(X, omega, rank_tol)
    else:
        P = projector_direct(apply_samples(X, omega), rank_tol)
    if P.is_empty:
        raise TrainingFailedError("sketched range is empty; no subspace to train in")
    Xr = reduce_features(P, X)
    reduce_ms = (time.perf_counter() - t0) * 1e3
    problem = ErmProblem(Xr, labels, loss, lam)
    t1 = time.perf_counter()
    sol = _solve(problem, solver)
    opt_ms = (time.perf_counter() - t1) * 1e3
    extra = {"m": omega.m, "operator": omega.kind.tag, "operator_seed": omega.seed}
    return _finish("nor", problem, sol, projector=P, reduce_ms=reduce_ms,
                   opt_ms=opt_ms, extra=extra)


def train_rp(X, labels, loss: LossSpec, lam: float, a_op: SketchOperator,
             solver: SolverConfig = SolverConfig()) -> TrainedModel:
    """Oblivious baseline: train in the randomly projected feature space."""
    if a_op.axis is not Axis.FEATURE:
        raise InvalidInputError("train_rp needs a feature-axis operator")
    t0 = time.perf_counter()
    Xr = apply_features(a_op, X)
    reduce_ms = (time.perf_counter() - t0) * 1e3
    problem = ErmProblem(Xr, labels, loss, lam)
    t1 = time.perf_counter()
    sol = _solve(problem, solver)
    opt_ms = (time.perf_counter() - t1) * 1e3
    extra = {"m": a_op.m, "operator": a_op.kind.tag, "operator_seed": a_op.seed}
    return _finish("rp", problem, sol, operator=a_op, reduce_ms=reduce_ms,
                   opt_ms=opt_ms, extra=extra)


def train_rpdr(X, labels, loss: LossSpec, lam: float, a_op: SketchOperator,
               solver: SolverConfig = SolverConfig()) -> TrainedModel:
    """Oblivious projection with dual recovery.

    Solves the reduced dual, then maps the dual variables back through
    the original data: ``w = -X alpha / (lam n)``.  Predictions use raw
    features.  Hinge only (recovery needs the dual solution).
    """
    if loss.variant != "hinge":
        raise InvalidInputError("dual recovery requires the hinge loss")
    if a_op.axis is not Axis.FEATURE:
        raise InvalidInputError("train_rpdr needs a feature-axis operator")
    t0 = time.perf_counter()
    Xr = apply_features(a_op, X)
    reduce_ms = (time.perf_counter() - t0) * 1e3
    problem = ErmProblem(Xr, labels, loss, lam)
    t1 = time.perf_counter()
    sol = solve_dual(problem, gap_tol=solver.gap_tol,
                     max_epochs=solver.max_epochs, seed=solver.seed)
    w_rec = -np.asarray(X @ sol.alpha) / (lam * X.shape[1])
    opt_ms = (time.perf_counter() - t1) * 1e3
    rec = replace(sol, weights=w_rec)
    extra = {"m": a_op.m, "operator": a_op.kind.tag, "operator_seed": a_op.seed}
    model = _finish("rpdr", ErmProblem(X, labels, loss, lam), rec,
                    operator=a_op, reduce_ms=reduce_ms, opt_ms=opt_ms,
                    extra=extra)
    return model


# -------------------------------------------------- objective-bound checking

@dataclass(frozen=True)
class ObjectiveBoundCheck:
    """Reduced-vs-full objective comparison.

    ``rhs = F(w_full) + G^2/(2 lam n) * err^2`` must dominate
    ``lhs = F(U v_reduced)`` up to solver tolerance; ``slack = rhs - lhs``.
    """

    lhs: float
    rhs: float
    slack: float
    err2norm: float
    full_obj: float


def objective_bound_check(X, labels, loss: LossSpec, lam: float,
                          omega: SketchOperator, gap_tol: float = 1e-3,
                          solver: Optional[SolverConfig] = None,
                          rank_tol: float = 1e-10) -> ObjectiveBoundCheck:
    """Solve both problems and evaluate the reduction penalty inequality.

    The reduced optimum, mapped back to the original space, can exceed
    the full optimum by at most ``G^2 ||X - P_Y X||_2^2 / (2 lam n)``;
    with gap_tol-approximate solvers the measured slack stays above
    ``-2 * gap_tol``.
    """
    if loss.variant != "hinge":
        raise InvalidInputError("the objective bound check requires the hinge loss")
    solver = solver or SolverConfig(gap_tol=gap_tol)
    solver = replace(solver, gap_tol=gap_tol)
    y = np.asarray(labels, dtype=np.float64)
    full = solve_dual(ErmProblem(X, y, loss, lam), gap_tol=gap_tol,
                      max_epochs=solver.max_epochs, seed=solver.seed)
    model = train_nor(X, y, loss, lam, omega, solver, rank_tol)
    w_hat = model.projector.U_hat @ model.weights
    lhs = objective_F(w_hat, X, y, loss, lam)
    err = approx_error(X, model.projector).value
    G = loss.lipschitz
    rhs = full.primal_obj + G * G / (2.0 * lam * X.shape[1]) * err * err
    return ObjectiveBoundCheck(lhs=lhs, rhs=rhs, slack=rhs - lhs,
                               err2norm=err, full_obj=full.primal_obj)


# -------------------------------------------------------------------- metrics

def error_rate(scores, labels) -> float:
    """Misclassification fraction; binary scores use sign(0) -> +1."""
    scores = np.asarray(scores)
    labels = np.asarray(labels)
    if scores.ndim == 1:
        preds = np.where(scores >= 0.0, 1.0, -1.0)
        return float(np.mean(preds != labels.astype(np.float64)))
    preds = np.argmax(scores, axis=0)
    return float(np.mean(preds != labels))


def auprc(scores, labels) -> float:
    """Area under the precision-recall curve by exact step integration.

    Thresholds sweep the distinct score values in decreasing order (tied
    scores form a single operating point); the area is the sum of
    precision times recall increment.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    if scores.shape != y.shape:
        raise InvalidInputError("scores and labels must have equal length")
    pos_total = int(np.sum(y > 0))
    if pos_total == 0 or pos_total == y.size:
        raise UndefinedMetricError("auprc needs both classes in the test set")
    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    y_sorted = y[order]
    area = 0.0
    prev_recall = 0.0
    tp = 0
    fp = 0
    i = 0
    n = y.size
    while i < n:
        j = i
        while j < n and s_sorted[j] == s_sorted[i]:
            j += 1
        tp += int(np.sum(y_sorted[i:j] > 0))
        fp += (j - i) - int(np.sum(y_sorted[i:j] > 0))
        recall = tp / pos_total
        precision = tp / (tp + fp)
        area += (recall - prev_recall) * precision
        prev_recall = recall
        i = j
    return float(area)


def evaluate(model: TrainedModel, X_test, labels_test, metric: str) -> float:
    """Score a trained model on raw-feature test data."""
    scores = model.decision_function(X_test)
    if metric == "error_rate":
        return error_rate(scores, labels_test)
    if metric == "auprc":
        if scores.ndim != 1:
            raise UndefinedMetricError("auprc is defined for binary scores only")
        return auprc(scores, labels_test)
    raise InvalidInputError(f"unknown metric {metric!r}")


# -------------------------------------------------------------- persistence

def save_model(model: TrainedModel, path) -> None:
    """Write a model as an npz archive (exact float64 round trip)."""
    header = {
        "mode": model.mode,
        "loss": model.loss.variant,
        "lam": model.lam,
        "meta": model.meta,
    }
    arrays = {"weights": model.weights}
    if model.projector is not None:
        arrays["proj_U"] = model.projector.U_hat
        arrays["proj_sigma"] = model.projector.sigma_hat
        header["proj_source"] = model.projector.source
    if model.operator is not None:
        if model.operator.seed >= 0:
            header["operator_config"] = operator_config(model.operator)
        else:
            arrays["op_indices"] = model.operator.indices
            header["op_in_dim"] = model.operator.in_dim
            header["op_axis"] = model.operator.axis.value
    if model.classes is not None:
        arrays["classes"] = model.classes
    arrays["header"] = np.frombuffer(
        json.dumps(header, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    np.savez(path, **arrays)


def load_model(path) -> TrainedModel:
    """Inverse of :func:`save_model`."""
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(bytes(z["header"].tobytes()).decode("utf-8"))
        weights = z["weights"]
        projector = None
        if "proj_U" in z:
            projector = SubspaceProjector(z["proj_U"], z["proj_sigma"],
                                          header.get("proj_source", "direct_svd"))
        operator = None
        if "operator_config" in header:
            operator = operator_from_config(header["operator_config"])
        elif "op_indices" in z:
            operator = selection_operator(z["op_indices"], header["op_in_dim"],
                                          header["op_axis"])
        classes = z["classes"] if "classes" in z else None
    return TrainedModel(mode=header["mode"], loss=LossSpec(header["loss"]),
                        lam=float(header["lam"]), weights=weights,
                        projector=projector, operator=operator,
                        classes=classes, meta=header.get("meta", {}))
