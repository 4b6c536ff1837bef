"""Executable verification suites behind the ``check`` and ``gradcheck``
commands; the acceptance tests reuse them.

Each suite draws seeded random instances, measures the worst violation of
the property it targets, and reports pass/fail against the property's
tolerance: filter telescoping to the identity, two-sided frame energy
bounds, permutation equivariance/invariance of both the fixed and trainable
transforms, and agreement of reverse-mode gradients with central
differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import BatchNormState, Tape, backward, finite_diff_check
from .data import random_graph
from .filterbank import ScaleSequence, build_bank, frame_certificate, response_stack
from .graph import Graph, lazy_diffusion, permute_nodes
from .heads import init_fcn, init_rbf
from .learnable import SelectionParams, input_stack, legs_forward, legs_forward_node
from .scattering import ScatterConfig, scatter_features
from .train import Standardizer

__all__ = [
    "CheckResult",
    "max_rel_diff",
    "random_scales",
    "telescoping_check",
    "frame_check",
    "permutation_check",
    "gradcheck_pipeline",
    "gradcheck_primitives",
]

TELESCOPE_TOL = 1e-10
EQUIVARIANCE_TOL = 1e-10
INVARIANCE_TOL = 1e-9
GRAD_TOL = 1e-4


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail}"


def max_rel_diff(a: np.ndarray, b: np.ndarray) -> float:
    """Infinity-norm difference relative to the larger infinity norm."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0), 1e-300)
    return float(np.max(np.abs(a - b), initial=0.0) / scale)


def random_scales(rng, max_len: int = 5, max_step: int = 24) -> ScaleSequence:
    """Strictly increasing integer scales with bounded top step."""
    j = int(rng.integers(1, max_len + 1))
    steps = rng.choice(np.arange(1, max_step + 1), size=j, replace=False)
    return ScaleSequence(tuple(int(t) for t in np.sort(steps)))


def telescoping_check(g: Graph, scales: ScaleSequence, trials: int = 20,
                      seed: int = 0) -> CheckResult:
    """Summed filter responses must reconstruct the input signal."""
    bank = build_bank(lazy_diffusion(g), scales)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal(g.n)
        recon = response_stack(bank, x).sum(axis=0)
        worst = max(worst, float(np.max(np.abs(recon - x))))
    return CheckResult(
        name="telescoping",
        passed=worst < TELESCOPE_TOL,
        worst=worst,
        detail=f"worst |sum - x|_inf = {worst:.3e} over {trials} signals (tol {TELESCOPE_TOL:.0e})",
    )


def frame_check(g: Graph, scales: ScaleSequence, trials: int = 100,
                seed: int = 0) -> CheckResult:
    """Two-sided energy bounds with the analytic lower constant."""
    cert = frame_certificate(g, scales, trials, seed=seed)
    lower_margin = np.min(cert.bank_energy - cert.constant * cert.signal_energy)
    upper_margin = np.min(cert.signal_energy - cert.bank_energy)
    return CheckResult(
        name="frame-bounds",
        passed=cert.passed,
        worst=float(-min(lower_margin, upper_margin)),
        detail=(
            f"C = {cert.constant:.6f}, worst lower margin {lower_margin:.3e}, "
            f"worst upper margin {upper_margin:.3e} over {trials} signals"
        ),
    )


def permutation_check(g: Graph, trials: int = 20, seed: int = 0,
                      cfg: ScatterConfig | None = None) -> CheckResult:
    """Node-level equivariance and graph-level invariance under relabelling,
    for the fixed transform and for the trainable one at random logits."""
    cfg = cfg or ScatterConfig(J=3)
    rng = np.random.default_rng(seed)
    bank = build_bank(lazy_diffusion(g), ScaleSequence(tuple(2**j for j in range(cfg.J))))
    theta = rng.standard_normal((cfg.J, 8))
    params = SelectionParams(theta)
    x = rng.standard_normal((g.n, 2))
    fixed_feats = scatter_features(g, x, cfg)
    legs_feats = legs_forward(g, x, params, cfg)
    responses = response_stack(bank, x)

    worst_equiv = 0.0
    worst_inv = 0.0
    for _ in range(trials):
        pi = rng.permutation(g.n)
        gp = permute_nodes(g, pi)
        xp = np.empty_like(x)
        xp[pi] = x
        resp_p = response_stack(build_bank(lazy_diffusion(gp), bank.scales), xp)
        expected = np.empty_like(responses)
        expected[:, pi] = responses
        worst_equiv = max(worst_equiv, float(np.max(np.abs(resp_p - expected))))
        worst_inv = max(worst_inv, max_rel_diff(scatter_features(gp, xp, cfg).values,
                                                fixed_feats.values))
        worst_inv = max(worst_inv, max_rel_diff(legs_forward(gp, xp, params, cfg).values,
                                                legs_feats.values))
    passed = worst_equiv < EQUIVARIANCE_TOL and worst_inv < INVARIANCE_TOL
    return CheckResult(
        name="permutation",
        passed=passed,
        worst=max(worst_equiv, worst_inv),
        detail=(
            f"equivariance {worst_equiv:.3e} (tol {EQUIVARIANCE_TOL:.0e}), "
            f"invariance {worst_inv:.3e} rel (tol {INVARIANCE_TOL:.0e}) over {trials} relabellings"
        ),
    )


def _pipeline_fixture(seed: int, head_kind: str, task: str):
    """A small end-to-end objective: batch of graphs -> features -> head -> loss."""
    rng = np.random.default_rng(seed)
    cfg = ScatterConfig(J=4, q_list=(1, 2, 3))
    m_steps = 8
    graphs = [random_graph(int(rng.integers(8, 14)), seed=seed + 17 * k, edge_prob=0.35)
              for k in range(4)]
    prepared = []
    for g in graphs:
        x = rng.standard_normal((g.n, 2))
        op = lazy_diffusion(g)
        prepared.append((g, x, op, input_stack(op, x, m_steps)))
    labels = np.asarray([0, 1, 0, 1])

    targets = rng.standard_normal((len(graphs), 1))
    theta0 = rng.standard_normal((cfg.J, m_steps))
    init_rows = []
    for g, x, op, base in prepared:
        tape = Tape()
        node, _ = legs_forward_node(tape, g, x, tape.constant(theta0), cfg,
                                    base=base, operator=op)
        init_rows.append(node.value)
    standardizer = Standardizer.fit(np.asarray(init_rows))

    out_dim = 2 if task == "classify" else 1
    dim = len(init_rows[0])
    if head_kind == "fcn":
        head = init_fcn(dim, out_dim, hidden=8, seed=seed)
    else:
        head = init_rbf(standardizer.transform(np.asarray(init_rows)), 3, out_dim, seed=seed)
    point = {"theta": theta0, **{k: v.copy() for k, v in head.param_arrays().items()}}

    def fn(params, want_grad):
        tape = Tape()
        theta = tape.parameter("theta", params["theta"])
        nodes = {name: tape.parameter(name, params[name]) for name in head.param_arrays()}
        rows = []
        for g, x, op, base in prepared:
            node, _ = legs_forward_node(tape, g, x, theta, cfg, base=base, operator=op)
            rows.append(tape.reshape(node, (1, -1)))
        feats = standardizer.apply(tape, tape.concat(rows, axis=0))
        if head_kind == "rbf":
            out = head.forward(tape, feats, nodes, training=True, update_stats=False)
        else:
            out = head.forward(tape, feats, nodes, training=True)
        if task == "classify":
            loss = tape.cross_entropy(out, labels)
        else:
            loss = tape.mse(out, targets)
        if want_grad:
            grads = backward(tape, loss)
            return float(loss.value), grads.by_name
        return float(loss.value), None

    return fn, point


def gradcheck_pipeline(seed: int = 0, points: int = 10, eps: float = 1e-6) -> CheckResult:
    """Central-difference validation of the full trainable pipeline at
    ``points`` random parameter draws, cycling head and loss variants."""
    variants = [("fcn", "classify"), ("rbf", "classify"), ("fcn", "regress")]
    worst = 0.0
    for k in range(points):
        head_kind, task = variants[k % len(variants)]
        fn, point = _pipeline_fixture(seed + 101 * k, head_kind, task)
        err = finite_diff_check(fn, point, eps=eps, seed=seed + k)
        worst = max(worst, err)
    return CheckResult(
        name="gradcheck-pipeline",
        passed=worst < GRAD_TOL,
        worst=worst,
        detail=f"max relative error {worst:.3e} over {points} parameter points (tol {GRAD_TOL:.0e})",
    )


def gradcheck_primitives(seed: int = 0, eps: float = 1e-6) -> CheckResult:
    """Per-primitive agreement with central differences, each op in isolation."""
    rng = np.random.default_rng(seed)
    worst = 0.0

    def check(name, build, point):
        nonlocal worst

        def fn(params, want_grad):
            tape = Tape()
            nodes = {k: tape.parameter(k, v) for k, v in params.items()}
            out = build(tape, nodes)
            loss = out if out.value.ndim == 0 else tape.sum(out)
            if want_grad:
                return float(loss.value), backward(tape, loss).by_name
            return float(loss.value), None

        err = finite_diff_check(fn, point, eps=eps, seed=seed)
        worst = max(worst, err)

    g = random_graph(9, seed=seed, edge_prob=0.4)
    op = lazy_diffusion(g)
    base = input_stack(op, rng.standard_normal((9, 2)), 6)
    f0 = rng.standard_normal((3, 6))
    # squared outputs: a plain sum would telescope to a constant in f
    check("select_combine",
          lambda t, n: t.powi(t.select_combine(t.constant(base), n["f"], np.arange(3)), 2),
          {"f": f0})
    check("diffuse",
          lambda t, n: t.diffuse(n["x"], op, 5),
          {"x": rng.standard_normal((9, 2))})
    check("abs", lambda t, n: t.abs(n["x"]), {"x": rng.standard_normal(7) + 0.5})
    check("powi", lambda t, n: t.powi(n["x"], 3), {"x": rng.standard_normal(7)})
    check("softmax", lambda t, n: t.powi(t.softmax(n["x"], axis=-1), 2),
          {"x": rng.standard_normal((3, 5))})
    check("relu", lambda t, n: t.relu(n["x"]), {"x": rng.standard_normal(9) + 0.3})
    check("affine", lambda t, n: t.affine(n["x"], n["w"], n["b"]),
          {"x": rng.standard_normal((4, 3)), "w": rng.standard_normal((3, 2)),
           "b": rng.standard_normal(2)})
    state = BatchNormState.from_batch(rng.standard_normal((6, 3)))
    # random per-entry weights: symmetric losses of normalised values are
    # nearly x-independent and starve the finite differences of signal
    bn_weights = rng.standard_normal((6, 3))
    check("batchnorm",
          lambda t, n: t.scale_shift(t.batchnorm(n["x"], n["g"], n["b"], state, training=True,
                                                 update_stats=False), bn_weights, 0.0),
          {"x": rng.standard_normal((6, 3)), "g": rng.uniform(0.5, 1.5, 3),
           "b": rng.standard_normal(3)})
    check("rbf", lambda t, n: t.rbf(n["x"], n["c"]),
          {"x": rng.standard_normal((4, 3)), "c": rng.standard_normal((2, 3))})
    check("cross_entropy",
          lambda t, n: t.cross_entropy(n["x"], np.array([0, 1, 2])),
          {"x": rng.standard_normal((3, 3))})
    check("mse", lambda t, n: t.mse(n["x"], rng.standard_normal((4, 2))),
          {"x": rng.standard_normal((4, 2))})
    return CheckResult(
        name="gradcheck-primitives",
        passed=worst < 1e-6,
        worst=worst,
        detail=f"max relative error {worst:.3e} across primitives (tol 1e-06)",
    )
