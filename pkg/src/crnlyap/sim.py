"""Numerical integration of ẋ = Γ R(x) and certificate monitoring.

Floating point lives here only.  The integrator is an embedded Dormand-Prince
5(4) pair with dense output; a step that would push any state below -1e-10
is rejected and the step size halved, so conservation laws are never broken
by clipping.
"""

from __future__ import annotations

import ast
import csv
import math
import operator
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .certificate import PwlrCertificate, evaluate_float
from .network import ReactionNetwork, conservation_laws

NEG_TOL = 1e-10

# Dormand-Prince 5(4) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# continuous extension, quartic in the normalized step fraction
_P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)


class KineticsError(ValueError):
    pass


class IntegrationError(RuntimeError):
    pass


# --- kinetics ------------------------------------------------------------------------

def _alpha(net: ReactionNetwork) -> np.ndarray:
    return np.array(net.alpha, dtype=float)


def _per_reaction(values, nu: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape == ():
        arr = np.full(nu, float(arr))
    if arr.shape != (nu,):
        raise KineticsError(f"{name} needs {nu} entries, got {arr.size}")
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise KineticsError(f"{name} must be positive and finite")
    return arr


def _per_pair(values, n: int, nu: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape == ():
        arr = np.full((n, nu), float(arr))
    if arr.shape != (n, nu):
        raise KineticsError(f"{name} must be a scalar or an {n}x{nu} matrix")
    if np.any(arr <= 0):
        raise KineticsError(f"{name} must be positive")
    return arr


class Kinetics:
    """Rate law R(x) for a fixed network; subclasses implement ``rates``."""

    name = "kinetics"

    def __init__(self, net: ReactionNetwork):
        self.net = net
        self.alpha = _alpha(net)

    def rates(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def validate(self, points: int = 20, seed: int = 0, tol: float = 1e-6) -> None:
        """Probe A1-A3 at random positive points; raise KineticsError on violation."""
        net = self.net
        rng = np.random.default_rng(seed)
        for _ in range(points):
            x = rng.uniform(0.1, 5.0, size=net.n)
            r = self.rates(x)
            if np.any(r < 0) or not np.all(np.isfinite(r)):
                raise KineticsError(f"{self.name}: negative or non-finite rate at {x}")
            for i in range(net.n):
                step = 1e-6 * max(1.0, x[i])
                xp, xm = x.copy(), x.copy()
                xp[i] += step
                xm[i] -= step
                d = (self.rates(xp) - self.rates(xm)) / (2 * step)
                scale = np.maximum(1.0, np.abs(r))
                for j in range(net.nu):
                    if self.alpha[i, j] > 0:
                        if d[j] < -tol * scale[j]:
                            raise KineticsError(f"{self.name}: ∂R{j + 1}/∂{net.species[i]} < 0")
                    elif abs(d[j]) > tol * scale[j]:
                        raise KineticsError(f"{self.name}: R{j + 1} depends on non-reactant {net.species[i]}")
            for i in range(net.n):
                x0 = x.copy()
                x0[i] = 0.0
                r0 = self.rates(x0)
                for j in range(net.nu):
                    if self.alpha[i, j] > 0 and abs(r0[j]) > tol:
                        raise KineticsError(f"{self.name}: R{j + 1} is nonzero with {net.species[i]} = 0")


class MassAction(Kinetics):
    name = "mass-action"

    def __init__(self, net: ReactionNetwork, k):
        super().__init__(net)
        self.k = _per_reaction(k, net.nu, "k")

    def rates(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return self.k * np.prod(np.power(x[:, None], self.alpha), axis=0)


class MichaelisMenten(Kinetics):
    """R_j = k_j Π_i (x_i / (a_ij + x_i))^α_ij."""

    name = "michaelis-menten"

    def __init__(self, net: ReactionNetwork, k, a=1.0):
        super().__init__(net)
        self.k = _per_reaction(k, net.nu, "k")
        self.a = _per_pair(a, net.n, net.nu, "a")

    def rates(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)[:, None]
        sat = x / (self.a + x)
        return self.k * np.prod(np.power(sat, self.alpha), axis=0)


class Hill(Kinetics):
    """R_j = k_j Π_i (x_i^h / (a_ij + x_i^h))^α_ij."""

    name = "hill"

    def __init__(self, net: ReactionNetwork, k, a=1.0, h=2.0):
        super().__init__(net)
        self.k = _per_reaction(k, net.nu, "k")
        self.a = _per_pair(a, net.n, net.nu, "a")
        self.h = float(h)
        if self.h <= 0:
            raise KineticsError("Hill exponent must be positive")

    def rates(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)[:, None] ** self.h
        sat = x / (self.a + x)
        return self.k * np.prod(np.power(sat, self.alpha), axis=0)


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}
_FUNCS = {"exp": math.exp, "log": math.log, "sqrt": math.sqrt, "min": min, "max": max}


def _compile(expr: str, names: Sequence[str]) -> Callable[[dict], float]:
    """Arithmetic over species names and numbers; nothing else is allowed."""
    tree = ast.parse(expr, mode="eval")
    allowed = set(names)

    def check(node):
        if isinstance(node, ast.Expression):
            check(node.body)
        elif isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            check(node.left)
            check(node.right)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
            check(node.operand)
        elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            pass
        elif isinstance(node, ast.Name) and node.id in allowed:
            pass
        elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and not node.keywords:
            for a in node.args:
                check(a)
        else:
            raise KineticsError(f"unsupported expression element in {expr!r}")

    check(tree)

    def ev(node, env):
        if isinstance(node, ast.Expression):
            return ev(node.body, env)
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](ev(node.left, env), ev(node.right, env))
        if isinstance(node, ast.UnaryOp):
            v = ev(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return env[node.id]
        return _FUNCS[node.func.id](*(ev(a, env) for a in node.args))

    return lambda env: float(ev(tree, env))


class Tabulated(Kinetics):
    """One arithmetic expression per reaction over species names."""

    name = "tabulated"

    def __init__(self, net: ReactionNetwork, expressions: Sequence[str]):
        super().__init__(net)
        if len(expressions) != net.nu:
            raise KineticsError(f"need {net.nu} rate expressions, got {len(expressions)}")
        self.expressions = list(expressions)
        self._fns = [_compile(e, net.species) for e in expressions]

    def rates(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        env = dict(zip(self.net.species, x))
        try:
            return np.array([f(env) for f in self._fns])
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise KineticsError(f"rate expression failed at {x}: {exc}") from exc


# --- integrator ------------------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    species: tuple
    conservation: np.ndarray
    V_values: dict = field(default_factory=dict)
    steps: int = 0
    rejected: int = 0

    @property
    def conserved(self) -> np.ndarray:
        if self.conservation.size == 0:
            return np.zeros((len(self.times), 0))
        return self.states @ self.conservation.T


def _rms(v):
    return float(np.sqrt(np.mean(v * v))) if v.size else 0.0


def integrate(
    net: ReactionNetwork,
    kinetics: Kinetics,
    x0: Sequence[float],
    t_end: float,
    samples: Optional[Sequence[float]] = None,
    n_samples: int = 201,
    rtol: float = 1e-7,
    atol: float = 1e-9,
    max_steps: int = 1_000_000,
    validate: bool = True,
) -> Trajectory:
    """Adaptive Dormand-Prince integration with dense output at ``samples``."""
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (net.n,):
        raise ValueError(f"x0 needs {net.n} entries")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError("x0 must be nonnegative and finite")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if validate and net.nu:
        kinetics.validate()
    G = np.array(net.gamma, dtype=float).reshape(net.n, net.nu)
    laws = conservation_laws(net.gamma, net.n).basis
    D = np.array([[float(v) for v in d] for d in laws]) if laws else np.zeros((0, net.n))
    ts = np.linspace(0.0, t_end, n_samples) if samples is None else np.asarray(samples, dtype=float)
    if np.any(np.diff(ts) < 0) or ts[0] < 0 or ts[-1] > t_end:
        raise ValueError("sample times must be sorted within [0, t_end]")

    def f(state):
        if net.nu == 0:
            return np.zeros(net.n)
        return G @ kinetics.rates(state)

    out = np.empty((len(ts), net.n))
    si = 0
    while si < len(ts) and ts[si] <= 0.0:
        out[si] = x
        si += 1

    t = 0.0
    fx = f(x)
    scale = atol + rtol * np.abs(x)
    d0, d1 = _rms(x / scale), _rms(fx / scale)
    h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h = min(h, t_end)
    steps = rejected = 0
    K = np.empty((7, net.n))
    while si < len(ts):
        if steps + rejected > max_steps:
            raise IntegrationError(f"step budget exhausted at t={t:.6g}; max|x|={np.max(np.abs(x)):.3g}")
        if h < 1e-14 * max(1.0, abs(t)):
            raise IntegrationError(f"step size underflow at t={t:.6g}; max|x|={np.max(np.abs(x)):.3g}")
        h = min(h, t_end - t)
        K[0] = fx
        for s in range(1, 6):
            K[s] = f(x + h * (np.asarray(_A[s]) @ K[:s]))
        x_new = x + h * (_B @ K[:6])
        if not np.all(np.isfinite(x_new)):
            rejected += 1
            h *= 0.5
            continue
        if np.any(x_new < -NEG_TOL):
            rejected += 1
            h *= 0.5
            continue
        K[6] = f(x_new)
        err = h * (_E @ K)
        sc = atol + rtol * np.maximum(np.abs(x), np.abs(x_new))
        en = _rms(err / sc)
        if en > 1.0:
            rejected += 1
            h *= max(0.2, 0.9 * en ** -0.2)
            continue
        steps += 1
        t_new = t + h
        Q = K.T @ _P
        while si < len(ts) and ts[si] <= t_new:
            th = (ts[si] - t) / h
            out[si] = x + h * (Q @ np.array([th, th * th, th**3, th**4]))
            si += 1
        t, x, fx = t_new, x_new, K[6].copy()
        h *= min(10.0, 0.9 * en ** -0.2) if en > 0 else 10.0
    return Trajectory(ts, out, tuple(net.species), D, steps=steps, rejected=rejected)


# --- monitoring ---------------------------------------------------------------------------

@dataclass
class MonitorResult:
    passed: bool
    values: np.ndarray
    max_increase: float
    worst_index: int
    dini: np.ndarray

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_increase_normalized": self.max_increase,
            "worst_index": self.worst_index,
            "max_dini_estimate": float(np.max(self.dini)) if self.dini.size else 0.0,
        }


def certificate_values(traj: Trajectory, kinetics: Kinetics, cert: PwlrCertificate) -> np.ndarray:
    if cert.nu != kinetics.net.nu:
        raise ValueError("certificate and network have different reaction counts")
    return np.array([evaluate_float(cert, kinetics.rates(x)) for x in traj.states])


def _dini(cert: PwlrCertificate, kinetics: Kinetics, x: np.ndarray) -> float:
    """max over active rows of c_k Ṙ, with Ṙ = ∂R/∂x · Γ R by central differences."""
    net = kinetics.net
    G = np.array(net.gamma, dtype=float).reshape(net.n, net.nu)
    r = kinetics.rates(x)
    xdot = G @ r
    eps = 1e-7 * max(1.0, float(np.max(np.abs(x))))
    rdot = (kinetics.rates(x + eps * xdot) - kinetics.rates(x - eps * xdot)) / (2 * eps)
    rows = [np.array([float(v) for v in cert.signed_row(k)]) for k in range(cert.m)]
    vals = [c @ r for c in rows]
    top = max(vals)
    tol = 1e-9 * max(1.0, abs(top))
    return max(float(c @ rdot) for c, v in zip(rows, vals) if v >= top - tol)


def monitor_certificate(traj: Trajectory, kinetics: Kinetics, cert: PwlrCertificate, tol: float = 1e-7, dini: bool = True) -> MonitorResult:
    """V(t_{i+1}) <= V(t_i) + tol·max(1, V(t_0)) at every sample."""
    V = certificate_values(traj, kinetics, cert)
    bound = tol * max(1.0, float(V[0])) if V.size else tol
    inc = np.diff(V)
    worst = int(np.argmax(inc)) if inc.size else 0
    max_inc = float(inc[worst]) if inc.size else 0.0
    norm = max_inc / max(1.0, float(np.max(V))) if V.size else 0.0
    passed = bool(np.all(inc <= bound)) if inc.size else True
    d = np.array([_dini(cert, kinetics, x) for x in traj.states]) if dini and cert.is_convex else np.zeros(0)
    traj.V_values["V"] = V
    return MonitorResult(passed, V, norm, worst, d)


def equilibrium_time(traj: Trajectory, kinetics: Kinetics, tol: float = 1e-9, sustain: int = 10) -> Optional[float]:
    """First sample time from which ‖ΓR‖∞ < tol(1 + ‖R‖∞) holds for ``sustain`` samples."""
    net = kinetics.net
    if net.nu == 0:
        return float(traj.times[0])
    G = np.array(net.gamma, dtype=float)
    run = 0
    for i, x in enumerate(traj.states):
        r = kinetics.rates(x)
        if np.max(np.abs(G @ r)) < tol * (1 + np.max(np.abs(r))):
            run += 1
            if run >= sustain:
                return float(traj.times[i - sustain + 1])
        else:
            run = 0
    return None


def conservation_drift(traj: Trajectory) -> float:
    """max_t |dᵀx(t) - dᵀx0| / (1 + |dᵀx0|) over the conservation basis."""
    c = traj.conserved
    if c.shape[1] == 0:
        return 0.0
    return float(np.max(np.abs(c - c[0]) / (1 + np.abs(c[0]))))


def consensus_check(traj: Trajectory, F: Callable[[np.ndarray], np.ndarray], tol: float = 1e-6, weights: Optional[Sequence[float]] = None) -> bool:
    """max_i F_i(x_i(t_end)) - min_i F_i(x_i(t_end)) < tol.

    ``weights`` rescales node values first, for networks whose Laplacian
    columns were scaled to clear denominators.
    """
    x = traj.states[-1]
    vals = np.asarray(F(x), dtype=float)
    if weights is not None:
        vals = vals * np.asarray(weights, dtype=float)
    if vals.size <= 1:
        return True
    return bool(np.max(vals) - np.min(vals) < tol)


def write_csv(path, traj: Trajectory, V: Optional[np.ndarray] = None) -> None:
    """Header ``t,<species>,V,conserved_1..``; 17 significant digits."""
    cons = traj.conserved
    header = ["t"] + list(traj.species)
    if V is not None:
        header.append("V")
    header += [f"conserved_{k + 1}" for k in range(cons.shape[1])]

    def g(v):
        return format(float(v), ".17g")

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, t in enumerate(traj.times):
            row = [g(t)] + [g(v) for v in traj.states[i]]
            if V is not None:
                row.append(g(V[i]))
            row += [g(v) for v in cons[i]]
            w.writerow(row)
