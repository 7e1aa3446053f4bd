"""RBF-kernel SVM trained with sequential minimal optimization, one-vs-rest.

Follows Platt's SMO: working pairs chosen by the max |E1 - E2| heuristic
with deterministic fallback sweeps, alternating full passes and non-bound
passes until no multiplier moves.  On exit every sample satisfies the KKT
conditions within tol.  Multi-class decisions softmax the per-class margins.
"""

from __future__ import annotations

from typing import Dict

import numpy as np

from ..errors import TrainingError

STEP_EPS = 1e-8  # minimum multiplier movement that counts as progress


def _rbf_gamma(x: np.ndarray) -> float:
    var = float(x.var())
    if var <= 1e-12:
        var = 1.0
    return 1.0 / (x.shape[1] * var)


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    aa = (a * a).sum(axis=1)[:, None]
    bb = (b * b).sum(axis=1)[None, :]
    sq = np.maximum(aa + bb - 2.0 * (a @ b.T), 0.0)
    return np.exp(-gamma * sq)


class _BinarySMO:
    def __init__(self, kmat: np.ndarray, y: np.ndarray, c: float, tol: float, budget: list):
        self.k = kmat
        self.y = y.astype(np.float64)
        self.c = c
        self.tol = tol
        self.n = len(y)
        self.alpha = np.zeros(self.n)
        self.b = 0.0
        # f(x_i) = sum_j alpha_j y_j K(i, j) + b; with alpha = 0 this is just b
        self.errors = np.full(self.n, self.b) - self.y
        self.budget = budget  # shared mutable step counter [remaining]

    def _f(self, i: int) -> float:
        return float((self.alpha * self.y) @ self.k[i] + self.b)

    def _take_step(self, i1: int, i2: int) -> bool:
        if i1 == i2:
            return False
        a1, a2 = self.alpha[i1], self.alpha[i2]
        y1, y2 = self.y[i1], self.y[i2]
        e1, e2 = self.errors[i1], self.errors[i2]
        s = y1 * y2
        if s > 0:
            lo, hi = max(0.0, a1 + a2 - self.c), min(self.c, a1 + a2)
        else:
            lo, hi = max(0.0, a2 - a1), min(self.c, self.c + a2 - a1)
        if lo >= hi:
            return False
        k11, k12, k22 = self.k[i1, i1], self.k[i1, i2], self.k[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0:
            a2_new = a2 + y2 * (e1 - e2) / eta
            a2_new = min(max(a2_new, lo), hi)
        else:
            # evaluate the objective at both clip ends (Platt's formulas written
            # for the f = sum alpha y K + b sign convention)
            f1 = y1 * (e1 - self.b) - a1 * k11 - s * a2 * k12
            f2 = y2 * (e2 - self.b) - s * a1 * k12 - a2 * k22
            l1 = a1 + s * (a2 - lo)
            h1 = a1 + s * (a2 - hi)
            obj_lo = l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 + s * lo * l1 * k12
            obj_hi = h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 + s * hi * h1 * k12
            if obj_lo < obj_hi - STEP_EPS:
                a2_new = lo
            elif obj_lo > obj_hi + STEP_EPS:
                a2_new = hi
            else:
                return False
        if abs(a2_new - a2) < STEP_EPS * (a2_new + a2 + STEP_EPS):
            return False
        a1_new = a1 + s * (a2 - a2_new)
        # a2_new lands on its bound exactly via the clip above; a1_new only
        # gets there through float arithmetic, so snap the dust to the bound
        # or phantom near-zero multipliers linger as support vectors
        if a1_new < STEP_EPS * self.c:
            a1_new = 0.0
        elif a1_new > (1.0 - STEP_EPS) * self.c:
            a1_new = self.c
        b1 = self.b - e1 - y1 * (a1_new - a1) * k11 - y2 * (a2_new - a2) * k12
        b2 = self.b - e2 - y1 * (a1_new - a1) * k12 - y2 * (a2_new - a2) * k22
        if 0.0 < a1_new < self.c:
            b_new = b1
        elif 0.0 < a2_new < self.c:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        self.errors += (
            y1 * (a1_new - a1) * self.k[i1]
            + y2 * (a2_new - a2) * self.k[i2]
            + (b_new - self.b)
        )
        self.alpha[i1], self.alpha[i2] = a1_new, a2_new
        self.b = b_new
        self.errors[i1] = self._f(i1) - y1
        self.errors[i2] = self._f(i2) - y2
        self.budget[0] -= 1
        if self.budget[0] <= 0:
            raise TrainingError("SMO exceeded the optimization step budget without converging")
        return True

    def _examine(self, i2: int) -> bool:
        y2 = self.y[i2]
        a2 = self.alpha[i2]
        e2 = self.errors[i2]
        r2 = e2 * y2
        if (r2 < -self.tol and a2 < self.c) or (r2 > self.tol and a2 > 0.0):
            non_bound = np.flatnonzero((self.alpha > 0.0) & (self.alpha < self.c))
            if len(non_bound) > 1:
                gaps = np.abs(self.errors[non_bound] - e2)
                i1 = int(non_bound[np.argmax(gaps)])  # argmax: first max, lowest index
                if self._take_step(i1, i2):
                    return True
            for i1 in non_bound:
                if self._take_step(int(i1), i2):
                    return True
            for i1 in range(self.n):
                if self._take_step(i1, i2):
                    return True
        return False

    def solve(self) -> None:
        examine_all = True
        changed = 0
        while changed > 0 or examine_all:
            changed = 0
            if examine_all:
                for i in range(self.n):
                    changed += self._examine(i)
            else:
                for i in np.flatnonzero((self.alpha > 0.0) & (self.alpha < self.c)):
                    changed += self._examine(int(i))
            if examine_all:
                examine_all = False
            elif changed == 0:
                examine_all = True


def fit(spec: Dict, x: np.ndarray, y: np.ndarray, n_classes: int, seed: int) -> Dict:
    c, tol = float(spec["c"]), float(spec["tol"])
    gamma = _rbf_gamma(x)
    kmat = rbf_kernel(x, x, gamma)
    budget = [int(spec["max_steps"])]
    machines = []
    for cls in range(n_classes):
        y_pm = np.where(y == cls, 1.0, -1.0)
        smo = _BinarySMO(kmat, y_pm, c, tol, budget)
        smo.solve()
        sv = np.flatnonzero(smo.alpha > 0.0)
        machines.append({
            "class_id": cls,
            "dual_coef": (smo.alpha[sv] * y_pm[sv]),
            "support_x": x[sv].copy(),
            "bias": smo.b,
            "n_support": len(sv),
        })
    return {"gamma": gamma, "machines": machines}


def decision_margins(params: Dict, x: np.ndarray, n_classes: int) -> np.ndarray:
    gamma = float(params["gamma"])
    out = np.empty((len(x), n_classes))
    for m in params["machines"]:
        cls = int(m["class_id"])
        sx = np.asarray(m["support_x"], dtype=np.float64)
        coef = np.asarray(m["dual_coef"], dtype=np.float64)
        if len(coef) == 0:
            out[:, cls] = float(m["bias"])
        else:
            out[:, cls] = rbf_kernel(x, sx, gamma) @ coef + float(m["bias"])
    return out


def score(params: Dict, x: np.ndarray, n_classes: int, hyper: Dict) -> np.ndarray:
    from .logistic import softmax

    return softmax(decision_margins(params, x, n_classes))
