"""Estimation-error metrics and three-way component classification."""

from dataclasses import dataclass

import numpy as np

from .model import check_loss

ISE_GRID_SIZE = 1000


@dataclass(frozen=True)
class ComponentLabel:
    """Posterior probabilities of the three effect types plus the argmax label."""

    label: str
    p_nonlinear: float
    p_linear: float
    p_zero: float

    def __post_init__(self):
        total = self.p_nonlinear + self.p_linear + self.p_zero
        if min(self.p_nonlinear, self.p_linear, self.p_zero) < 0 or abs(total - 1.0) > 1e-9:
            raise ValueError("label probabilities must be nonnegative and sum to 1")


def ise(f_hat, f_true):
    """Mean squared discrepancy between two curves on a shared grid."""
    f_hat = np.asarray(f_hat, dtype=float)
    f_true = np.asarray(f_true, dtype=float)
    if f_hat.shape != f_true.shape or f_hat.size == 0:
        raise ValueError("curve grids must be nonempty and aligned")
    d = f_hat - f_true
    return float(np.mean(d * d))


def ise_grid(n_points=ISE_GRID_SIZE):
    """Equally spaced evaluation grid on [0, 1]."""
    return np.linspace(0.0, 1.0, n_points)


def test_errors(y_hat, y):
    """(root mean squared error, mean absolute deviation) of predictions."""
    y_hat = np.asarray(y_hat, dtype=float)
    y = np.asarray(y, dtype=float)
    if y_hat.shape != y.shape or y.size == 0:
        raise ValueError("prediction and response vectors must be nonempty and aligned")
    d = y_hat - y
    return float(np.sqrt(np.mean(d * d))), float(np.mean(np.abs(d)))


def acl(y_hat, y, tau):
    """Average check loss of predictions, evaluated as rho_tau(y_hat - y)."""
    y_hat = np.asarray(y_hat, dtype=float)
    y = np.asarray(y, dtype=float)
    if y_hat.shape != y.shape or y.size == 0:
        raise ValueError("prediction and response vectors must be nonempty and aligned")
    return float(np.mean(check_loss(y_hat - y, tau)))


# ties go to the simpler effect type
_LABEL_PRIORITY = ("Zero", "Linear", "Nonlinear")


def classify_components(gamma_alpha_trace, gamma_beta_trace):
    """Three-way labels from post-burn-in indicator frequencies.

    A draw counts as nonlinear when the nonlinear indicator is on, linear
    when only the linear indicator is on, and zero when both are off.
    """
    ga = np.asarray(gamma_alpha_trace)
    gb = np.asarray(gamma_beta_trace)
    if ga.ndim != 2 or ga.shape != gb.shape or ga.shape[0] == 0:
        raise ValueError("need nonempty aligned indicator traces of shape (draws, p)")
    p_nl = (gb == 1).mean(axis=0)
    p_lin = ((ga == 1) & (gb == 0)).mean(axis=0)
    p_zero = ((ga == 0) & (gb == 0)).mean(axis=0)
    out = []
    for j in range(ga.shape[1]):
        probs = {"Nonlinear": p_nl[j], "Linear": p_lin[j], "Zero": p_zero[j]}
        best = max(_LABEL_PRIORITY, key=lambda lab: (probs[lab], -_LABEL_PRIORITY.index(lab)))
        out.append(
            ComponentLabel(
                label=best,
                p_nonlinear=float(p_nl[j]),
                p_linear=float(p_lin[j]),
                p_zero=float(p_zero[j]),
            )
        )
    return out


@dataclass(frozen=True)
class SelectionCounts:
    """Table 5-style summary of selection quality against known truth."""

    selected_nonzero: int
    correct_nonzero: int
    selected_linear: int
    correct_linear: int


def selection_counts(labels, truth):
    """Count selected and correctly selected nonzero/linear components."""
    labels = [lab.label if isinstance(lab, ComponentLabel) else lab for lab in labels]
    truth = list(truth)
    if len(labels) != len(truth):
        raise ValueError("labels and truth must have equal length")
    sel_nz = sum(1 for lab in labels if lab != "Zero")
    cor_nz = sum(1 for lab, t in zip(labels, truth) if lab != "Zero" and t != "Zero")
    sel_lin = sum(1 for lab in labels if lab == "Linear")
    cor_lin = sum(1 for lab, t in zip(labels, truth) if lab == "Linear" and t == "Linear")
    return SelectionCounts(sel_nz, cor_nz, sel_lin, cor_lin)
