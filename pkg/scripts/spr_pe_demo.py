"""Frequency-domain and excitation checks on small examples.

Prints SPR / KYL / hyperminimum-phase verdicts for a few transfer
functions and the excitation level of a few regressors.
"""
import numpy as np

from adaptctl.analysis import hyperminimum_phase_check, kyl_solve, pe_level, spr_check
from adaptctl.errors import InfeasibleError
from adaptctl.model import TransferFunction

CASES = {
    "1/(s+1)": ([1.0], [1.0, 1.0]),
    "1/(s+1)^2": ([1.0], [1.0, 2.0, 1.0]),
    "(s+2)/(s^2+4s+3)": ([2.0, 1.0], [3.0, 4.0, 1.0]),
    "(s+1)/(s^2+s+1)": ([1.0, 1.0], [1.0, 1.0, 1.0]),
    "(s-1)/(s^2+2s+1)": ([-1.0, 1.0], [1.0, 2.0, 1.0]),
}


def main():
    for label, (num, den) in CASES.items():
        W = TransferFunction(num, den)
        res = spr_check(W)
        ss = W.to_state_space()
        try:
            P = kyl_solve(ss.A, ss.B, ss.C)
            kyl = f"P eig {np.round(np.linalg.eigvalsh(P), 4)}"
        except InfeasibleError:
            kyl = "infeasible"
        print(f"{label:20s} SPR={res.is_spr!s:5s} margin={res.margin:+.3g} HMP={hyperminimum_phase_check(W)!s:5s} KYL {kyl}")

    dt = 1e-3
    t = np.arange(0.0, 20.0, dt)
    regs = {
        "[sin t, cos t]": np.column_stack([np.sin(t), np.cos(t)]),
        "[1, 1]": np.ones((t.size, 2)),
        "[sin t, sin 2t, 1]": np.column_stack([np.sin(t), np.sin(2 * t), np.ones_like(t)]),
        "[sin t, 2 sin t]": np.column_stack([np.sin(t), 2 * np.sin(t)]),
    }
    for label, X in regs.items():
        rep = pe_level(X, 2 * np.pi, dt=dt)
        print(f"PE {label:20s} alpha={rep.alpha:.6g} over T=2pi")


if __name__ == "__main__":
    main()
