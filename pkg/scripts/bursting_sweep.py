"""Where the two-parameter STR settles on the bursting plant, and how large the burst is.

Sweeps initial estimates, runs the pulse scenario and prints the settled
feedback gain theta_c1, the closed-loop pole g = a - b theta_c1 and the
burst ratio.  The critical value theta_b = (a + 1)/b makes g = -1.
"""
import argparse

import numpy as np

from adaptctl.adapt_dt import BurstScenario
from adaptctl.sim import burst_ratio


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--horizon", type=int, default=8000)
    ap.add_argument("--pulse", type=float, default=0.1)
    args = ap.parse_args()
    base = BurstScenario(pulse_amplitude=args.pulse, noise_vmax=1e-5)
    print(f"theta_b = {base.theta_b():.3f}")
    for t1 in np.linspace(0.0, 2.0, 5):
        for t2 in (1.0, 2.3):
            sc = BurstScenario(pulse_amplitude=args.pulse, noise_vmax=1e-5, theta0=(t1, t2))
            try:
                tr = sc.run(args.horizon)
            except Exception as exc:  # divergence guard
                print(f"theta0=({t1:.2f}, {t2:.2f}) aborted: {exc}")
                continue
            pre = sc.pulse_k - 1
            print(f"theta0=({t1:.2f}, {t2:.2f}) settled theta_c1={tr['theta_c0'][pre]:+.4f} "
                  f"g={tr['g'][pre]:+.4f} burst={burst_ratio(tr['err'], sc.pulse_k):.3g}")


if __name__ == "__main__":
    main()
