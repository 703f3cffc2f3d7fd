"""Charge sharpening and the shadow-norm bound for learning total charge.

U(1)-symmetric monitored circuits gradually pin the total charge of the
record ensemble: the trajectory-averaged charge fluctuation deltaQ(t)
decays, and its complement var<Q> feeds a lower bound on the sample
complexity of learning the initial charge.  Fast (exponential-in-t)
sharpening means O(N) experiments; slow (t/N) sharpening costs ~N^2/t.

Run:  python demos/demo_charge.py
"""

from monitored_shadows import MonitoredCircuitSpec
from monitored_shadows.charge import charge_shadow_bound, sharpening_curve, sharpening_time

N = 8
N_TRAJ = 200


def main():
    for p, label in ((0.40, "sharp phase"), (0.05, "fuzzy phase")):
        t_max = 2 * N if p > 0.2 else 4 * N
        spec = MonitoredCircuitSpec(N, t_max, p, gate_ensemble="u1_haar", seed=13)
        stats = sharpening_curve(spec, range(0, t_max + 1, 2), N_TRAJ)
        print(f"# p={p} ({label})")
        print(f"{'t':>4} {'deltaQ/dQ0':>11} {'bound':>10}")
        for i, t in enumerate(stats.times):
            dq = stats.delta_q[i]
            try:
                bound = f"{charge_shadow_bound(float(dq), stats.delta_q0):10.2f}"
            except Exception:
                bound = f"{'inf':>10}"
            print(f"{t:4d} {dq / stats.delta_q0:11.4f} {bound}")
        try:
            print(f"sharpening time t#(0.1) = {sharpening_time(stats, 0.1):.2f}\n")
        except Exception as exc:
            print(f"no crossing within the window: {exc}\n")


if __name__ == "__main__":
    main()
