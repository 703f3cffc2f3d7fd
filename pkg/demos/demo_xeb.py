"""Fidelity learning through the Bayesian cross-entropy diagnostic.

XEB' averages Eve's posterior weight of a guess state rho_0 over
experimental records.  In the disentangling phase it separates different
input states (fidelity is learnable from few shots); in the entangling
phase it pins to 1 regardless of the input.

Run:  python demos/demo_xeb.py
"""

import numpy as np

from monitored_shadows import MonitoredCircuitSpec, moments, sample_ensemble
from monitored_shadows.stabilizer import StabilizerMixedState
from monitored_shadows.xeb import xeb_prime, xeb_prime_expected

N = 8
N_SHOTS = 1500


def main():
    rho0 = StabilizerMixedState.computational(N, 0)
    rho_orth = StabilizerMixedState.computational(N, 1)
    print(f"{'p':>5} {'XEB(F=1)':>10} {'XEB(F=0)':>10} {'predicted F=1':>14} {'P':>8}")
    for p in (0.05, 0.15, 0.30, 0.45):
        spec = MonitoredCircuitSpec(N, 2 * N, p, gate_ensemble="clifford2q",
                                    prescramble="global_clifford", seed=11)
        moms = moments(sample_ensemble(spec, 800, master_seed=1))
        same, _ = xeb_prime(spec, rho0, rho0, N_SHOTS, master_seed=2)
        diff, _ = xeb_prime(spec, rho_orth, rho0, N_SHOTS, master_seed=3)
        pred = xeb_prime_expected(moms.purity, 1.0, 1 << N)
        print(f"{p:5.2f} {same:10.4f} {diff:10.4f} {pred:14.4f} {moms.purity:8.4f}")
    print("# low p: both columns ~1 (unlearnable); high p: clear separation")


if __name__ == "__main__":
    main()
