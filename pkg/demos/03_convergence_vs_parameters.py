"""Which system parameters make the solver converge faster?

Runs the fixed-point iteration on Bernoulli-Gaussian instances whose frames
have exactly orthonormal rows, normalizes each objective trajectory by the
closed-form expected maximum, and compares a base configuration against
variants with half the sparsity level, half the users, and a tenth of the
noise variance.  Smaller theta, K, or noise should not slow convergence.
"""

import os
from dataclasses import replace

import numpy as np

from blindmimo import SolverOptions, SystemConfig
from blindmimo.harness import iterations_to_level, run_convergence_experiment

OUT_DIR = os.path.join(os.path.dirname(__file__), "output", "convergence")


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    # A large array keeps the normalizer honest: at small M the solver can
    # overshoot the expected level by fitting noise, which blurs the
    # noise-variance comparison.
    base = SystemConfig(
        k_users=8, t_len=200, n_h=1024, n_v=1, theta=0.2,
        channel_model="bernoulli_gaussian", sigma_z2=0.05,
        solver=SolverOptions(max_iters=120, eta_tol=1e-9, obj_rel_tol=1e-12),
    )
    variants = {
        "base": base,
        "theta_half": replace(base, theta=0.1),
        "k_half": replace(base, k_users=4),
        "sigma_tenth": replace(base, sigma_z2=0.005),
    }
    out = run_convergence_experiment(variants, trials=20, base_seed=1)

    print(f"{'variant':>12} {'median iters to 0.9':>20} {'mean final level':>17}")
    for name, r in out.items():
        med = np.median([iterations_to_level(t, 0.9) for t in r["traces"]])
        final = np.mean([t[-1] for t in r["traces"]])
        print(f"{name:>12} {med:>20.1f} {final:>17.3f}")
        path = os.path.join(OUT_DIR, f"trace_{name}.dat")
        longest = max(len(t) for t in r["traces"])
        with open(path, "w") as fh:
            fh.write("# iteration mean_normalized_objective\n")
            for j in range(longest):
                vals = [t[min(j, len(t) - 1)] for t in r["traces"]]
                fh.write(f"{j} {np.mean(vals)}\n")
    print(f"wrote traces under {OUT_DIR}")


if __name__ == "__main__":
    main()
