"""Acceptance rate and thinned autocorrelation of log|Psi|^2 for the reference systems.

    python scripts/sampler_diagnostics.py [--step 0.25] [--thin 10]
"""
import argparse

from pauli_crystals import Geometry, GeometryKind, SamplerParams, build_basis, run_chains
from pauli_crystals.sampler import autocorrelation

REFERENCE = [("1d", 2), ("2d", 2), ("2d", 3), ("2d", 4), ("2d", 5), ("3d", 2), ("3d", 3),
             ("sphere", 2), ("sphere", 3), ("sphere", 4)]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--step", type=float, default=0.25)
    parser.add_argument("--thin", type=int, default=10)
    parser.add_argument("--kept", type=int, default=2000)
    parser.add_argument("--chains", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    print(f"{'system':12s} {'n':>3s} {'accept':>7s} {'acf(lag 1)':>10s}")
    for kind, shells in REFERENCE:
        basis = build_basis(Geometry(GeometryKind(kind)), shells)
        params = SamplerParams(step_sigma=args.step, burn_in=10_000, thin=args.thin,
                               n_steps=10_000 + args.thin * args.kept, seed=args.seed)
        shots = run_chains(basis, params, args.chains)
        lp = shots.log_probs.reshape(args.chains, -1).T
        print(f"{kind + ' ' + str(shells):12s} {basis.n:3d} {shots.accept_rate:7.3f} {autocorrelation(lp, 1):10.3f}")


if __name__ == "__main__":
    main()
