"""Check the successive-approximation solver against the direct time stepper.

Both solvers see the same noise realization.  The fine path uses dt = 5e-3
and is coarsened to dt = 1e-2 by summing Wiener increments.  The sup-norm
gap between the two solvers should roughly halve with the step.  A
noise-free single-mode problem is then compared with its closed form
E_{alpha,1}(lambda t^alpha) x0.
"""
import numpy as np

from fracsde import (coarsen, direct_scheme, example_problem, ml_array, picard_solve,
                     problem_from_dict, sample_noise)


def sup_gap(spec, noise):
    a = picard_solve(spec, noise).trajectory
    b = direct_scheme(spec, noise)
    return float(np.max(np.linalg.norm(a.states - b.states, axis=1)))


def main(paths=40):
    spec = example_problem()
    fine = spec.grid(5e-3)
    gaps = np.array([[sup_gap(spec, coarsen(nf, 2)), sup_gap(spec, nf)]
                     for nf in (sample_noise(spec.wiener, spec.jumps, fine, 0, i)
                                for i in range(paths))])
    coarse, finer = gaps.mean(axis=0)
    print(f"mean sup gap over {paths} paths: dt=1e-2 -> {coarse:.4e}, dt=5e-3 -> {finer:.4e}, "
          f"ratio {finer / coarse:.3f}")

    lam, x0 = -2.0, 1.0
    single = problem_from_dict({
        "alpha": 1.6, "p": 2, "horizon": 1.0, "generator": {"eigenvalues": [lam]},
        "phi": {"name": "constant", "params": {"values": [x0]}}, "eta": [0.0]})
    g = single.grid(1e-3)
    x = picard_solve(single, grid=g).trajectory.states[:, 0]
    ref = x0 * ml_array(1.6, 1.0, lam * g.times ** 1.6)
    print(f"noise-free single mode: max |x - E_a,1(lam t^a) x0| = {np.max(np.abs(x - ref)):.2e}")


if __name__ == "__main__":
    main()
