"""Smoke test for the mvtorus_py extension. Run after `maturin develop` or
`pip install --no-build-isolation -e crates/py`."""

import math

import mvtorus_py as mv


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b} (tol {tol})"


def main():
    close(mv.critical_beta([-1.0]), 2.0, 1e-12)
    close(mv.critical_beta([-3.0, -1.0]), 2.0 / 3.0, 1e-12)
    assert mv.critical_beta([1.0, 0.5]) is None
    rates = mv.growth_rates([-1.0], 1.0, 3)
    assert rates[0] < 0.0

    model = mv.Model([-1.0, -1.0], 10.0)
    branches = mv.enumerate_branches(model)
    labels = sorted(b.label for b in branches)
    assert labels == ["multi_peak", "single_peak", "uniform"], labels
    for b in branches:
        assert b.residual < 1e-8
        close(b.density.mass(), 1.0, 1e-12)

    kur = mv.Model([-1.0], 3.0)
    sol = mv.solve_fixed_point(kur, [0.5])
    assert sol.label == "single_peak"
    close(kur.stationary_residual(sol.density), 0.0, 1e-8)

    sub = mv.Model([-1.0], 1.0)
    traj = mv.evolve(sub, mv.default_initial(128), 200.0)
    assert traj.converged
    assert traj.final_density().deviation_from_uniform() < 1e-4
    energies = [f for _, f in traj.free_energy]
    assert all(b <= a + 1e-9 for a, b in zip(energies, energies[1:]))

    pos = mv.simulate_particles(kur, 5.0, N=200, seed=1)
    assert len(pos) == 200 and all(0.0 <= x < 2 * math.pi for x in pos)
    again = mv.simulate_particles(kur, 5.0, N=200, seed=1)
    assert pos == again
    rho = mv.empirical_density(pos)
    close(rho.mass(), 1.0, 1e-12)

    delta = 0.1
    lam = mv.kuramoto_numeric(delta)[0]
    close(lam, -1.0 - 2.0 / 3.0 * delta**2, 0.02)
    rows = mv.harmonic_table(2, 0.1)
    close(rows[0][2], -1.2154, 1e-2)

    state = mv.solve_fixed_point(mv.Model([-1.0], 2.0 * (1 + delta**2)), [0.5], grid=128).density
    spec = mv.schroedinger_spectrum(mv.Model([-1.0], 2.0 * (1 + delta**2)), state, k=2)
    close(spec[0], 0.0, 1e-8)

    target = mv.Density.from_moments([0.05], [0.02], 128)
    v = mv.design_confinement(target, [-1.0], 2.5)
    assert len(v) == 128
    close(sum(v) / len(v), 0.0, 1e-12)

    try:
        mv.Model([-1.0], -1.0)
    except mv.MvtorusError:
        pass
    else:
        raise AssertionError("negative beta accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
