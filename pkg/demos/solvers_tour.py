"""The three reference solvers behind the training data, and their accuracy.

* Burgers: pseudo-spectral, integrating factor for viscosity, RK4 for the
  dealiased nonlinear term. Spectrally accurate in space.
* Darcy: five-point finite volumes with harmonic-mean face coefficients,
  solved by conjugate gradients. Second order on smooth problems.
* Lorenz-63 with a forcing added to the z equation: classical RK4.

Run with ``python3 demos/solvers_tour.py``.
"""
import numpy as np

from hno import datagen


def main():
    print("Burgers, sine initial condition, nu = 0.01, t = 1 (a steep front forms)")
    sols = {}
    for n in (32, 64, 128, 512):
        sols[n] = datagen.burgers_solve(np.sin(2 * np.pi * np.arange(n) / n), 0.01, 1.0, n_steps=4000)
    for n in (32, 64, 128):
        ref = sols[512][:: 512 // n]
        print(f"   N = {n:3d}: relative difference to N = 512 is {np.linalg.norm(sols[n] - ref) / np.linalg.norm(ref):.1e}")
    print("   the error falls faster than any power of N, as expected of a spectral method")

    print("Darcy with a = 1 and the exact solution sin(pi x) sin(pi y)")
    prev = None
    for n in (17, 33, 65):
        x = np.linspace(0, 1, n)
        X, Y = np.meshgrid(x, x, indexing="ij")
        exact = np.sin(np.pi * X) * np.sin(np.pi * Y)
        err = np.max(np.abs(datagen.darcy_solve(np.ones((n, n)), 2 * np.pi**2 * exact) - exact))
        ratio = "" if prev is None else f"  (ratio {prev / err:.2f})"
        print(f"   n = {n:3d}: max error {err:.2e}{ratio}")
        prev = err

    print("Lorenz-63 RK4, unforced, from (1, 1, 1) to t = 1")
    ref = datagen.lorenz63_solve(np.zeros(8001), dt=1 / 8000, return_state=True)[-1]
    prev = None
    for steps in (200, 400, 800):
        end = datagen.lorenz63_solve(np.zeros(steps + 1), dt=1 / steps, return_state=True)[-1]
        err = np.linalg.norm(end - ref)
        ratio = "" if prev is None else f"  (ratio {prev / err:.1f})"
        print(f"   dt = 1/{steps}: error {err:.2e}{ratio}")
        prev = err

    print("A forced trajectory from the dataset generator")
    pair = datagen.make_lorenz_dataset(n_samples=1, n_points=256, dt=0.04, seed=3)
    f, x = pair.inputs[0, :, 0], pair.outputs[0, :, 0]
    print(f"   forcing range [{f.min():.1f}, {f.max():.1f}], response x range [{x.min():.2f}, {x.max():.2f}]")


if __name__ == "__main__":
    main()
