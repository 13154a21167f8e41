"""Unequal actions give unequal angles.

The actions of the three connections fix the angles through the force
balance; we start the field at those angles and check that relaxation
keeps them.  Takes a few minutes.
Run: python3 demos/03_asymmetric_young.py
"""
import numpy as np

from triodlab import connect, field, potential, young

spec = potential.TripleWellSpec(np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.3, 0.8, 0.0]]))
cons = [connect.solve_connection(spec, i, j) for i, j in field.PAIRS]
sig = np.array([c.action for c in cons])
phi = young.predict_angles(*sig)
print("sigma          ", np.round(sig, 5))
print("predicted (deg)", np.round(np.rad2deg(phi), 3))

# Gamma_12 points up; the others follow counterclockwise
rays = np.pi / 2 + np.array([0.0, phi[1], phi[1] + phi[2]])
f = field.relax(field.init_triod(spec, cons, rays, n=512, h=0.1), tol=1e-6)
rep = young.measure(f, sig)
print("measured (deg) ", np.round(np.rad2deg(rep.angles), 3))
print(f"max error {np.rad2deg(rep.max_angle_error()):.3f} deg, sine spread {rep.spread:.2e}")

# A deliberately wrong set of angles fails both forms of the law
bad = np.deg2rad([110.0, 130.0, 120.0])
print(f"\nwrong angles: spread {young.sine_spread(bad, sig):.3f}, "
      f"balance {young.balance_residual(sig, young.conormals_from_angles(bad)):.3f}")
