"""
The spectral model
==================

A XANES-like spectrum is an arctangent absorption edge, a white-line
Gaussian riding on it, and Gaussian peaks on either side of the edge.
Peak positions are offsets from the edge position E0, and every width is a
full width at half maximum.
"""

import numpy as np

from xanes_emc.model import components, error_function, evaluate_model, make_params
from xanes_emc.synthetic import default_truth, synthesize

# A hand-made spectrum: one sharp peak below the edge, one broad peak above.
params = make_params(
    step=(0.85, 543.1, 1.0, 1.2, 0.5, 3.0),  # H, E0, Gamma, A, DeltaE, omega
    below=[(1.5, -4.0, 1.2)],                # F, dE, W
    above=[(0.4, 12.0, 9.0)],
)
E = np.linspace(530, 590, 13)
print("E      model")
for e, f in zip(E, evaluate_model(params, E)):
    print(f"{e:6.1f} {f:8.4f}")

# The width really is the FWHM: at centre +- W/2 the peak is at half height.
centre = 543.1 - 4.0
only_peak = make_params((0, 543.1, 1, 0, 0, 3), below=[(1.5, -4.0, 1.2)])
print("half-height check:", evaluate_model(only_peak, np.array([centre - 0.6, centre + 0.6])))

# Components add up to the full curve; handy for overlay plots.
parts = components(params, E)
print("components:", list(parts))
print("max additivity gap:", np.abs(sum(parts.values()) - evaluate_model(params, E)).max())

# The misfit used everywhere is E_N = sum(residual^2) / (2N).
truth = default_truth()
data = synthesize(truth)
print(f"E_N of the truth on its own noisy data: {error_function(truth.params, data):.3e}"
      f" (noise level 1/(2b) = {1 / (2 * truth.b_true):.3e})")
