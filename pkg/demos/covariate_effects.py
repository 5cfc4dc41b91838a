"""
Reading a fitted network through covariate effects
==================================================

A partial effect curve varies one covariate over a grid while the rest
stay at their medians. For the second simulation scenario the truth is
additive, so the x2 curve should trace 4 x2^3 up to a constant.
"""

# %%
import numpy as np

from ptcmnet.effects import covariate_effect, interaction_surface
from ptcmnet.simulation import ScenarioSpec, default_fit_settings, generate_dataset
from ptcmnet.training import fit

sim = generate_dataset(ScenarioSpec(2, 30_000, seed=1))
layers, opt, train = default_fit_settings()
model = fit(sim.dataset, layers, opt, train).model

# %%
# Compare the curve with the true shape after matching the level.
curve = covariate_effect(model, sim.dataset, "x2", grid_size=11)
shape = 4 * curve["x2"] ** 3
offset = np.mean(curve["eta"] - shape)
print("  x2    fitted   truth+c")
for x, e, s in zip(curve["x2"], curve["eta"], shape + offset):
    print(f"{x:5.2f}  {e:7.3f}  {s:7.3f}")

# %%
# An additive truth means eta(x1, x2) - eta(x1, x2_0) does not depend on
# x1. The spread of that difference across x1 measures interaction.
surf = interaction_surface(model, sim.dataset, "x1", "x2", grid_size=8)
E = surf["eta"].to_numpy().reshape(8, 8)
diff = E - E[:, :1]
print(f"largest interaction spread {np.ptp(diff, axis=0).max():.3f} "
      f"on a surface ranging {np.ptp(E):.2f}")
