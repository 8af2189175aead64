# %% [markdown]
# # Adaptive refinement around a penetrable square
#
# A plane-wave source hits a square obstacle with a different permittivity.
# Refinement is driven by the residual estimator with bulk marking; the
# corners of the obstacle receive far more marked elements than their
# share of the area.

# %%
import numpy as np

from maxwellfem import AdaptConfig, ExperimentConfig, adapt_loop
from maxwellfem.problems import OBSTACLE
from maxwellfem.runner import scattering_experiment

cfg = ExperimentConfig("scattering", p=1, n0=10, iters=15)
exp = scattering_experiment(cfg, with_reference=False)
corners = np.array([[sx * OBSTACLE, sy * OBSTACLE] for sx in (-1, 1) for sy in (-1, 1)])


def report(rec, mesh, field, est, marked):
    line = f"iter {rec.iteration:2d}  N={rec.ndofs:6d}  eta={rec.eta:.3e}"
    if marked is not None:
        d = np.linalg.norm(mesh.centroids[marked][:, None] - corners[None], axis=-1).min(axis=1)
        line += f"  marked={marked.size:4d}  near corners={np.mean(d < 0.1):.2f}"
    print(line)


records = adapt_loop(exp, AdaptConfig(cfg.theta, cfg.iters, cfg.max_dofs, cfg.p), on_iteration=report)

# %% [markdown]
# Estimated decay rate against the number of unknowns, from the last few steps.

# %%
n = np.array([r.ndofs for r in records[-5:]], dtype=float)
eta = np.array([r.eta for r in records[-5:]])
print("slope of eta vs N:", np.polyfit(np.log(n), np.log(eta), 1)[0])
