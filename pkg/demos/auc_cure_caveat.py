"""
What AUC_cure does and does not reward
======================================

AUC_cure builds its ROC curve from the model's own cure probabilities,
without looking at outcomes. A model whose cure probabilities are more
spread out scores higher even when they are less accurate.
"""

# %%
import numpy as np

from ptcmnet.metrics import auc_cure
from ptcmnet.simulation import ScenarioSpec, generate_dataset, make_fit_fn

train = generate_dataset(ScenarioSpec(2, 20_000, seed=70)).dataset
test = generate_dataset(ScenarioSpec(2, 10_000, seed=71))
models = {"network": make_fit_fn()(train, 0), "linear": make_fit_fn(layers=[])(train, 0)}

# %%
# The label-based AUC uses the simulated cure indicator, which a real
# study never observes. It ranks the models the other way round.
cured = test.truth["cured"]


def label_auc(pi):
    """Probability that a cured subject gets a higher cure probability than an uncured one."""
    a, b = pi[cured], pi[~cured]
    order = np.argsort(np.concatenate([a, b]), kind="mergesort")
    ranks = np.empty(len(order))
    ranks[order] = np.arange(1, len(order) + 1)
    return (ranks[: len(a)].sum() - len(a) * (len(a) + 1) / 2) / (len(a) * len(b))


true_pi = np.exp(-test.truth["theta"])
print(f"{'model':8s} {'AUC_cure':>9s} {'label AUC':>10s} {'eta MSE':>8s} {'sd(pi)':>7s}")
print(f"{'truth':8s} {auc_cure(true_pi):9.4f} {label_auc(true_pi):10.4f} {0:8.4f} {true_pi.std():7.4f}")
for name, m in models.items():
    pi = m.cure_probability(test.dataset.X)
    mse = np.mean((m.eta(test.dataset.X) - test.truth["eta"]) ** 2)
    print(f"{name:8s} {auc_cure(pi):9.4f} {label_auc(pi):10.4f} {mse:8.4f} {pi.std():7.4f}")
