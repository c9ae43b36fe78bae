"""Adding the unlabeled test points to training.

Two overlapping Gaussian clouds, 300 labeled training points and 200 test
points. The transductive run gives the test points zero weight in the first
pass, then lets them pick their nearest codeword and join the fit.
"""
import numpy as np

from shl.dataset import LabeledDataset
from shl.evalkit import accuracy
from shl.trainer import TrainConfig, classify, train, transductive_train

rng = np.random.default_rng(7)
labels = rng.integers(0, 2, 500)
centers = np.array([[-0.75, 0.0], [0.75, 0.0]])
X = centers[labels] + rng.normal(size=(500, 2))
Xtr, ytr, Xte, yte = X[:300], labels[:300], X[300:], labels[300:]

cfg = TrainConfig(n_bits=8, seed=0)
inductive = train(cfg, LabeledDataset(Xtr, ytr))
transductive = transductive_train(cfg, LabeledDataset(Xtr, ytr), Xte)

p_ind, p_trans = classify(inductive, Xte), classify(transductive, Xte)
print(f"inductive accuracy    {accuracy(p_ind, yte):.3f}  ({inductive.support.shape[0]} support vectors)")
print(f"transductive accuracy {accuracy(p_trans, yte):.3f}  ({transductive.support.shape[0]} support vectors)")
print("test points where the two disagree:", int(np.sum(p_ind != p_trans)))

# With heavy overlap the self-labelled test points mostly agree with the
# inductive boundary, so both models end up making nearly the same calls.
# The Bayes rate here is about 0.77.
