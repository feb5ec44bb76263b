"""Regenerates logit.csv, the synthetic stand-in for the mcmc package's
`logit` data (100 rows: binary y and four standard-normal predictors).

The response follows a logistic model with intercept and all four slopes
equal to 1. Run: python3 make_logit.py > logit.csv
"""
import numpy as np

rng = np.random.default_rng(20170704)
k = 100
x = rng.standard_normal((k, 4))
eta = 1.0 + x.sum(axis=1)
y = (rng.random(k) < 1.0 / (1.0 + np.exp(-eta))).astype(int)
print("y,x1,x2,x3,x4")
for yi, row in zip(y, x):
    print(",".join([str(yi)] + [f"{v:.6f}" for v in row]))
