"""
Neighbours, predictions and recommendation lists
================================================

On a small random matrix we pick a target user, look at its nearest
neighbours, predict a rating and build its recommendation list.
"""

import numpy as np

from simcf import RatingMatrix, SimilarityContext, neighbors, predict, recommend, recommendation_count

rng = np.random.default_rng(7)
n_users, n_items = 30, 40
mask = rng.random((n_users, n_items)) < 0.3
u, i = np.nonzero(mask)
train = RatingMatrix(u + 1, i + 1, rng.integers(1, 6, size=len(u)), num_users=n_users, num_items=n_items)
ctx = SimilarityContext(train)
target = 1

# %%
# Neighbours rank by similarity; ties go to the lower user id and users with
# zero or negative similarity never appear.
near = neighbors(ctx, "TAJ", target, k=5)
for user, sim in near.entries:
    print(f"user {user:2d}  sim {sim:.4f}")

# %%
# Prediction: the target's mean plus the similarity-weighted deviations of
# the neighbours who rated the item.  ``support`` counts those neighbours.
unrated = [it for it in range(1, n_items + 1) if not mask[target - 1, it - 1]]
p = predict(ctx, "TAJ", target, unrated[0], k=5)
print(p)

# %%
# The list length follows the share of relevant ratings in the training
# matrix applied to the items the target has not rated yet.
stats = ctx.stats
print("relevant ratings:", stats.relevant_count, "of", stats.grid_size, "cells")
print("list length for user", target, "=", recommendation_count(stats, target))

rec = recommend(ctx, "TAJ", target, k=5)
print("recommended:", rec.item_ids())
