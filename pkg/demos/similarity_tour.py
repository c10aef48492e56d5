"""
A tour of the similarity measures
=================================

Five users rate six items on a 1-5 scale.  We compare user 1 with everyone
else under each measure, then check that a combined measure is the product
of its two factors.
"""

import numpy as np

from simcf import Measure, RatingMatrix, SimilarityContext, registry

# (user, item, rating); user 5 shares a single item with user 1
triples = [
    (1, 1, 5), (1, 2, 4), (1, 3, 1), (1, 4, 2),
    (2, 1, 4), (2, 2, 5), (2, 3, 2), (2, 5, 3),
    (3, 1, 1), (3, 2, 2), (3, 3, 5), (3, 6, 4),
    (4, 4, 3), (4, 5, 4), (4, 6, 5),
    (5, 1, 4),
]
users, items, values = zip(*triples)
train = RatingMatrix(users, items, values, num_users=5, num_items=6)
ctx = SimilarityContext(train)

print(train.dense[0])  # 0 marks a missing rating

# %%
# Pairwise values, one row per measure.
measures = registry()
print(f"{'measure':>9}" + "".join(f"{'u1~u' + str(v):>9}" for v in range(2, 6)))
for m, fn in measures.items():
    print(f"{m.value:>9}" + "".join(f"{fn(ctx, 1, v):9.4f}" for v in range(2, 6)))

# %%
# The dense route gives the same numbers for every pair at once.
dense = ctx.matrix(Measure.TA_J)
print(np.round(dense, 4))
assert all(abs(dense[0, v - 1] - measures[Measure.TA_J](ctx, 1, v)) < 1e-12 for v in range(2, 6))

# %%
# A combined measure is exactly set measure times numeric measure.
s, num = Measure.COSINE_J.factors
print(Measure.COSINE_J.value, "=", s.value, "x", num.value)
assert np.array_equal(ctx.matrix(Measure.COSINE_J), ctx.matrix(s) * ctx.matrix(num))

# %%
# With one co-rated item, cosine over the intersection is always 1.  Taking
# vector lengths over each user's whole profile damps that.
full = SimilarityContext(train, full_norms=True)
print("cosine u1~u5, co-rated norms:", measures[Measure.COSINE](ctx, 1, 5))
print("cosine u1~u5, full norms:    ", round(measures[Measure.COSINE](full, 1, 5), 4))
print("Jaccard u1~u5:               ", measures[Measure.JACCARD](ctx, 1, 5))
