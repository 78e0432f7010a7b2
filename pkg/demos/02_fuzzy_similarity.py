# intra vs inter package similarity on perturbed random files
import numpy as np

from binoracle.fuzzysim import digest, distance, package_mean_matrix, synthetic_corpus

corpus = synthetic_corpus(n_packages=5, n_variants=6, seed=0)
digests = {k: [digest(b) for b in v] for k, v in corpus.items()}

a, b = digests["pkg00"][:2]
print(a.hex())
print("same package:", distance(a, b), " other package:", distance(a, digests["pkg01"][0]))

ps = package_mean_matrix(digests)
names = ps.packages()
print("\n" + "\t".join([""] + names))
for p in names:
    print("\t".join([p] + [f"{ps.matrix[(p, q)]:.2f}" for q in names]))
print(f"\nintra {ps.intra_mean:.3f}  inter {ps.inter_mean:.3f}  d {ps.cohens_d:.2f}")

# more flips -> variants drift apart
for flips in (32, 96, 256, 512):
    c = {k: [digest(x) for x in v] for k, v in synthetic_corpus(flips=flips, seed=1).items()}
    s = package_mean_matrix(c)
    print(flips, round(s.intra_mean, 3), round(float(np.mean(s.inter_scores)), 3))
