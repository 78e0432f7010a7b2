"""TLSH-style fuzzy digests and package-level similarity statistics."""
from .digest import (BUCKETS, MIN_LENGTH, VERSION, DegenerateInput, DigestError, FuzzyDigest, InputTooSmall,
                     VersionMismatch, bucket_counts, digest, distance)
from .stats import (THRESHOLD, DegenerateVariance, EmptySet, PairStats, cohens_d, corpus_from_manifest,
                    distance_matrix, file_digest, package_mean_matrix, read_manifest, synthetic_corpus,
                    threshold_fraction, write_manifest)

__all__ = [
    "BUCKETS", "DegenerateInput", "DegenerateVariance", "DigestError", "EmptySet", "FuzzyDigest", "InputTooSmall",
    "MIN_LENGTH", "PairStats", "THRESHOLD", "VERSION", "VersionMismatch", "bucket_counts", "cohens_d",
    "corpus_from_manifest", "digest", "distance", "distance_matrix", "file_digest", "package_mean_matrix",
    "read_manifest", "synthetic_corpus", "threshold_fraction", "write_manifest",
]
