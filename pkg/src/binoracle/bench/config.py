"""Build configurations, reference selection and diff-bucket classification."""
from __future__ import annotations

from dataclasses import dataclass

OSES = ("linux", "windows")
COMPILERS = ("gcc", "clang", "msvc")
OPTS = ("O0", "O1", "O2", "O3", "Debug", "RelWithDebInfo")
BUCKETS = ("Opt", "Compiler", "OS", "Version", "All")

# Lower rank = less optimized.  MSVC Debug disables optimization outright, so it sorts first.
OPT_RANK = {"Debug": 0, "O0": 1, "O1": 2, "RelWithDebInfo": 3, "O2": 4, "O3": 5}
OS_RANK = {"linux": 0, "windows": 1}


class IdenticalConfigs(ValueError):
    pass


@dataclass(frozen=True, order=False)
class BuildConfig:
    os: str
    compiler: str
    opt: str
    version: str

    def __post_init__(self):
        if self.os not in OSES or self.compiler not in COMPILERS or self.opt not in OPTS:
            raise ValueError(f"unknown build axis value in {self}")
        if (self.compiler == "msvc") != (self.os == "windows"):
            raise ValueError(f"{self.compiler} does not build for {self.os}")

    def key(self):
        return (OPT_RANK[self.opt], OS_RANK[self.os], self.version, self.compiler)

    def __str__(self):
        return f"{self.os}/{self.compiler}/{self.opt}/{self.version}"


def select_reference_build(builds, opt_rank: dict | None = None) -> BuildConfig:
    """Least optimized build; ties go linux-first, then by version string."""
    builds = list(builds)
    if not builds:
        raise ValueError("no builds to choose from")
    rank = opt_rank or OPT_RANK
    return min(builds, key=lambda b: (rank[b.opt], OS_RANK[b.os], b.version, b.compiler))


def classify_diff_bucket(reference: BuildConfig, variant: BuildConfig) -> str:
    """Which single axis separates the two builds, or All.

    Changing OS forces a compiler change and makes the optimization scales incomparable,
    so both are absorbed by the OS bucket; only a version change on top escalates to All.
    """
    if reference == variant:
        raise IdenticalConfigs(f"{reference} vs itself")
    if reference.os != variant.os:
        return "All" if reference.version != variant.version else "OS"
    differs = [name for name, a, b in (("Compiler", reference.compiler, variant.compiler),
                                       ("Opt", reference.opt, variant.opt),
                                       ("Version", reference.version, variant.version)) if a != b]
    return differs[0] if len(differs) == 1 else "All"
