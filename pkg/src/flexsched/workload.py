"""Synthetic workload generation and the canonical request-trace format.

Workloads are sampled from per-class empirical distributions (step-function
inverse transform, no interpolation).  Every sampled variable draws from its
own PCG64 stream derived from the master seed with a fixed stream index, so
adding a variable never perturbs the others and identical seeds always give
identical workloads, on any platform.

Trace files are UTF-8 CSV with a header row and '.' decimals:

    id,submit_time_s,class,n_core,n_elastic,cpu_per_component,
    ram_mb_per_component,runtime_s,priority_class
"""

from __future__ import annotations

import csv
from bisect import bisect_left
from dataclasses import dataclass, field

import numpy as np

from .domain import ClusterSpec, RequestSpec, ResourceVector, ValidationError, fits

TRACE_COLUMNS = (
    "id",
    "submit_time_s",
    "class",
    "n_core",
    "n_elastic",
    "cpu_per_component",
    "ram_mb_per_component",
    "runtime_s",
    "priority_class",
)

# Fixed stream index per sampled variable (order is part of the format).
_STREAMS = {
    "interarrival": 0,
    "class": 1,
    "rigid": 2,
    "runtime": 3,
    "n_core": 4,
    "n_elastic": 5,
    "cpu": 6,
    "ram": 7,
}

_MAX_RESAMPLES = 100


@dataclass(frozen=True)
class EmpiricalDistribution:
    """A step CDF: table of (value, cumulative probability) pairs."""

    values: tuple[float, ...]
    cum: tuple[float, ...]

    def __post_init__(self):
        if not self.values or len(self.values) != len(self.cum):
            raise ValidationError("distribution table must pair values with probabilities")
        if self.cum[0] <= 0.0:
            raise ValidationError("first cumulative probability must be > 0")
        if self.cum[-1] != 1.0:
            raise ValidationError("last cumulative probability must be exactly 1.0")
        for i in range(1, len(self.cum)):
            if self.cum[i] <= self.cum[i - 1]:
                raise ValidationError("cumulative probabilities must be strictly increasing")
            if self.values[i] < self.values[i - 1]:
                raise ValidationError("distribution values must be non-decreasing")

    @classmethod
    def from_weights(cls, pairs: list[tuple[float, float]]) -> "EmpiricalDistribution":
        """Build from (value, weight) pairs; weights need not be normalized."""
        if not pairs:
            raise ValidationError("empty distribution table")
        pairs = sorted((float(v), float(w)) for v, w in pairs)
        total = sum(w for _, w in pairs)
        if total <= 0:
            raise ValidationError("distribution weights must sum to a positive value")
        values, cum, acc = [], [], 0.0
        for v, w in pairs:
            if w < 0:
                raise ValidationError("distribution weights must be non-negative")
            if w == 0:
                continue
            acc += w
            values.append(v)
            cum.append(acc / total)
        cum[-1] = 1.0  # kill normalization dust
        return cls(tuple(values), tuple(cum))

    def sample(self, u: float) -> float:
        """Smallest table value whose cumulative probability is >= u."""
        return self.values[bisect_left(self.cum, u)]

    def mean(self) -> float:
        prev = 0.0
        acc = 0.0
        for v, c in zip(self.values, self.cum):
            acc += v * (c - prev)
            prev = c
        return acc


def sample_ecdf(dist: EmpiricalDistribution, u: float) -> float:
    return dist.sample(u)


@dataclass(frozen=True)
class ClassTables:
    """Sampling tables for one application class.

    With ``correlate_demand`` a single uniform feeds both the cpu and the
    ram inverse CDFs, so a component that is fat in one dimension is fat in
    the other; the marginal distributions are unchanged.
    """

    runtime: EmpiricalDistribution
    n_core: EmpiricalDistribution
    n_elastic: EmpiricalDistribution | None
    cpu: EmpiricalDistribution
    ram_mb: EmpiricalDistribution
    correlate_demand: bool = False


@dataclass(frozen=True)
class WorkloadSpec:
    """Everything needed to generate a workload deterministically."""

    n_apps: int
    seed: int
    interactive_fraction: float = 0.0
    rigid_fraction: float = 0.0  # within batch
    interarrival: EmpiricalDistribution | None = None
    gaussian_arrivals: tuple[float, float] | None = None  # (mu, sigma) seconds
    tables: dict[str, ClassTables] = field(default_factory=dict)
    fit_mode: str = "core"  # resample until "core" or "full" demand fits the cluster

    def validate(self) -> "WorkloadSpec":
        if self.n_apps < 0:
            raise ValidationError("n_apps must be >= 0")
        for frac in (self.interactive_fraction, self.rigid_fraction):
            if not 0.0 <= frac <= 1.0:
                raise ValidationError("mix fractions must lie in [0, 1]")
        if (self.interarrival is None) == (self.gaussian_arrivals is None):
            raise ValidationError("exactly one of interarrival / gaussian_arrivals required")
        if self.fit_mode not in ("core", "full"):
            raise ValidationError("fit_mode must be 'core' or 'full'")
        batch = 1.0 - self.interactive_fraction
        needed = {
            "interactive": self.interactive_fraction > 0,
            "batch_rigid": batch > 0 and self.rigid_fraction > 0,
            "batch_elastic": batch > 0 and self.rigid_fraction < 1.0,
        }
        for cls, need in needed.items():
            if need and cls not in self.tables:
                raise ValidationError(f"missing sampling tables for class {cls!r}")
        return self


def _stream(seed: int, name: str) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_STREAMS[name],))
    return np.random.Generator(np.random.PCG64(ss))


def generate(spec: WorkloadSpec, cluster: ClusterSpec | None = None) -> list[RequestSpec]:
    """Sample ``spec.n_apps`` requests with cumulative arrival times.

    When ``cluster`` is given, any request whose core (or full, depending on
    ``spec.fit_mode``) demand exceeds its capacity is resampled up to 100
    times before the whole generation fails naming the offending class.
    """
    spec.validate()
    streams = {name: _stream(spec.seed, name) for name in _STREAMS}
    out: list[RequestSpec] = []
    t = 0.0
    capacity = cluster.total() if cluster is not None else None
    for rid in range(spec.n_apps):
        if spec.gaussian_arrivals is not None:
            mu, sigma = spec.gaussian_arrivals
            gap = max(0.0, mu + sigma * streams["interarrival"].standard_normal())
        else:
            gap = spec.interarrival.sample(streams["interarrival"].random())
        t += gap
        if streams["class"].random() < spec.interactive_fraction:
            app_class = "interactive"
        elif streams["rigid"].random() < spec.rigid_fraction:
            app_class = "batch_rigid"
        else:
            app_class = "batch_elastic"
        tables = spec.tables[app_class]
        runtime = tables.runtime.sample(streams["runtime"].random())
        for attempt in range(_MAX_RESAMPLES + 1):
            n_core = int(round(tables.n_core.sample(streams["n_core"].random())))
            if app_class == "batch_rigid" or tables.n_elastic is None:
                n_elastic = 0
            else:
                n_elastic = int(round(tables.n_elastic.sample(streams["n_elastic"].random())))
            u_cpu = streams["cpu"].random()
            u_ram = u_cpu if tables.correlate_demand else streams["ram"].random()
            per = ResourceVector(tables.cpu.sample(u_cpu), tables.ram_mb.sample(u_ram))
            if capacity is None:
                break
            demand = per.scale(n_core if spec.fit_mode == "core" else n_core + n_elastic)
            if fits(demand, capacity):
                break
            if attempt == _MAX_RESAMPLES:
                raise ValidationError(
                    f"class {app_class!r}: {spec.fit_mode} demand cannot fit the cluster "
                    f"after {_MAX_RESAMPLES} resamples"
                )
        out.append(
            RequestSpec(
                id=rid,
                submit_time=t,
                app_class=app_class,
                n_core=n_core,
                n_elastic=n_elastic,
                per_component=per,
                nominal_runtime=runtime,
                priority_class=1 if app_class == "interactive" else 0,
            ).validate()
        )
    return out


def write_trace(path, requests: list[RequestSpec]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for r in requests:
            writer.writerow(
                [
                    r.id,
                    repr(r.submit_time),
                    r.app_class,
                    r.n_core,
                    r.n_elastic,
                    repr(r.per_component.cpu),
                    repr(r.per_component.ram),
                    repr(r.nominal_runtime),
                    r.priority_class,
                ]
            )


def read_trace(path) -> list[RequestSpec]:
    """Parse a trace file; malformed rows fail with their line number."""
    out: list[RequestSpec] = []
    seen: set[int] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRACE_COLUMNS:
            raise ValidationError(f"{path}: bad or missing header, expected {','.join(TRACE_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(TRACE_COLUMNS):
                raise ValidationError(f"{path}:{lineno}: expected {len(TRACE_COLUMNS)} fields")
            try:
                req = RequestSpec(
                    id=int(row[0]),
                    submit_time=float(row[1]),
                    app_class=row[2],
                    n_core=int(row[3]),
                    n_elastic=int(row[4]),
                    per_component=ResourceVector(float(row[5]), float(row[6])),
                    nominal_runtime=float(row[7]),
                    priority_class=int(row[8]),
                ).validate()
            except (ValueError, ValidationError) as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
            if req.id in seen:
                raise ValidationError(f"{path}:{lineno}: duplicate request id {req.id}")
            seen.add(req.id)
            out.append(req)
    return out


def default_spec(n_apps: int, seed: int, interactive_fraction: float = 0.2) -> WorkloadSpec:
    """The built-in desk-scale workload.

    Sized for a 10-machine cluster of (32 cores, 131072 MB) each: bursty
    bi-modal inter-arrivals, per-component demands from a quarter core /
    128 MB up to 6 cores / 32 GB (cpu and ram correlated for batch classes),
    elastic component counts with a heavy-ish tail capped so that every
    request's full demand still fits that cluster (the rigid baseline can
    never serve anything bigger).  All table values are binary-exact so
    resource arithmetic stays exact.
    """
    ecdf = EmpiricalDistribution.from_weights
    batch_runtime = ecdf(
        [(30, 15), (60, 15), (120, 20), (300, 20), (600, 15), (1200, 10), (3600, 5)]
    )
    cpu = ecdf([(0.25, 12), (0.5, 23), (1, 30), (2, 20), (4, 10), (6, 5)])
    ram = ecdf(
        [(128, 10), (256, 10), (512, 15), (1024, 20), (2048, 15),
         (4096, 15), (8192, 8), (16384, 5), (32768, 2)]
    )
    tables = {
        "batch_elastic": ClassTables(
            runtime=batch_runtime,
            n_core=ecdf([(1, 50), (2, 35), (3, 15)]),
            n_elastic=ecdf([(2, 25), (4, 20), (8, 20), (12, 15), (20, 12), (32, 6), (40, 2)]),
            cpu=cpu,
            ram_mb=ram,
            correlate_demand=True,
        ),
        "batch_rigid": ClassTables(
            runtime=batch_runtime,
            n_core=ecdf([(2, 40), (4, 35), (8, 20), (12, 5)]),
            n_elastic=None,
            cpu=cpu,
            ram_mb=ram,
            correlate_demand=True,
        ),
        "interactive": ClassTables(
            runtime=ecdf([(300, 30), (600, 30), (1800, 30), (3600, 10)]),
            n_core=ecdf([(1, 70), (2, 30)]),
            n_elastic=ecdf([(0, 20), (2, 30), (4, 25), (8, 17), (16, 8)]),
            cpu=ecdf([(0.5, 50), (1, 35), (2, 15)]),
            ram_mb=ecdf([(1024, 40), (2048, 30), (4096, 20), (8192, 10)]),
        ),
    }
    interarrival = ecdf(
        [(1, 25), (2, 15), (5, 15), (10, 15), (20, 12), (60, 11), (120, 5.5), (300, 1.5)]
    )
    return WorkloadSpec(
        n_apps=n_apps,
        seed=seed,
        interactive_fraction=interactive_fraction,
        rigid_fraction=0.2,
        interarrival=interarrival,
        tables=tables,
        fit_mode="full",
    )
