"""Config-driven verifier suites and their on-disk reports."""
import csv
import io
import json
import os
import time
from dataclasses import asdict, dataclass, field
import numpy as np

from . import concentration as conc
from . import functions
from . import inequality as ineq
from . import transport
from .conjugate import GridFunction1D
from .errors import ConfigError, PreconditionError
from .measure import build_measure
from .potential import analyze_regularity, from_spec
from .report import VerificationReport, make_report

SCHEMA = 1
VERIFIERS = ("mlsi", "brascamp_lieb", "power_lsi", "hphi", "perturbed", "euclidean",
             "homogeneous", "nontight", "prekopa_leindler", "transport", "concentration")
FAMILIES = ("bumps", "poly_bumps")


@dataclass(frozen=True)
class FunctionSuite:
    family: str = "bumps"
    count: int = 10
    amplitude: tuple = (-0.5, 0.5)
    width: tuple = (0.3, 2.0)
    center: tuple = (-2.0, 2.0)
    seed: int = 0


@dataclass(frozen=True)
class ConcentrationSpec:
    n: tuple = (5, 10)
    samples: int = 100_000
    statistic: str = "sum"
    partitions: int = 4
    lambda_count: int = 25


@dataclass(frozen=True)
class ExperimentConfig:
    potential: dict
    verifiers: tuple
    functions: FunctionSuite = FunctionSuite()
    accuracy: float = 1e-10
    output: str = "out"
    seed: int = 0
    perturbation_amplitude: float = 0.1
    concentration: ConcentrationSpec = ConcentrationSpec()
    schema: int = SCHEMA

    def __post_init__(self):
        if not self.verifiers:
            raise ConfigError("field 'verifiers': must be a non-empty list")
        bad = [v for v in self.verifiers if v not in VERIFIERS]
        if bad:
            raise ConfigError(f"field 'verifiers': unknown verifier(s) {bad}; choose from {list(VERIFIERS)}")
        if not 1e-12 <= self.accuracy <= 1e-4:
            raise ConfigError(f"field 'accuracy': {self.accuracy} not in [1e-12, 1e-4]")
        if self.schema != SCHEMA:
            raise ConfigError(f"field 'schema': expected {SCHEMA}, got {self.schema}")
        if self.functions.family not in FAMILIES:
            raise ConfigError(f"field 'functions.family': unknown family {self.functions.family!r}")
        if self.functions.count < 1:
            raise ConfigError("field 'functions.count': must be positive")
        try:
            from_spec(self.potential)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"field 'potential': {exc}") from exc

    def to_dict(self):
        d = asdict(self)
        d["verifiers"] = list(self.verifiers)
        for k in ("amplitude", "width", "center"):
            d["functions"][k] = list(d["functions"][k])
        d["concentration"]["n"] = list(d["concentration"]["n"])
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {"schema", "potential", "functions", "verifiers", "accuracy", "output", "seed",
                 "perturbation_amplitude", "concentration"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown field(s) {sorted(extra)}")
        for req in ("potential", "verifiers"):
            if req not in d:
                raise ConfigError(f"field '{req}': missing")
        if not isinstance(d["verifiers"], list):
            raise ConfigError("field 'verifiers': must be a list")
        try:
            fs = dict(d.get("functions", {}))
            for k in ("amplitude", "width", "center"):
                if k in fs:
                    fs[k] = tuple(float(x) for x in fs[k])
            cs = dict(d.get("concentration", {}))
            if "n" in cs:
                cs["n"] = tuple(int(x) for x in cs["n"])
            return cls(
                potential=d["potential"],
                verifiers=tuple(d["verifiers"]),
                functions=FunctionSuite(**fs),
                accuracy=float(d.get("accuracy", 1e-10)),
                output=str(d.get("output", "out")),
                seed=int(d.get("seed", 0)),
                perturbation_amplitude=float(d.get("perturbation_amplitude", 0.1)),
                concentration=ConcentrationSpec(**cs),
                schema=int(d.get("schema", SCHEMA)),
            )
        except TypeError as exc:
            raise ConfigError(f"bad field: {exc}") from exc

    @classmethod
    def from_json(cls, text, source="<config>"):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        return cls.from_dict(d)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        return cls.from_json(text, str(path))

    def replace(self, **kw):
        d = self.to_dict()
        d.update(kw)
        return ExperimentConfig.from_dict(d)


def make_functions(spec, dim):
    if spec.family == "bumps":
        return functions.random_bumps(spec.count, spec.seed, spec.amplitude, spec.width,
                                      spec.center, dim)
    if dim != 1:
        raise ConfigError("field 'functions.family': poly_bumps are one-dimensional")
    rng = np.random.default_rng(spec.seed)
    out = []
    for _ in range(spec.count):
        coeffs = rng.uniform(-1.0, 1.0, size=3)
        out.append(functions.poly_bump(coeffs, rng.uniform(*spec.amplitude) / 2,
                                       rng.uniform(*spec.center), rng.uniform(*spec.width)))
    return out


@dataclass
class SuiteReport:
    config: ExperimentConfig
    reports: dict
    skips: list
    timings: dict
    sweeps: dict = field(default_factory=dict)

    @property
    def summary(self):
        counts = {"holds": 0, "equality": 0, "violated": 0, "violated-hypothesis": 0}
        for reps in self.reports.values():
            for r in reps:
                counts[r.status] += 1
        return counts

    @property
    def total(self):
        return sum(len(v) for v in self.reports.values())

    @property
    def violated(self):
        sm = self.summary
        return sm["violated"] + sm["violated-hypothesis"] > 0

    def to_dict(self):
        return {
            "schema": SCHEMA,
            "config": self.config.to_dict(),
            "reports": {k: [r.to_dict() for r in v] for k, v in sorted(self.reports.items())},
            "skips": sorted(self.skips, key=lambda s: s["verifier"]),
            "summary": self.summary,
            "total": self.total,
        }


class _Context:
    def __init__(self, config):
        self.config = config
        self.potential = from_spec(config.potential)
        self.dim = self.potential.dim
        self.regularity = analyze_regularity(self.potential, integrability=False)
        self.measure = build_measure(self.potential, config.accuracy)
        self.gs = make_functions(config.functions, self.dim)
        self._nontight = None

    def nontight(self):
        if self._nontight is None:
            self._nontight = ineq.nontight_constants(self.measure)
        return self._nontight


def _tag(rep, k):
    rep.meta["index"] = k
    return rep


def _run_mlsi(ctx):
    return [_tag(ineq.verify_mlsi(ctx.measure, g), k) for k, g in enumerate(ctx.gs)]


def _run_bl(ctx):
    if ctx.regularity.lam <= 0:
        raise PreconditionError("lambda=0 (Hessian singular at a probe point)")
    return [_tag(ineq.verify_brascamp_lieb(ctx.measure, g), k) for k, g in enumerate(ctx.gs)]


def _run_power(ctx):
    pot = ctx.potential
    if pot.kind not in ("power", "gaussian") or pot.p < 2:
        raise PreconditionError("power potential with p >= 2 required")
    return [_tag(ineq.verify_power_lsi(ctx.measure, g), k) for k, g in enumerate(ctx.gs)]


def _run_hphi(ctx):
    prof = ineq.extract_hphi(ctx.potential, regularity=ctx.regularity)
    return [_tag(ineq.verify_hphi_mlsi(ctx.measure, g, prof), k) for k, g in enumerate(ctx.gs)]


def _run_perturbed(ctx):
    U = functions.sine(ctx.config.perturbation_amplitude, ctx.dim)
    return [_tag(ineq.verify_perturbed(ctx.potential, U, g, ctx.config.accuracy), k)
            for k, g in enumerate(ctx.gs)]


def _run_euclidean(ctx):
    phi = ctx.measure.potential
    out = []
    for k, g in enumerate(ctx.gs):
        h = g + functions.negative_potential(phi)
        h = functions.SmoothFunction(h.dim, h.value_fn, h.grad_fn, h.hess_fn, name=f"{g.name}-phi")
        out.append(_tag(ineq.verify_euclidean_lsi(phi, h, 1.0, ctx.config.accuracy), k))
    return out


def _run_homogeneous(ctx):
    q = ctx.regularity.homogeneity_q
    if q is None:
        raise PreconditionError("homogeneity_q absent")
    C = ctx.potential.centered()
    out = []
    for k, g in enumerate(ctx.gs):
        h = g + functions.negative_potential(C)
        h = functions.SmoothFunction(h.dim, h.value_fn, h.grad_fn, h.hess_fn, name=f"{g.name}-C")
        out.append(_tag(ineq.verify_homogeneous_elsi(C, q, h, ctx.config.accuracy), k))
    return out


def _run_nontight(ctx):
    cst = ctx.nontight()
    return [_tag(ineq.verify_nontight(ctx.measure, g, cst), k) for k, g in enumerate(ctx.gs)]


def _need_1d(ctx, what):
    if ctx.dim != 1:
        raise PreconditionError(f"{what} is one-dimensional")


def _run_pl(ctx):
    _need_1d(ctx, "Prekopa-Leindler grid check")
    R = min(ctx.measure.radius, 8.0)
    f = GridFunction1D.sample(lambda x: np.exp(-ctx.measure.potential.value(x)), -R, R, 801)
    return [_tag(ineq.check_prekopa_leindler(f, f, f, 0.5), 0)]


def _run_transport(ctx):
    _need_1d(ctx, "transport")
    out = []
    for k, g in enumerate(ctx.gs):
        F = functions.SmoothFunction(1, lambda X, g=g: np.exp(g.value(X)), None, name=f"exp({g.name})")
        inst = transport.make_instance(ctx.measure, F)
        out.append(_tag(transport.verify_transport(inst), k))
    return out


def _concentration_bound(ctx):
    try:
        prof = ineq.extract_hphi(ctx.potential, regularity=ctx.regularity)
        return conc.calibrate_constants(prof, ctx.regularity.growth_B)
    except PreconditionError as exc:
        if ctx.regularity.lam > 0 and str(exc) == "hess_unbounded=false":
            return conc.gross_bound(ctx.regularity.lam, ctx.potential.centered())
        raise


def _run_concentration(ctx, sweeps):
    _need_1d(ctx, "concentration sampling")
    spec = ctx.config.concentration
    bound = _concentration_bound(ctx)
    F = conc.sum_statistic if spec.statistic == "sum" else conc.smooth_max()
    out = []
    for k, n in enumerate(spec.n):
        grid = conc.default_lambda_grid(bound, n, spec.lambda_count)
        res = conc.run_concentration(ctx.measure, F, n, bound, grid, spec.samples,
                                     ctx.config.seed, spec.partitions)
        sweeps[f"concentration_n{n}.csv"] = res.to_csv()
        gap = res.wilson_upper - res.bound
        j = int(np.argmax(gap))
        meta = {"n": n, "samples": spec.samples, "C1": bound.C1, "C2": bound.C2, "C3": bound.C3,
                "recipe": bound.meta.get("recipe"), "implementation_defined": True,
                "worst_lambda": float(res.lambda_grid[j]), "pilot_mean": res.pilot_mean,
                "index": k}
        out.append(make_report("concentration", float(gap[j]), 0.0, 0.0, None, meta, tolerance=0.0))
    return out


RUNNERS = {
    "mlsi": _run_mlsi, "brascamp_lieb": _run_bl, "power_lsi": _run_power, "hphi": _run_hphi,
    "perturbed": _run_perturbed, "euclidean": _run_euclidean, "homogeneous": _run_homogeneous,
    "nontight": _run_nontight, "prekopa_leindler": _run_pl, "transport": _run_transport,
}


def run_suite(config):
    """Run every selected verifier; hypothesis failures become skips."""
    reports, skips, timings, sweeps = {}, [], {}, {}
    try:
        ctx = _Context(config)
    except PreconditionError as exc:
        for v in config.verifiers:
            skips.append({"verifier": v, "reason": f"potential: {exc}"})
        return SuiteReport(config, reports, skips, timings, sweeps)
    for v in config.verifiers:
        t0 = time.perf_counter()
        try:
            if v == "concentration":
                reports[v] = _run_concentration(ctx, sweeps)
            else:
                reports[v] = RUNNERS[v](ctx)
        except PreconditionError as exc:
            skips.append({"verifier": v, "reason": str(exc)})
        timings[v] = time.perf_counter() - t0
    return SuiteReport(config, reports, skips, timings, sweeps)


CSV_FIELDS = ("index", "name", "g", "lhs", "rhs", "margin", "rel_margin", "status", "tolerance")


def _report_csv(reps):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in reps:
        w.writerow([r.meta.get("index", ""), r.name, r.meta.get("g", ""), repr(r.lhs), repr(r.rhs),
                    repr(r.margin), repr(r.rel_margin), r.status, repr(r.tolerance)])
    return buf.getvalue()


def summary_table(suite_dict):
    lines = [f"{'verifier':<18}{'reports':>8}{'holds':>8}{'equality':>10}{'violated':>10}"]
    for v, reps in suite_dict["reports"].items():
        st = [r["status"] for r in reps]
        lines.append(f"{v:<18}{len(st):>8}{st.count('holds'):>8}{st.count('equality'):>10}"
                     f"{sum(s.startswith('violated') for s in st):>10}")
    for s in suite_dict["skips"]:
        lines.append(f"{s['verifier']:<18}{'skipped':>8}  {s['reason']}")
    sm = suite_dict["summary"]
    lines.append(f"total {suite_dict['total']}: holds {sm['holds']}, equality {sm['equality']}, "
                 f"violated {sm['violated']}, violated-hypothesis {sm['violated-hypothesis']}")
    return "\n".join(lines) + "\n"


def emit_report(report, directory):
    """Write suite.json, per-verifier CSVs, sweeps, summary.txt and timings.json.

    Returns the sorted list of written file names. Everything except
    timings.json is a deterministic function of the config.
    """
    files = {}
    d = report.to_dict()
    files["suite.json"] = json.dumps(d, sort_keys=True, indent=2) + "\n"
    for v, reps in sorted(report.reports.items()):
        files[f"{v}.csv"] = _report_csv(reps)
    files.update(report.sweeps)
    files["summary.txt"] = summary_table(d)
    files["timings.json"] = json.dumps({k: round(t, 6) for k, t in sorted(report.timings.items())},
                                       sort_keys=True, indent=2) + "\n"
    try:
        os.makedirs(directory, exist_ok=True)
        for name, text in files.items():
            with open(os.path.join(directory, name), "w") as fh:
                fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write report files: {exc.strerror}",
                      exc.filename or str(directory)) from exc
    return sorted(files)


def load_suite(directory):
    path = os.path.join(directory, "suite.json")
    with open(path) as fh:
        d = json.load(fh)
    d["reports"] = {k: [VerificationReport.from_dict(r) for r in v] for k, v in d["reports"].items()}
    return d
