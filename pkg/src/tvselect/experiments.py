"""End-to-end runs: degrade, select, restore, score and write the results.

A run is described by an :class:`ExperimentConfig` (JSON-serializable) and
produces a :class:`RunRecord`. Given the same config every output file is
byte-identical across runs; only the wall time in the record varies.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .imageio import atomic_write_bytes, load_image, save_image
from .local import LocalSelectConfig, WindowSpec, latv_select, platv_select, shrink_alpha0
from .metrics import mae, mssim, psnr
from .model import RestorationProblem
from .noise import NoiseSpec, degrade
from .operators import make_operator
from .phantoms import SYNTHETIC, named_image
from .scalar import SelectConfig, select_scalar
from .solvers import ConfigError, NumericalError, SolverConfig
from .ssn import SsnConfig
from .trace import SelectionTrace

OUTPUT_ENV = "TVSELECT_OUT"
CORPUS_ENV = "TVSELECT_CORPUS"
SCALAR_METHODS = ("cps", "aps", "paps")
LOCAL_METHODS = ("latv", "platv")
METHODS = ("fixed",) + SCALAR_METHODS + LOCAL_METHODS
TABLE_HEADER = ("image", "method", "noise", "param", "psnr", "mssim", "mae", "iters", "seconds", "seed")


class StageError(RuntimeError):
    """A failure inside one stage of :func:`run_experiment`; ``cause`` is the original error."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


def _build(cls, d, what):
    d = dict(d or {})
    known = {f.name for f in fields(cls)}
    extra = sorted(set(d) - known)
    if extra:
        raise ConfigError(f"unknown {what} option(s): {', '.join(extra)}")
    return cls(**d)


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one run.

    ``image`` is a synthetic name (see ``tvselect.phantoms.SYNTHETIC``) or a
    path to a grayscale PGM/PNG ground truth. ``degraded`` optionally points
    to an already degraded observation; the noise spec then only describes
    its statistics. ``seed`` overrides ``noise["seed"]``.
    """

    image: str = "phantom"
    size: int = 256
    noise: dict = field(default_factory=lambda: {"kind": "gaussian", "sigma": 0.1})
    operator: dict | None = None
    method: str = "paps"
    alpha: float = 1e-2
    select: dict = field(default_factory=dict)
    window: dict = field(default_factory=dict)
    auto_alpha0: bool = False
    solver: str = "auto"
    solver_cfg: dict = field(default_factory=dict)
    ssn_cfg: dict = field(default_factory=dict)
    degraded: str | None = None
    out_dir: str | None = None
    seed: int = 0
    bits: int = 8

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.image not in SYNTHETIC and not Path(self.image).exists():
            raise ConfigError(f"image {self.image!r} is neither a synthetic name nor an existing file")
        if self.degraded is not None and not Path(self.degraded).exists():
            raise ConfigError(f"degraded input {self.degraded!r} does not exist")
        if self.method == "cps":
            if self.noise.get("kind") != "gaussian" or not make_operator(self.operator).is_identity:
                raise ConfigError("cps requires Gaussian noise and the identity operator")

    @classmethod
    def from_dict(cls, d):
        return _build(cls, d, "experiment")

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return asdict(self)

    def noise_spec(self, shape):
        d = dict(self.noise)
        d["seed"] = self.seed
        return NoiseSpec.from_dict(d, shape)

    def config_hash(self):
        """SHA-256 of the canonical JSON form, ignoring where outputs go."""
        d = self.to_dict()
        d.pop("out_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class RunRecord:
    config_hash: str
    config: dict
    quality: dict | None
    trace: dict
    alpha: dict
    wall_time: float
    solves: int
    inner_iterations: int
    invariants_ok: bool
    input_sha256: str
    outputs: dict = field(default_factory=dict)
    restored: np.ndarray | None = field(default=None, repr=False, metadata={"json": False})
    alpha_field: np.ndarray | None = field(default=None, repr=False, metadata={"json": False})
    selection: SelectionTrace | None = field(default=None, repr=False, metadata={"json": False})

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self) if f.metadata.get("json", True)}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _sha256(a):
    return hashlib.sha256(np.ascontiguousarray(a, dtype=np.float64).tobytes()).hexdigest()


def quality(u, ref):
    return {"psnr": psnr(u, ref), "mssim": mssim(u, ref), "mae": mae(u, ref)}


def validate_trace(trace):
    """Post-hoc check of the monotonicity that pAPS and pLATV guarantee per branch."""
    if trace.method not in ("paps", "platv") or len(trace.records) < 2:
        return True
    sign = 1.0 if trace.branch == "low" else -1.0
    cols = [[r.alpha_min for r in trace.records], [r.alpha_max for r in trace.records]]
    return all(np.all(sign * np.diff(c) >= 0) for c in cols)


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _ground_truth(cfg):
    if cfg.image in SYNTHETIC:
        return named_image(cfg.image, cfg.size)
    return load_image(cfg.image)


def _restore(cfg, g, spec, T):
    solver_cfg = _build(SolverConfig, {"record_energy": False, **cfg.solver_cfg}, "solver")
    ssn_cfg = _build(SsnConfig, cfg.ssn_cfg, "ssn") if cfg.ssn_cfg or cfg.solver == "ssn" else None
    if cfg.method == "fixed":
        prob = RestorationProblem(g, spec, T, cfg.solver, solver_cfg, ssn_cfg)
        ev = prob.solve(cfg.alpha)
        trace = SelectionTrace("fixed")
        trace.add(0, cfg.alpha, ev.H, ev.B, 0.0)
        trace.solves, trace.inner_iterations = prob.solves, prob.inner_iterations
        return np.asarray(cfg.alpha, dtype=np.float64), ev.u, trace
    if cfg.method in SCALAR_METHODS:
        sel = _build(SelectConfig, cfg.select, "selection")
        a, u, trace = select_scalar(cfg.method, g, spec, T, sel, solver_cfg, cfg.solver, ssn_cfg)
        return np.asarray(a), u, trace
    sel = _build(LocalSelectConfig, cfg.select, "selection")
    win = _build(WindowSpec, cfg.window, "window")
    prob = RestorationProblem(g, spec, T, cfg.solver, solver_cfg, ssn_cfg)
    alpha0 = shrink_alpha0(g, spec, cfg=sel, problem=prob) if cfg.auto_alpha0 else None
    fn = latv_select if cfg.method == "latv" else platv_select
    return fn(g, spec, T, win, sel, alpha0=alpha0, problem=prob)


def _alpha_csv(alpha):
    buf = io.StringIO()
    np.savetxt(buf, np.atleast_2d(alpha), delimiter=",", fmt="%.17g")
    return buf.getvalue().encode()


def _write_outputs(out, u, g, alpha, trace, bits):
    out.mkdir(parents=True, exist_ok=True)
    ext = "png"
    files = {"restored": out / f"restored.{ext}", "degraded": out / f"degraded.{ext}", "trace": out / "trace.csv"}
    save_image(u, files["restored"], bits=bits)
    save_image(np.clip(g, 0.0, 1.0), files["degraded"], bits=bits)
    atomic_write_bytes(files["trace"], trace.to_csv().encode())
    np_save = io.BytesIO()
    np.save(np_save, u, allow_pickle=False)
    files["restored_npy"] = out / "restored.npy"
    atomic_write_bytes(files["restored_npy"], np_save.getvalue())
    if np.ndim(alpha) == 2:
        files["alpha_png"] = out / "alpha.png"
        files["alpha_csv"] = out / "alpha.csv"
        top = float(alpha.max())
        save_image(alpha / top if top > 0 else alpha, files["alpha_png"], bits=16)
        atomic_write_bytes(files["alpha_csv"], _alpha_csv(alpha))
    return {k: str(v) for k, v in files.items()}


def resolve_out_dir(cfg):
    if cfg.out_dir:
        return Path(cfg.out_dir)
    root = os.environ.get(OUTPUT_ENV)
    if root:
        return Path(root) / cfg.config_hash()[:12]
    return None


def run_experiment(cfg):
    """Run one configuration and write its outputs (if an output directory is known)."""
    t0 = time.perf_counter()
    ref = _stage("load", _ground_truth, cfg)
    spec = _stage("noise", cfg.noise_spec, ref.shape)
    T = _stage("operator", make_operator, cfg.operator)
    if cfg.degraded is not None:
        g = _stage("load", load_image, cfg.degraded)
        if g.shape != ref.shape:
            raise StageError("load", ConfigError(f"degraded image shape {g.shape} differs from {ref.shape}"))
    else:
        g = _stage("degrade", degrade, ref, spec, None if T.is_identity else T)
    alpha, u, trace = _stage("select", _restore, cfg, g, spec, T)
    q = _stage("score", quality, u, ref)
    a = np.asarray(alpha, dtype=np.float64)
    record = RunRecord(
        config_hash=cfg.config_hash(),
        config=cfg.to_dict(),
        quality=q,
        trace=trace.summary(),
        alpha={"min": float(a.min()), "mean": float(a.mean()), "max": float(a.max())},
        wall_time=0.0,
        solves=trace.solves,
        inner_iterations=trace.inner_iterations,
        invariants_ok=validate_trace(trace),
        input_sha256=_sha256(g),
        restored=u,
        alpha_field=a,
        selection=trace,
    )
    out = resolve_out_dir(cfg)
    if out is not None:
        record.outputs = _stage("write", _write_outputs, out, u, g, a, trace, cfg.bits)
    record.wall_time = time.perf_counter() - t0
    if out is not None:
        record.outputs["record"] = str(out / "record.json")
        _stage("write", atomic_write_bytes, out / "record.json", record.to_json().encode())
    return record


def _noise_label(noise, op):
    kind = noise["kind"]
    if kind == "gaussian":
        s = f"gaussian(sigma={noise['sigma']})"
    elif kind == "salt_pepper":
        s = f"salt_pepper(r1={noise['r1']},r2={noise['r2']})"
    else:
        s = f"random_valued(r={noise['r']})"
    return s if op is None else f"blur+{s}"


_BLUR = {"kind": "gaussian", "size": 5, "std": 10.0}


def table_configs(table_id, images, seed=0, size=256):
    """The configuration matrix of one results table as ``(image, param, ExperimentConfig)``."""
    table_id = int(table_id)
    rows = []

    def add(image, param, **kw):
        kw.setdefault("size", size)
        rows.append((image, param, ExperimentConfig(image=images[image], seed=seed, **kw)))

    names = list(images)
    if table_id == 1:
        for name in names[:1]:
            for sigma in (0.3, 0.1, 0.05):
                for a0 in (1.0, 1e-1, 1e-2):
                    for m in SCALAR_METHODS:
                        add(name, f"alpha0={a0:g}", noise={"kind": "gaussian", "sigma": sigma}, method=m,
                            select={"alpha0": a0})
    elif table_id == 2:
        for name in names[:1]:
            for a0 in (1.0, 1e-1, 1e-2, 1e-3, 1e-4):
                for m, auto in (("latv", False), ("platv", False), ("platv", True)):
                    add(name, f"alpha0={a0:g}" + (",alg1" if auto else ""), noise={"kind": "gaussian", "sigma": 0.1},
                        method=m, select={"alpha0": a0}, auto_alpha0=auto)
    elif table_id in (3, 4):
        a0 = 1e-4 if table_id == 3 else 1e-2
        op = None if table_id == 3 else _BLUR
        for name in names:
            for sigma in (0.3, 0.1, 0.05, 0.01) if table_id == 3 else (0.3, 0.1, 0.05):
                for m in ("paps", "latv", "platv"):
                    add(name, f"alpha0={a0:g}", noise={"kind": "gaussian", "sigma": sigma}, operator=op,
                        method=m, select={"alpha0": a0})
    elif table_id in (5, 6):
        for name in names:
            for r in (0.3, 0.1, 0.05):
                noise = {"kind": "salt_pepper", "r1": r, "r2": r} if table_id == 5 else {"kind": "random_valued", "r": r}
                for m in ("paps", "platv"):
                    add(name, "alpha0=0.01", noise=noise, method=m, select={"alpha0": 1e-2})
    else:
        raise ConfigError(f"unknown table {table_id}; tables 1 to 6 are defined")
    return rows


def find_corpus(names, corpus_dir=None):
    """Map image names to a synthetic name or a file ``<name>.png|.pgm`` in ``corpus_dir``.

    Returns ``(found, missing)``.
    """
    corpus_dir = corpus_dir or os.environ.get(CORPUS_ENV)
    found, missing = {}, []
    for name in names:
        path = None
        if corpus_dir:
            for ext in (".png", ".pgm"):
                p = Path(corpus_dir) / f"{name}{ext}"
                if p.exists():
                    path = str(p)
                    break
        if path is None and name in SYNTHETIC and (name != "cameraman" or _has_skimage()):
            path = name
        if path is None:
            missing.append(name)
        else:
            found[name] = path
    return found, missing


def _has_skimage():
    try:
        import skimage.data  # noqa: F401
    except ImportError:
        return False
    return True


DEFAULT_IMAGES = {1: ["phantom"], 2: ["cameraman"], 3: ["phantom", "cameraman", "barbara", "lena"],
                  4: ["phantom", "cameraman", "barbara", "lena"], 5: ["phantom", "cameraman", "barbara", "lena"],
                  6: ["phantom", "cameraman", "barbara", "lena"]}


def _one(args):
    image, param, cfg = args
    t = time.perf_counter()
    rec = run_experiment(cfg)
    secs = time.perf_counter() - t
    q = rec.quality
    return [image, cfg.method, _noise_label(cfg.noise, cfg.operator), param, f"{q['psnr']:.4f}",
            f"{q['mssim']:.4f}", f"{q['mae']:.5f}", rec.trace["iterations"], f"{secs:.2f}", cfg.seed]


def run_table(table_id, out_csv, images=None, corpus_dir=None, seed=0, size=256, jobs=1):
    """Sweep one table's configuration matrix and write a CSV with ``TABLE_HEADER`` columns.

    Missing corpus images are skipped and returned; if none is found a
    ``ConfigError`` is raised. Returns ``(rows, missing)``.
    """
    names = images or DEFAULT_IMAGES.get(int(table_id), [])
    found, missing = find_corpus(names, corpus_dir)
    if not found:
        raise ConfigError(f"no corpus image available for table {table_id} (missing: {', '.join(missing)})")
    configs = table_configs(table_id, found, seed=seed, size=size)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(_one, configs))
    else:
        rows = [_one(c) for c in configs]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_HEADER)
    w.writerows(rows)
    atomic_write_bytes(out_csv, buf.getvalue().encode())
    return rows, missing


def error_exit_code(exc):
    """CLI exit code: 3 for numerical failures, 2 for configuration or input errors, else ``None``."""
    cause = exc.cause if isinstance(exc, StageError) else exc
    if isinstance(cause, (NumericalError, FloatingPointError)):
        return 3
    if isinstance(cause, (ValueError, LookupError, OSError)):
        return 2
    return None


__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "StageError",
    "TABLE_HEADER",
    "error_exit_code",
    "find_corpus",
    "quality",
    "run_experiment",
    "run_table",
    "table_configs",
    "validate_trace",
]
