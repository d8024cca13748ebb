"""Staged end-to-end runs with a checksummed manifest.

Every data file is plain CSV or JSON written with fixed formatting, so a
rerun of the same configuration reproduces it byte for byte.  Wall times live
only in ``manifest.json``, which is not part of its own inventory.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import __version__
from .background import (VortexParams, energy, flux, sample_background, solve_profile)
from .bosons import (bosonic_equation_residuals, fermion_to_boson, translation_mode_overlap)
from .channels import radial_channel_oracle, total_kernel
from .config import RunConfig
from .errors import MissingStage, StageFailure
from .operators import assemble_D, assemble_D_boson
from .spectral import SIGN_NOTE, smallest_singulars
from .susy import algebra_passes, build_susy, verify_algebra, verify_unbroken

log = logging.getLogger(__name__)

PLOTS = ("profiles", "mode_density", "spectrum")
PROFILE_AGREEMENT_TOL = 1e-6
PROFILE_RESIDUAL_TOL = 1e-8
FLUX_TOL = 1e-3
ENERGY_BAND = (0.99, 1.01)
ADJOINT_SIGMA_MIN = 0.1
BOSON_RESIDUAL_REL = 1e-3
TRANSLATION_OVERLAP_MIN = 0.99
ALGEBRA_VECTORS = 100


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def _write_csv(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (int, np.integer)) else format(float(v), ".17g")
                        for v in row])
    return path


@dataclass
class RunManifest:
    config_hash: str
    artifact_version: str
    output_dir: str
    stages: dict = field(default_factory=dict)  # name -> {"status", "wall_time"}
    files: dict = field(default_factory=dict)  # relative path -> sha256
    summary: dict = field(default_factory=dict)

    @property
    def checks(self) -> dict:
        return self.summary.get("checks", {})

    @property
    def all_passed(self) -> bool:
        return bool(self.checks) and all(self.checks.values())

    def completed(self, stage: str) -> bool:
        return self.stages.get(stage, {}).get("status") == "ok"

    def add_file(self, path: Path) -> None:
        path = Path(path)
        rel = path.relative_to(self.output_dir).as_posix()
        self.files[rel] = _sha256(path)

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "artifact_version": self.artifact_version,
            "output_dir": str(self.output_dir),
            "stages": self.stages,
            "files": dict(sorted(self.files.items())),
            "all_passed": self.all_passed,
        }

    def write(self) -> Path:
        return _write_json(Path(self.output_dir) / "manifest.json", self.to_dict())

    @classmethod
    def load(cls, out_dir) -> "RunManifest":
        out_dir = Path(out_dir)
        d = json.loads((out_dir / "manifest.json").read_text())
        summary_path = out_dir / "summary.json"
        summary = json.loads(summary_path.read_text()) if summary_path.exists() else {}
        return cls(d["config_hash"], d["artifact_version"], str(out_dir), d["stages"],
                   d["files"], summary)


class _Run:
    """Mutable state shared between stages of one run."""

    def __init__(self, config: RunConfig, manifest: RunManifest):
        self.cfg = config
        self.manifest = manifest
        self.out = Path(manifest.output_dir)
        vx = config.vortex
        self.params = VortexParams(vx.n, vx.e, vx.v, vx.r_max, vx.m_r)
        self.summary: dict = {}
        self.checks: dict = {}
        self.profile = None
        self.bg = None
        self.D = None
        self.d_report = None

    def emit(self, path: Path) -> None:
        self.manifest.add_file(path)

    # stages --------------------------------------------------------------------

    def profile_stage(self):
        method = self.cfg.vortex.method
        other = "shooting" if method == "relaxation" else "relaxation"
        prof = solve_profile(self.params, method)
        alt = solve_profile(self.params, other)
        agreement = float(max(np.abs(prof.f - alt.f).max(), np.abs(prof.a - alt.a).max()))
        self.profile = prof
        self.emit(prof.to_csv(self.out / "profile.csv"))
        self.summary["profile"] = {
            "method": method,
            "residual_norm": float(prof.residual_norm),
            "core_coefficient": float(prof.core_coefficient),
            "cross_method": other,
            "cross_method_sup_diff": agreement,
        }
        self.checks["profile_residual"] = prof.residual_norm <= PROFILE_RESIDUAL_TOL
        self.checks["profile_methods_agree"] = agreement <= PROFILE_AGREEMENT_TOL

    def background_stage(self):
        bg = sample_background(self.profile, self.cfg.grid.m_xy)
        self.bg = bg
        self.emit(bg.to_csv(self.out / "background.csv"))
        n, e, v = self.params.n, self.params.e, self.params.v
        phi = flux(bg)
        en = energy(bg)
        quantum = 2 * np.pi * n / e
        rec = {"flux": float(phi), "energy": float(en), "winding_number": int(bg.winding_number()),
               "flux_quantum": float(quantum)}
        if n:
            rec["flux_relative_error"] = float(abs(phi / quantum - 1.0))
            rec["energy_ratio"] = float(en / (e * v * v * abs(phi)))
            self.checks["flux_quantized"] = rec["flux_relative_error"] < FLUX_TOL
            self.checks["energy_saturated"] = ENERGY_BAND[0] <= rec["energy_ratio"] <= ENERGY_BAND[1]
        else:
            self.checks["flux_quantized"] = abs(phi) < 1e-9
            self.checks["energy_saturated"] = abs(en) < 1e-9
        self.checks["winding_number"] = rec["winding_number"] == n
        self.summary["background"] = rec

    def spectrum_stage(self):
        sc = self.cfg.spectral
        self.D = assemble_D(self.bg, self.cfg.grid.scheme)
        rep = smallest_singulars(self.D, sc.k, sc.tol_zero, sc.seed)
        self.d_report = rep
        self.emit(Path(self._report_json(rep, "spectrum_D.json")))
        for j in range(rep.kernel_count):
            self.emit(rep.mode_csv(j, self.out / f"mode_D_{j}.csv"))
        self.summary["spectrum"] = {
            "kernel_count": rep.kernel_count,
            "raw_kernel_count": rep.raw_kernel_count,
            "gap_ratio": rep.gap_ratio,
            "resolved": rep.resolved,
            "sigma": [float(s) for s in rep.sigma],
        }
        self.checks["kernel_count_D"] = rep.resolved and rep.kernel_count == 2 * self.params.n

    def _report_json(self, rep, name) -> Path:
        path = self.out / name
        rep.to_json(path)
        return path

    def index_stage(self):
        sc = self.cfg.spectral
        n = self.params.n
        rep = self.d_report
        rep_h = smallest_singulars(self.D.conj_transpose("D_adjoint"), sc.k, sc.tol_zero, sc.seed)
        self.emit(self._report_json(rep_h, "spectrum_D_adjoint.json"))
        nz = rep.sigma[rep.kernel_count]
        nz_h = rep_h.sigma[rep_h.kernel_count]
        idx = {
            "n_minus": rep.kernel_count,
            "n_plus": rep_h.kernel_count,
            "witten_index": rep.kernel_count - rep_h.kernel_count,
            "fredholm_index": rep.kernel_count - rep_h.kernel_count,
            "vorticity": n,
            "resolved": rep.resolved and rep_h.resolved,
            "raw_n_minus": rep.raw_kernel_count,
            "raw_n_plus": rep_h.raw_kernel_count,
            "pairing_error": float(abs(nz - nz_h) / nz),
            "adjoint_sigma_min": float(rep_h.sigma[0]),
            "sign_note": SIGN_NOTE,
        }
        idx["supersymmetry"] = verify_unbroken(SimpleNamespace(**idx))
        ch = radial_channel_oracle(self.profile)
        ch_h = radial_channel_oracle(self.profile, adjoint=True)
        idx["channel_oracle"] = {
            "kernel_D": total_kernel(ch),
            "kernel_D_adjoint": total_kernel(ch_h),
            "per_channel_D": {str(c.m): c.kernel_count for c in ch},
            "per_channel_D_adjoint": {str(c.m): c.kernel_count for c in ch_h},
        }
        self.emit(_write_json(self.out / "index.json", idx))
        self.summary["index"] = idx
        ev = self.params.ev
        self.checks["adjoint_kernel_empty"] = (
            rep_h.resolved and rep_h.kernel_count == 0
            and rep_h.sigma[0] >= ADJOINT_SIGMA_MIN * ev
        )
        self.checks["index_magnitude"] = idx["resolved"] and abs(idx["witten_index"]) == 2 * n
        self.checks["channel_oracle"] = (
            idx["channel_oracle"]["kernel_D"] == rep.kernel_count
            and idx["channel_oracle"]["kernel_D_adjoint"] == rep_h.kernel_count
        )

    def algebra_stage(self):
        scheme = self.cfg.grid.scheme
        D = self.D if self.D is not None else assemble_D(self.bg, scheme)
        res = verify_algebra(build_susy(D), n_vectors=ALGEBRA_VECTORS, seed=self.cfg.spectral.seed)
        Db = assemble_D_boson(self.bg, scheme)
        equal = D.equals(Db)
        res_b = verify_algebra(build_susy(Db), n_vectors=ALGEBRA_VECTORS,
                               seed=self.cfg.spectral.seed)
        rec = {
            "relations_D": res,
            "relations_D_boson": res_b,
            "passes": algebra_passes(res) and algebra_passes(res_b),
            "operators_identical": equal,
            "n_vectors": ALGEBRA_VECTORS,
        }
        self.emit(_write_json(self.out / "algebra.json", rec))
        self.summary["algebra"] = rec
        self.checks["algebra_relations"] = rec["passes"]
        self.checks["operator_equality"] = equal

    def bosonmap_stage(self):
        sc = self.cfg.spectral
        n = self.params.n
        scheme = self.cfg.grid.scheme
        rep = self.d_report
        modes = []
        for j, vec in enumerate(rep.kernel_vectors()):
            pair = fermion_to_boson(vec)
            r1, r2 = bosonic_equation_residuals(pair, self.bg, scheme)
            nrm = pair.norm()
            modes.append({"mode": j, "residual_1": r1, "residual_2": r2, "norm": nrm,
                          "passes": max(r1, r2) <= BOSON_RESIDUAL_REL * nrm})
            self.emit(pair.to_csv(self.out / f"boson_mode_{j}.csv"))
        Db = assemble_D_boson(self.bg, scheme)
        rb = smallest_singulars(Db, sc.k, sc.tol_zero, sc.seed)
        rb_h = smallest_singulars(Db.conj_transpose("D_boson_adjoint"), sc.k, sc.tol_zero, sc.seed)
        rec = {
            "modes": modes,
            "boson_kernel_count": rb.kernel_count,
            "boson_adjoint_kernel_count": rb_h.kernel_count,
            "boson_index": rb.kernel_count - rb_h.kernel_count,
            "resolved": rb.resolved and rb_h.resolved,
        }
        if n == 1 and rep.kernel_count == 2:
            rec["translation_overlap"] = translation_mode_overlap(self.bg, rep.kernel_vectors())
            self.checks["translation_overlap"] = rec["translation_overlap"] >= TRANSLATION_OVERLAP_MIN
        self.emit(_write_json(self.out / "bosonmap.json", rec))
        self.summary["bosonmap"] = rec
        self.checks["boson_residuals"] = all(m["passes"] for m in modes)
        self.checks["boson_kernel_count"] = rec["resolved"] and rb.kernel_count == 2 * n
        self.checks["boson_index"] = rec["resolved"] and abs(rec["boson_index"]) == 2 * n


def run(config: RunConfig) -> RunManifest:
    """Execute the requested stages (plus their dependencies) and write reports.

    Raises StageFailure naming the failing stage; the partial manifest is
    written first.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config.config_hash(), __version__, str(out))
    state = _Run(config, manifest)
    cfg_path = out / "config.json"
    cfg_path.write_text(config.to_json() + "\n")
    manifest.add_file(cfg_path)
    for stage in config.stages_to_run():
        log.info("stage %s", stage)
        t0 = time.perf_counter()
        try:
            getattr(state, f"{stage}_stage")()
        except Exception as exc:
            manifest.stages[stage] = {"status": "failed",
                                      "wall_time": time.perf_counter() - t0,
                                      "error": f"{type(exc).__name__}: {exc}"}
            manifest.write()
            raise StageFailure(stage, exc) from exc
        manifest.stages[stage] = {"status": "ok", "wall_time": time.perf_counter() - t0}
    summary = dict(state.summary)
    summary["vorticity"] = config.vortex.n
    summary["checks"] = {k: bool(v) for k, v in state.checks.items()}
    summary["all_passed"] = all(summary["checks"].values())
    summary["sign_note"] = SIGN_NOTE
    manifest.summary = summary
    manifest.add_file(_write_json(out / "summary.json", summary))
    manifest.write()
    return manifest


def _read_csv(path: Path) -> tuple[list, np.ndarray]:
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def emit_plot_data(manifest: RunManifest, which: str) -> list[Path]:
    """Write plot-ready CSVs from a finished run.

    profiles      -> plot_profiles.csv (r,f,a)
    mode_density  -> plot_mode_density_<j>.csv (x,y,density) per zero mode,
                     density = |psi_down|^2 + |chi_up|^2
    spectrum      -> plot_spectrum.csv (index,sigma), ascending
    """
    if which not in PLOTS:
        raise ValueError(f"unknown plot {which!r}; choose from {list(PLOTS)}")
    out = Path(manifest.output_dir)
    need = {"profiles": "profile", "mode_density": "spectrum", "spectrum": "spectrum"}[which]
    if not manifest.completed(need):
        raise MissingStage(f"plot '{which}' needs the '{need}' stage")
    written = []
    if which == "profiles":
        _, data = _read_csv(out / "profile.csv")
        written.append(_write_csv(out / "plot_profiles.csv", ["r", "f", "a"], data[:, :3]))
    elif which == "spectrum":
        rep = json.loads((out / "spectrum_D.json").read_text())
        sig = sorted(rep["sigma"])
        written.append(_write_csv(out / "plot_spectrum.csv", ["index", "sigma"],
                                  [(i, s) for i, s in enumerate(sig)]))
    else:
        j = 0
        while (out / f"mode_D_{j}.csv").exists():
            _, d = _read_csv(out / f"mode_D_{j}.csv")
            dens = d[:, 2] ** 2 + d[:, 3] ** 2 + d[:, 4] ** 2 + d[:, 5] ** 2
            written.append(_write_csv(out / f"plot_mode_density_{j}.csv", ["x", "y", "density"],
                                      np.column_stack([d[:, 0], d[:, 1], dens])))
            j += 1
    for p in written:
        manifest.add_file(p)
    manifest.write()
    return written
