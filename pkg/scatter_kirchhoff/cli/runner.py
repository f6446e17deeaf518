"""
Run orchestration for the command-line harness

Each mode reads a validated RunConfig, computes its fields or residuals and
writes deterministic CSV/JSON files into the output directory.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from scatter_kirchhoff.config import SolverConfig, get_config
from scatter_kirchhoff.exceptions import ConfigError, SingularError, ValidationFailed
from scatter_kirchhoff.geometry import Scene
from scatter_kirchhoff.kirchhoff import total_field
from scatter_kirchhoff.models.run_config import RunConfig, RunMode
from scatter_kirchhoff.ray_optics import goa_field, insert_transmission
from scatter_kirchhoff.stationary_phase import (
    lemma1_residuals,
    lemma2_residuals,
    lemma3_residuals,
    stationary_set,
)
from scatter_kirchhoff.utils import CSV_FIELDS, module_versions, stable_hash, write_csv, write_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2

FIELD_HEADER = CSV_FIELDS + ("bc", "scene_hash", "config_hash", "versions")
COMPARE_HEADER = ("k", "x", "y", "z", "bc", "kirchhoff_re", "kirchhoff_im", "goa_re", "goa_im",
                  "error", "ratio", "scene_hash", "config_hash", "versions")


@dataclass
class RunResult:
    """Exit code and files written by one run"""
    exit_code: int
    outputs: list[Path] = field(default_factory=list)


@dataclass
class TargetConvergence:
    """Error sequence of one target over increasing k"""
    target: str
    errors: list[tuple[float, float]]
    ratios: list[float]
    passed: Optional[bool]  # None when fewer than two k values


@dataclass
class ConvergenceReport:
    """PASS/FAIL summary of err(2k)/err(k) ratios"""
    window: tuple[float, float]
    targets: list[TargetConvergence]

    @property
    def passed(self) -> Optional[bool]:
        flags = [t.passed for t in self.targets if t.passed is not None]
        return all(flags) if flags else None

    def to_dict(self) -> dict[str, Any]:
        return {
            "window": list(self.window),
            "passed": self.passed,
            "targets": [
                {
                    "target": t.target,
                    "errors": [{"k": k, "error": e} for k, e in t.errors],
                    "ratios": t.ratios,
                    "status": None if t.passed is None else ("PASS" if t.passed else "FAIL"),
                }
                for t in self.targets
            ],
        }


def convergence_report(
    errors: Mapping[str, Mapping[float, float]],
    window: tuple[float, float] = (0.3, 0.7),
) -> ConvergenceReport:
    """
    Ratios of consecutive errors per target, in increasing k

    A target passes when every ratio lies in the window; with a single k
    there is no ratio and no flag.
    """
    low, high = window
    out = []
    for target in sorted(errors):
        seq = sorted(errors[target].items())
        ratios = [e2 / e1 if e1 > 0 else float("inf") for (_, e1), (_, e2) in zip(seq[:-1], seq[1:])]
        passed = all(low <= r <= high for r in ratios) if ratios else None
        if passed is False:
            logger.warning("Convergence ratios for %s outside %s: %s", target, window, ratios)
        out.append(TargetConvergence(target=target, errors=seq, ratios=ratios, passed=passed))
    return ConvergenceReport(window=window, targets=out)


def _provenance(config: RunConfig) -> tuple[str, str, str]:
    scene_hash = stable_hash([ob.model_dump(mode="json") for ob in config.scene])
    config_hash = stable_hash(config.model_dump(mode="json"))
    return scene_hash, config_hash, module_versions()


def _target_key(x: NDArray[np.float64]) -> str:
    return "(" + ",".join(format(float(v), ".17g") for v in x) + ")"


def _field_row(k: float, x: NDArray[np.float64], value: complex, method: str, level: int,
               bc: str, prov: tuple[str, str, str]) -> list[Any]:
    return [float(k), float(x[0]), float(x[1]), float(x[2]), float(value.real), float(value.imag),
            method, level, bc, *prov]


def _run_goa(config: RunConfig, scene: Scene, targets: NDArray[np.float64], out: Path,
             solver: SolverConfig) -> list[Path]:
    prov = _provenance(config)
    rows = []
    for wave in config.wave.waves():
        for x in targets:
            for bc in config.bc:
                terms = goa_field(scene, wave, x, bc, config.max_bounces, solver)
                rows.append(_field_row(wave.k, x, terms.incident, "goa_incident", 0, bc, prov))
                for path, value in zip(terms.paths, terms.contributions):
                    rows.append(_field_row(wave.k, x, value, "goa_path", path.level, bc, prov))
                rows.append(_field_row(wave.k, x, terms.value, "goa", config.max_bounces, bc, prov))
    return [write_csv(out / "goa.csv", FIELD_HEADER, rows)]


def _run_kirchhoff(config: RunConfig, scene: Scene, targets: NDArray[np.float64], out: Path,
                   threads: int, solver: SolverConfig) -> list[Path]:
    prov = _provenance(config)
    rows = []
    for wave in config.wave.waves():
        for bc in config.bc:
            samples = total_field(scene, wave, targets, bc, config.iterations, config.ppw, threads, solver)
            for sample in samples:
                for level, value in enumerate(sample.increments):
                    rows.append(_field_row(wave.k, sample.target, value, "kirchhoff_increment", level, bc, prov))
                rows.append(_field_row(wave.k, sample.target, sample.total, "kirchhoff",
                                       config.iterations, bc, prov))
    return [write_csv(out / "kirchhoff.csv", FIELD_HEADER, rows)]


def _run_compare(config: RunConfig, scene: Scene, targets: NDArray[np.float64], out: Path,
                 threads: int, solver: SolverConfig) -> list[Path]:
    prov = _provenance(config)
    errors: dict[str, dict[float, float]] = {}
    rows = []
    for wave in config.wave.waves():
        for bc in config.bc:
            samples = total_field(scene, wave, targets, bc, config.iterations, config.ppw, threads, solver)
            for sample in samples:
                x = sample.target
                goa = goa_field(scene, wave, x, bc, config.max_bounces, solver).value
                err = abs(sample.total - goa)
                key = f"{bc}:{_target_key(x)}"
                history = errors.setdefault(key, {})
                previous = history[max(history)] if history else None
                history[wave.k] = err
                ratio = "" if previous is None else (err / previous if previous > 0 else float("inf"))
                rows.append([float(wave.k), float(x[0]), float(x[1]), float(x[2]), bc,
                             float(sample.total.real), float(sample.total.imag),
                             float(goa.real), float(goa.imag), float(err), ratio, *prov])
    report = convergence_report(errors, config.ratio_window)
    return [
        write_csv(out / "compare.csv", COMPARE_HEADER, rows),
        write_json(out / "convergence_report.json", report.to_dict()),
    ]


def validation_sweep(
    scene: Scene, config: RunConfig, targets: NDArray[np.float64], solver: SolverConfig
) -> dict[str, Any]:
    """Lemma residuals over every non-caustic member of C_l(x), l <= max_bounces, for each k"""
    tol = config.validation_tolerance
    worst = {"lemma1": 0.0, "curvature": 0.0, "determinant": 0.0, "signature": 0.0,
             "transmission_phase": 0.0, "transmission_det": 0.0}
    failures: list[dict[str, Any]] = []
    solved = skipped = 0

    def record(name: str, value: Any, k: float, x: NDArray[np.float64], ids: Sequence[int]) -> None:
        if isinstance(value, float):
            worst[name] = max(worst[name], value)
            if value <= tol:
                return
        failures.append({"check": name, "value": value, "k": k, "target": _target_key(x), "obstacles": list(ids)})

    for wave in config.wave.waves():
        for x in targets:
            for level in range(1, config.max_bounces + 1):
                for path in stationary_set(scene, wave, x, level, solver):
                    if path.caustic:
                        skipped += 1
                        continue
                    solved += 1
                    ids = path.obstacle_ids
                    record("lemma1", float(lemma1_residuals(path).max()), wave.k, x, ids)
                    try:
                        rep = lemma2_residuals(path, solver)
                    except SingularError as exc:
                        record("schur", str(exc), wave.k, x, ids)
                        continue
                    record("curvature", float(rep.curvature.max()), wave.k, x, ids)
                    record("determinant", float(rep.determinant.max()), wave.k, x, ids)
                    record("signature", float(rep.signature.max()), wave.k, x, ids)
                    if path.all_reflections:
                        for mu in insert_transmission(scene, path, solver):
                            res = lemma3_residuals(path, mu)
                            record("transmission_phase", res.phase_diff / scene.scale, wave.k, x, mu.obstacle_ids)
                            record("transmission_det", res.det_product_rel, wave.k, x, mu.obstacle_ids)
    logger.info("Validated %d paths over %d wavenumbers", solved, len(config.wave.k_values))
    return {
        "tolerance": tol,
        "paths": solved,
        "caustic_skipped": skipped,
        "max_residuals": worst,
        "failures": failures,
        "passed": not failures,
    }


def run(
    config: RunConfig,
    mode: RunMode,
    output_dir: Path,
    threads: int = 1,
    solver: Optional[SolverConfig] = None,
) -> RunResult:
    """
    Execute one run and write its files

    Returns:
        RunResult with exit code 0 and the files written

    Raises:
        ConfigError: The config's mode disagrees with the requested mode
        ValidationFailed: The validation sweep found residuals above tolerance
        ScatterError: Any module error during the run
    """
    cfg = solver or get_config()
    if config.mode is not None and config.mode != mode:
        raise ConfigError(f"config declares mode '{config.mode.value}' but '{mode.value}' was requested")
    scene = config.build_scene()
    targets = config.targets.expand()
    logger.info("Running %s on %d obstacles and %d targets", mode.value, len(scene.obstacles), len(targets))

    if mode == RunMode.GOA:
        return RunResult(EXIT_OK, _run_goa(config, scene, targets, output_dir, cfg))
    if mode == RunMode.KIRCHHOFF:
        return RunResult(EXIT_OK, _run_kirchhoff(config, scene, targets, output_dir, threads, cfg))
    if mode == RunMode.COMPARE:
        return RunResult(EXIT_OK, _run_compare(config, scene, targets, output_dir, threads, cfg))

    summary = validation_sweep(scene, config, targets, cfg)
    summary["scene_hash"], summary["config_hash"], summary["versions"] = _provenance(config)
    path = write_json(output_dir / "validation_report.json", summary)
    if not summary["passed"]:
        raise ValidationFailed(
            f"{len(summary['failures'])} residuals above {summary['tolerance']:.1e}, see {path}"
        )
    return RunResult(EXIT_OK, [path])
