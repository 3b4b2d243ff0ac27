"""Problem files: the DE, grids, circuit, register, scaling and smoothing of one experiment."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .circuit import CircuitSpec
from .gpsr import GapSet, ShiftSet, effective_gaps, feature_generator
from .problem import CollocationSet, PolynomialDE
from .quantum import StateVector
from .rydberg import RegisterGeometry, interaction_operator, multiplexed_geometry
from .smoothing import SmootherConfig
from .trainer import OutputScaling


class ProblemFileError(ValueError):
    pass


@dataclass(frozen=True)
class Problem:
    de: PolynomialDE
    collocation: CollocationSet
    thetas: tuple[float, ...]
    qel_theta: float
    shifts: ShiftSet
    circuit: CircuitSpec
    geometry: RegisterGeometry
    scaling: OutputScaling = OutputScaling()
    boundary_weight: float = 1.0
    coincidence_tolerance: float = 1e-3
    smoothing: SmootherConfig = SmootherConfig()
    n_effective_gaps: int = 2
    fixed_gaps: tuple[float, ...] | None = None
    name: str = "problem"
    source: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def copies(self) -> int:
        return len(self.geometry.group_ids())

    def sub_register(self) -> RegisterGeometry:
        """The register of a single copy; copies are simulated independently."""
        return self.geometry.copy(self.geometry.group_ids()[0])

    def gaps(self) -> GapSet:
        """Effective gaps of the ideal square feature pulse, unless fixed in the file."""
        if self.fixed_gaps:
            return GapSet(self.fixed_gaps)
        reg = self.sub_register()
        G = feature_generator(self.circuit.fm_omega, interaction_operator(reg), reg.n_atoms)
        return effective_gaps(G, StateVector.ground(reg.n_atoms), self.n_effective_gaps)

    def config_hash(self, **extra) -> str:
        doc = {"problem": self.source, **extra}
        text = json.dumps(doc, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _require(doc, section, key):
    try:
        return doc[section][key]
    except KeyError as exc:
        raise ProblemFileError(f"missing [{section}] {key}") from exc


def problem_from_dict(doc: dict, name: str = "problem") -> Problem:
    try:
        de_doc = doc["de"]
        de = PolynomialDE(
            coefficients=tuple(_require(doc, "de", "coefficients")),
            scale=float(de_doc.get("scale", 1.0)),
            boundary_x=float(_require(doc, "de", "boundary_x")),
            boundary_value=float(de_doc.get("boundary_value", 0.0)),
            domain=tuple(_require(doc, "de", "domain")),
        )
        grids = doc["grids"]
        collocation = CollocationSet(tuple(_require(doc, "grids", "collocation")), tuple(grids.get("qel_points", ())))
        collocation.check_inside(de)
        thetas = tuple(float(t) for t in _require(doc, "grids", "theta"))
        if not thetas:
            raise ProblemFileError("theta grid is empty")
        diff = doc.get("differentiation", {})
        shifts = ShiftSet(tuple(diff.get("shifts", (0.90, 2.47))))
        gaps = diff.get("effective_gaps")
        circuit = CircuitSpec(**doc.get("circuit", {}))
        reg = doc.get("register", {})
        if "atoms" in reg:
            geometry = RegisterGeometry.from_dict(reg)
        else:
            kwargs = {k: reg[k] for k in ("c6",) if k in reg}
            geometry = multiplexed_geometry(
                r=float(reg.get("spacing", 8.7)),
                separation=float(reg.get("copy_separation", 50.0)),
                copies=int(reg.get("copies", 1)),
                **kwargs,
            )
        sc = doc.get("scaling", {})
        sm = doc.get("smoothing", {})
        return Problem(
            de=de,
            collocation=collocation,
            thetas=thetas,
            qel_theta=float(grids.get("qel_theta", thetas[0])),
            shifts=shifts,
            circuit=circuit,
            geometry=geometry,
            scaling=OutputScaling(float(sc.get("multiplier", 1.0)), float(sc.get("offset", 0.0))),
            boundary_weight=float(doc.get("loss", {}).get("boundary_weight", 1.0)),
            coincidence_tolerance=float(grids.get("coincidence_tolerance", 1e-3)),
            smoothing=SmootherConfig(float(sm.get("lam", 10.0)), int(sm.get("order", 2))),
            n_effective_gaps=int(diff.get("n_effective_gaps", len(shifts))),
            fixed_gaps=tuple(gaps) if gaps else None,
            name=name,
            source=doc,
        )
    except ProblemFileError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemFileError(f"invalid problem file: {exc}") from exc


def load_problem(path: str | Path = "benchmark") -> Problem:
    """Load a TOML or JSON problem file; ``"benchmark"`` selects the bundled instance."""
    if str(path) == "benchmark":
        text = resources.files("analog_dqc").joinpath("problems/benchmark.toml").read_text()
        return problem_from_dict(tomllib.loads(text), "benchmark")
    path = Path(path)
    if not path.exists():
        raise ProblemFileError(f"problem file {path} not found")
    text = path.read_text()
    try:
        doc = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ProblemFileError(f"cannot parse {path}: {exc}") from exc
    return problem_from_dict(doc, path.stem)

