import os
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

try:
    import yaml

    _HAS_YAML = True
except ImportError:
    _HAS_YAML = False

from bench import families
from core.config import get_config
from core.errors import DimensionError, UnknownFamilyError
from core.tape import Tape, record

DEFAULT_REGISTRY = os.path.join(os.path.dirname(os.path.abspath(__file__)), "registry.yaml")


@dataclass
class FamilySpec:
    name: str
    pattern: str
    builder: Callable[..., Any]
    min_n: int
    description: str = ""
    nnz_formula: str = ""
    params: dict[str, Any] = field(default_factory=dict)

    def program(self, x):
        return self.builder(x, **self.params)

    def expected_nnz(self, n: int) -> int:
        return families.NNZ[self.builder.__name__](n, **self.params)


class FamilyManager:
    def __init__(self, registry_path: str = DEFAULT_REGISTRY, lcg_seed: Optional[int] = None) -> None:
        self.registry_path = registry_path
        self.lcg_seed = get_config().get_lcg_seed() if lcg_seed is None else lcg_seed
        self._families: dict[str, FamilySpec] = {}
        self._load_registry()

    def _load_registry(self) -> None:
        if not os.path.isfile(self.registry_path):
            raise FileNotFoundError(f"Family registry not found: {self.registry_path}")
        if not _HAS_YAML:
            raise RuntimeError("PyYAML is required to load the family registry.")
        with open(self.registry_path, encoding="utf-8") as f:
            data = yaml.safe_load(f)

        for m in data.get("families", []):
            builder_name = m.get("builder", m["id"])
            if builder_name not in families.BUILDERS:
                raise ValueError(f"Family '{m['id']}' names unknown builder '{builder_name}'")
            params = dict(m.get("params") or {})
            if builder_name == "irregular":
                params["seed"] = self.lcg_seed
            entry = FamilySpec(
                name=m["id"],
                pattern=m.get("pattern", ""),
                builder=families.BUILDERS[builder_name],
                min_n=int(m.get("min_n", 1)),
                description=m.get("description", ""),
                nnz_formula=str(m.get("nnz", "")),
                params=params,
            )
            self._families[entry.name] = entry

    def list_families(self) -> list[FamilySpec]:
        return list(self._families.values())

    def names(self) -> list[str]:
        return list(self._families)

    def get_family(self, name: str) -> FamilySpec:
        if name not in self._families:
            known = ", ".join(self._families)
            raise UnknownFamilyError(f"Unknown family: {name} (known: {known})")
        return self._families[name]

    def make_family(self, name: str, n: int) -> Tape:
        spec = self.get_family(name)
        if n < spec.min_n:
            raise DimensionError(f"family '{name}' needs n >= {spec.min_n}, got {n}")
        return record(spec.program, n)

    def expected_nnz(self, name: str, n: int) -> int:
        return self.get_family(name).expected_nnz(n)


_manager: Optional[FamilyManager] = None


def get_family_manager() -> FamilyManager:
    global _manager
    if _manager is None:
        _manager = FamilyManager()
    return _manager


def reset_family_manager() -> None:
    global _manager
    _manager = None


def make_family(name: str, n: int) -> Tape:
    return get_family_manager().make_family(name, n)


def expected_nnz(name: str, n: int) -> int:
    return get_family_manager().expected_nnz(name, n)
