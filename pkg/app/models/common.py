from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict


class Health(BaseModel):
    status: str = "ok"
    scripted: bool = False


class TermKind(str, Enum):
    CLASS = "class"
    OBJECT_PROPERTY = "object_property"
    DATA_PROPERTY = "data_property"

    @property
    def is_property(self) -> bool:
        return self is not TermKind.CLASS

    @property
    def label(self) -> str:
        return self.value.replace("_", " ")


class CqCategory(str, Enum):
    DATA_PROPERTY = "DataProperty"
    OBJECT_PROPERTY = "ObjectProperty"
    REIFICATION = "Reification"
    RESTRICTION = "Restriction"


class Technique(str, Enum):
    MEMORYLESS = "MemorylessCQbyCQ"
    ONTOGENIA = "Ontogenia"

    @classmethod
    def parse(cls, value: str) -> "Technique":
        key = value.strip().lower()
        for item in cls:
            if key in {item.value.lower(), item.name.lower()}:
                return item
        raise ValueError(f"unknown technique: {value}")


class GenerationMode(str, Enum):
    INDEPENDENT = "independent"
    INCREMENTAL = "incremental"


class Diagnostic(BaseModel):
    """A non-fatal finding produced while loading or checking data."""

    model_config = ConfigDict(frozen=True)

    code: str
    message: str
    subject: Optional[str] = None


class RequiredTerm(BaseModel):
    """A named term a validation query needs, with the kind it must have."""

    model_config = ConfigDict(frozen=True)

    iri: str
    kind: TermKind

    def sort_key(self) -> tuple:
        return (self.kind.value, self.iri)
