"""Prompt templates, antonym adjective pairs and the attribute registry.

Registry file format (UTF-8 text, one record per line, ``#`` starts a comment)::

    attribute = Positive adjective | Negative adjective | T1

Whitespace around ``=`` and ``|`` is stripped; the template id is optional and
defaults to T1.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError, ConflictError, InputError, RegistryLookupError

SLOT = "[text]"

TEMPLATES = {
    "T1": "[text] photo.",
    "T2": "A photo of [text].",
    "T3": "There is [text] in the photo.",
}

# overall-quality adjective sets compared in the template/adjective ablation
ADJECTIVE_PRESETS = {
    "a": ("Good", "Bad"),
    "b": ("High quality", "Low quality"),
    "c": ("High definition", "Low definition"),
}

QUALITY_ATTRIBUTES = ("brightness", "noisiness", "colorfulness", "sharpness", "contrast")
ABSTRACT_ATTRIBUTES = (
    "complex", "natural", "happy", "scary", "new",
    "warm", "real", "beautiful", "lonely", "relaxing",
)

_SHIPPED = {
    "quality": ("Good", "Bad"),
    "brightness": ("Bright", "Dark"),
    "noisiness": ("Clean", "Noisy"),
    "colorfulness": ("Colorful", "Dull"),
    "sharpness": ("Sharp", "Blurry"),
    "contrast": ("High contrast", "Low contrast"),
    "complex": ("Complex", "Simple"),
    "natural": ("Natural", "Synthetic"),
    "happy": ("Happy", "Sad"),
    "scary": ("Scary", "Peaceful"),
    "new": ("New", "Old"),
    "warm": ("Warm", "Cold"),
    "real": ("Real", "Abstract"),
    "beautiful": ("Beautiful", "Ugly"),
    "lonely": ("Lonely", "Sociable"),
    "relaxing": ("Relaxing", "Stressful"),
}


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    pattern: str

    def __post_init__(self):
        if self.pattern.count(SLOT) != 1:
            raise ConfigurationError(f"template {self.id!r} must contain exactly one {SLOT} slot")


@dataclass(frozen=True)
class PromptPair:
    attribute: str
    positive_text: str
    negative_text: str
    template_id: str = "T1"

    def __post_init__(self):
        if self.positive_text == self.negative_text:
            raise ConfigurationError(f"prompt pair for {self.attribute!r} has identical texts")

    @property
    def texts(self) -> tuple[str, str]:
        return self.positive_text, self.negative_text


def get_template(template_id: str) -> PromptTemplate:
    try:
        return PromptTemplate(template_id, TEMPLATES[template_id])
    except KeyError:
        raise ConfigurationError(f"unknown template {template_id!r}; known: {', '.join(TEMPLATES)}") from None


def render(template, adjective: str) -> str:
    if isinstance(template, str):
        template = get_template(template)
    if not adjective:
        raise InputError("adjective must be non-empty")
    return template.pattern.replace(SLOT, adjective)


def make_pair(attribute: str, positive: str, negative: str, template_id: str = "T1") -> PromptPair:
    t = get_template(template_id)
    return PromptPair(attribute, render(t, positive), render(t, negative), template_id)


def preset_pair(preset: str, template_id: str = "T1") -> PromptPair:
    """Overall-quality pair for an ablation adjective preset ("a", "b" or "c")."""
    try:
        pos, neg = ADJECTIVE_PRESETS[preset]
    except KeyError:
        raise ConfigurationError(f"unknown adjective preset {preset!r}; known: {', '.join(ADJECTIVE_PRESETS)}") from None
    return make_pair("quality", pos, neg, template_id)


class PromptRegistry:
    """Attribute name -> (positive adjective, negative adjective, template id)."""

    def __init__(self, entries=None):
        self._entries: dict[str, tuple[str, str, str]] = {}
        self._lock = threading.Lock()
        for name, entry in (entries or {}).items():
            pos, neg, *rest = entry
            self._entries[name] = (pos, neg, rest[0] if rest else "T1")

    @classmethod
    def default(cls) -> "PromptRegistry":
        return cls({k: (p, n, "T1") for k, (p, n) in _SHIPPED.items()})

    def __contains__(self, attribute):
        return self._resolve(attribute) is not None

    def __len__(self):
        return len(self._entries)

    def __eq__(self, other):
        return isinstance(other, PromptRegistry) and self._entries == other._entries

    def names(self) -> list[str]:
        return list(self._entries)

    def _resolve(self, attribute):
        if attribute in self._entries:
            return attribute
        # "happy/sad" style names resolve to the positive-word key
        for name, (pos, neg, _) in self._entries.items():
            if attribute.lower() == f"{pos}/{neg}".lower():
                return name
        return None

    def get_pair(self, attribute: str, template_id: str | None = None) -> PromptPair:
        """The registered pair, optionally re-rendered with another template."""
        name = self._resolve(attribute)
        if name is None:
            raise RegistryLookupError(
                f"unknown attribute {attribute!r}; registered: {', '.join(self._entries)}")
        pos, neg, tid = self._entries[name]
        return make_pair(name, pos, neg, template_id or tid)

    def register_pair(self, attribute: str, positive: str, negative: str, template_id: str = "T1",
                      overwrite: bool = False, persist_to=None) -> None:
        if not attribute or "=" in attribute or "|" in attribute:
            raise InputError(f"invalid attribute name {attribute!r}")
        make_pair(attribute, positive, negative, template_id)  # validates
        with self._lock:
            if attribute in self._entries and not overwrite:
                raise ConflictError(f"attribute {attribute!r} already registered; pass overwrite=True to replace it")
            self._entries[attribute] = (positive, negative, template_id)
        if persist_to is not None:
            self.save(persist_to)

    def pairs(self, attributes=None) -> list[PromptPair]:
        return [self.get_pair(a) for a in (attributes if attributes is not None else self._entries)]

    def dumps(self) -> str:
        lines = ["# attribute = positive | negative | template"]
        lines += [f"{k} = {p} | {n} | {t}" for k, (p, n, t) in self._entries.items()]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str, source="<string>") -> "PromptRegistry":
        entries = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            fields = [f.strip() for f in value.split("|")]
            if not sep or not key.strip() or len(fields) not in (2, 3) or not all(fields):
                raise ConfigurationError(f"{source}:{lineno}: expected 'attribute = pos | neg [| T1]', got {raw!r}")
            tid = fields[2] if len(fields) == 3 else "T1"
            get_template(tid)
            entries[key.strip()] = (fields[0], fields[1], tid)
        return cls(entries)

    @classmethod
    def load(cls, path) -> "PromptRegistry":
        path = Path(path)
        return cls.loads(path.read_text(encoding="utf-8"), source=str(path))


_default_registry = PromptRegistry.default()


def get_pair(attribute: str) -> PromptPair:
    return _default_registry.get_pair(attribute)
