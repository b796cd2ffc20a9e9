"""Reader/writer for the flat sectioned key-value text format.

::

    # comment
    [section optional-argument ...]
    key = value        # trailing comment

Keys are unique within a section unless listed as repeatable. Every
entry remembers the line it came from so callers can produce error
messages that point at the offending line.
"""

from dataclasses import dataclass, field


class FormatError(ValueError):
    """Malformed file, unknown key, or invalid value. Message cites the line."""

    def __init__(self, message, line=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line
        self.path = path


@dataclass
class Entry:
    key: str
    value: str
    line: int


@dataclass
class Section:
    name: str
    args: tuple
    line: int
    entries: list = field(default_factory=list)
    path: str = None

    @property
    def title(self):
        return " ".join((self.name,) + self.args)

    def get(self, key):
        for e in self.entries:
            if e.key == key:
                return e
        return None

    def all(self, key):
        return [e for e in self.entries if e.key == key]

    def keys(self):
        return [e.key for e in self.entries]

    def check_keys(self, allowed, required=(), repeatable=()):
        seen = set()
        for e in self.entries:
            if e.key not in allowed:
                raise FormatError(f"unknown key {e.key!r} in [{self.title}]", e.line, self.path)
            if e.key in seen and e.key not in repeatable:
                raise FormatError(f"duplicate key {e.key!r} in [{self.title}]", e.line, self.path)
            seen.add(e.key)
        for key in required:
            if key not in seen:
                raise FormatError(f"missing key {key!r} in [{self.title}]", self.line, self.path)

    def number(self, key, default=None, *, positive=False, nonnegative=False):
        e = self.get(key)
        if e is None:
            if default is None:
                raise FormatError(f"missing key {key!r} in [{self.title}]", self.line, self.path)
            return default
        try:
            x = float(e.value)
        except ValueError:
            raise FormatError(f"{key} = {e.value!r} is not a number", e.line, self.path) from None
        if positive and not x > 0:
            raise FormatError(f"{key} must be > 0, got {e.value}", e.line, self.path)
        if nonnegative and not x >= 0:
            raise FormatError(f"{key} must be >= 0, got {e.value}", e.line, self.path)
        return x

    def text(self, key, default=None):
        e = self.get(key)
        if e is None:
            if default is None:
                raise FormatError(f"missing key {key!r} in [{self.title}]", self.line, self.path)
            return default
        return e.value


def parse_text(text, path=None):
    """Parse ``text`` into a list of :class:`Section`."""
    sections = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise FormatError(f"unterminated section header {raw.strip()!r}", lineno, path)
            words = line[1:-1].split()
            if not words:
                raise FormatError("empty section header", lineno, path)
            current = Section(words[0], tuple(words[1:]), lineno, path=path)
            sections.append(current)
            continue
        if "=" not in line:
            raise FormatError(f"expected 'key = value', got {raw.strip()!r}", lineno, path)
        if current is None:
            raise FormatError("key outside of any section", lineno, path)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise FormatError("empty key", lineno, path)
        current.entries.append(Entry(key, value, lineno))
    return sections


def parse_file(path):
    with open(path, encoding="utf-8") as fh:
        return parse_text(fh.read(), path=str(path))


def format_value(x):
    """Shortest text that reads back to the identical float."""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def dump(sections, header=None):
    """Render ``[(title, [(key, value, comment), ...]), ...]`` as text."""
    out = []
    if header:
        out.extend(f"# {line}" if line else "#" for line in header.splitlines())
        out.append("")
    for title, rows in sections:
        out.append(f"[{title}]")
        for row in rows:
            key, value = row[0], row[1]
            comment = row[2] if len(row) > 2 else None
            text = f"{key} = {format_value(value)}"
            if comment:
                text += f"  # {comment}"
            out.append(text)
        out.append("")
    return "\n".join(out)
