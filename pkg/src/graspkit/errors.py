"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class GraspkitError(Exception):
    exit_code = 1


class ParseError(GraspkitError):
    """Malformed input file. ``line``/``column`` are 1-based when known."""

    exit_code = 2

    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if column is not None:
            loc.append(f"column {column}")
        prefix = ", ".join(loc)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class PreconditionError(GraspkitError):
    exit_code = 3


class ConsistencyError(GraspkitError):
    exit_code = 4


class EmptyCloud(PreconditionError):
    pass


class Insufficient(PreconditionError):
    pass


class NoObjects(PreconditionError):
    pass


class EmptyGraspable(PreconditionError):
    pass


class DegenerateContact(PreconditionError):
    pass


class DuplicateLabel(PreconditionError):
    pass
