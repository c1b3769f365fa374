"""Exception types shared across the package."""


class MapFormatError(ValueError):
    """Map text does not follow the ``mapmeta`` grid format."""


class InvalidPoseError(ValueError):
    """Sensor pose lies inside an occupied (or out-of-map) cell."""


class ContractViolation(RuntimeError):
    """A caller broke an operation's precondition or a graph invariant failed."""


class UnreachableFrontiersError(ContractViolation):
    """Some frontier nodes cannot be reached from the current node."""

    def __init__(self, node_ids):
        self.node_ids = list(node_ids)
        super().__init__(f"unreachable frontier nodes: {self.node_ids}")


class GraphParseError(ValueError):
    """Serialized graph text is malformed."""


class ConfigError(ValueError):
    """One or more episode configuration fields are invalid.

    All problems found during validation are collected in ``problems``.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
