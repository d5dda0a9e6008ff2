"""Exception types shared across the toolchain."""


class RtloptError(Exception):
    """Base class for all toolchain errors."""


class ParseError(RtloptError):
    """Source rejected by the frontend.

    Formats as ``file:line:col: message`` so editors can jump to the span.
    """

    def __init__(self, message, filename="<input>", line=0, col=0):
        self.filename = filename
        self.line = line
        self.col = col
        self.message = message
        super().__init__(f"{filename}:{line}:{col}: {message}")


class ElaborationError(RtloptError):
    """Design-level wiring problem (ports, hierarchy, widths)."""


class UnknownModule(ElaborationError):
    pass


class CycleError(ElaborationError):
    """Instantiation graph contains a cycle."""


class CombinationalLoop(RtloptError):
    """Combinational items form a dependency cycle."""


class WidthMismatch(RtloptError):
    """Stimulus value does not fit the port it drives."""


class PortMismatch(RtloptError):
    """Two modules under comparison expose different port lists."""


class PatternMismatch(RtloptError):
    """Two modules under comparison disagree on comb/seq classification."""


class UnknownRule(RtloptError):
    pass


class NotApplicable(RtloptError):
    """A rewrite rule's structural precondition does not hold."""


class RewriteError(RtloptError):
    """A rewrite produced a patch that violates the patch invariants."""


class InfeasibleBounds(RtloptError):
    """Partition bounds cannot be met on the given tree."""


class EmptyPath(RtloptError):
    """Join query given an empty type path."""


class LengthMismatch(RtloptError):
    """Aggregate called on report lists of different lengths."""


class ProposerError(RtloptError):
    """External proposer transport or protocol failure."""


class ConfigError(RtloptError):
    """Pipeline configuration rejected (unknown key, bad value)."""


class SimulationError(RtloptError):
    """Simulator cannot run the module as given."""
