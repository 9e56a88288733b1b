"""Exception hierarchy.

Every error raised by a pipeline stage derives from :class:`ScforgeError` and
carries the name of the stage that raised it, so the CLI can report where a
run stopped.
"""


class ScforgeError(Exception):
    stage = "generic"

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context

    def describe(self):
        parts = [f"[{self.stage}] {self}"]
        for key, value in sorted(self.context.items()):
            parts.append(f"  {key}: {value}")
        return "\n".join(parts)


class ConfigError(ScforgeError):
    stage = "config"


# expr
class ExprError(ScforgeError):
    stage = "expr"


class ExprSyntaxError(ExprError):
    def __init__(self, message, position, source=""):
        super().__init__(f"{message} at position {position}", position=position)
        self.position = position
        self.source = source


class UnknownIdentifier(ExprError):
    def __init__(self, name, position):
        super().__init__(f"unknown identifier {name!r} at position {position}",
                         position=position)
        self.name = name
        self.position = position


class DomainError(ExprError):
    pass


# grid
class GridError(ScforgeError):
    stage = "grid"


class GridTooSmall(GridError):
    pass


class GridMismatch(GridError):
    pass


class NonFiniteField(GridError):
    pass


# seed
class SeedError(ScforgeError):
    stage = "seed"


class IncompatibleCorner(SeedError):
    pass


class SingularOperator(SeedError):
    def __init__(self, message, smallest_singular_value):
        super().__init__(message, smallest_singular_value=smallest_singular_value)
        self.smallest_singular_value = smallest_singular_value


class NotImmersed(SeedError):
    def __init__(self, message, nodes):
        super().__init__(message, bad_nodes=len(nodes), first=list(nodes[:5]))
        self.nodes = nodes


# surfgeo / classify
class DegenerateMetric(ScforgeError):
    stage = "surfgeo"


class DenominatorDegenerate(ScforgeError):
    stage = "classify"


class FrameDegenerate(ScforgeError):
    stage = "classify"


# hyper
class HyperError(ScforgeError):
    stage = "hyper"


class SingularPoint(HyperError):
    def __init__(self, message, nodes):
        super().__init__(message, singular_nodes=len(nodes))
        self.nodes = nodes


class FrameDiscontinuity(HyperError):
    pass


class RankDeviation(HyperError):
    pass


class SpanViolation(HyperError):
    pass


class AllProportionalToIdentity(HyperError):
    pass


# bending
class BendingError(ScforgeError):
    stage = "bending"


class NotSpecialPair(BendingError):
    pass


class ContractViolation(BendingError):
    def __init__(self, message, residual, **context):
        super().__init__(message, residual=residual, **context)
        self.residual = residual


class PathDependence(BendingError):
    pass


# family
class FamilyError(ScforgeError):
    stage = "family"


class NotImmersedAt(FamilyError):
    pass


class LeafConstancyViolation(FamilyError):
    pass


class TypeFlip(FamilyError):
    pass


class MinimalSurfaceGuard(FamilyError):
    pass


class EigenDegeneracy(FamilyError):
    pass


class CertificateFailure(FamilyError):
    def __init__(self, message, clause, **context):
        super().__init__(message, clause=clause, **context)
        self.clause = clause


class GateFailure(ScforgeError):
    """A detector residual crossed its bound; ``stage`` names the detector."""

    def __init__(self, stage, message, **context):
        super().__init__(message, **context)
        self.stage = stage
