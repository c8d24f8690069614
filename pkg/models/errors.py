# ============================================================================
# FILE: models/errors.py
# ============================================================================
"""Exception hierarchy shared by every module.

The CLI turns any ``MRBSDEError`` into a machine-readable JSON error whose
``error`` field is the class name.
"""


class MRBSDEError(Exception):
    exit_code = 2

    @property
    def code(self):
        return type(self).__name__

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


# ----------------------------------------------------------------------------
# configuration documents
# ----------------------------------------------------------------------------
class ConfigError(MRBSDEError):
    pass


class ParseError(ConfigError):
    pass


class UnknownFunctionName(ConfigError):
    pass


class MissingField(ConfigError):
    pass


class InvalidField(ConfigError):
    pass


# ----------------------------------------------------------------------------
# model assumptions
# ----------------------------------------------------------------------------
class ModelError(MRBSDEError):
    pass


class NonIncreasingConstraint(ModelError):
    pass


class BadLipschitzBounds(ModelError):
    pass


class ZDriverNeedsLinearH(ModelError):
    pass


class TerminalConstraintViolated(ModelError):
    pass


# ----------------------------------------------------------------------------
# numerics
# ----------------------------------------------------------------------------
class NumericalError(MRBSDEError):
    pass


class NonFiniteState(NumericalError):
    pass


class BracketFailure(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass


class ShapeMismatch(NumericalError):
    pass


class PicardDivergence(NumericalError):
    pass


class DegenerateInput(NumericalError):
    pass


# ----------------------------------------------------------------------------
# oracles
# ----------------------------------------------------------------------------
class OracleError(MRBSDEError):
    pass


class TreeTooLarge(OracleError):
    pass


class AssumptionViolated(OracleError):
    pass


class UnsupportedModel(OracleError):
    pass


class OracleUnavailable(OracleError):
    pass
