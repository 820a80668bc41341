"""Exception hierarchy shared by every module."""


class GeoPriorError(Exception):
    """Base class for all validation-type failures."""


class DatasetValidationError(GeoPriorError):
    """Raised with every row-level violation found, never just the first."""

    def __init__(self, violations):
        self.violations = list(violations)
        head = "; ".join(str(v) for v in self.violations[:5])
        more = len(self.violations) - 5
        if more > 0:
            head += f"; ... and {more} more"
        super().__init__(f"{len(self.violations)} violation(s): {head}")

    @property
    def codes(self):
        return [v.code for v in self.violations]


class InvalidConfig(GeoPriorError):
    pass


class VocabularyMismatch(GeoPriorError):
    pass


class LengthMismatch(GeoPriorError):
    pass


class HeaderMismatch(GeoPriorError):
    pass


class MissingObservation(GeoPriorError):
    def __init__(self, obs_id, where=""):
        self.obs_id = obs_id
        msg = f"observation {obs_id!r} missing"
        if where:
            msg += f" from {where}"
        super().__init__(msg)


class KOutOfRange(GeoPriorError):
    pass


class ShapeMismatch(GeoPriorError):
    pass


class AllEmpty(GeoPriorError):
    pass


class AllZeroWeights(GeoPriorError):
    pass


class InfeasibleSpec(GeoPriorError):
    pass


class UnsupportedVersion(GeoPriorError):
    pass


class CorruptFile(GeoPriorError):
    pass


class InvalidProbabilities(GeoPriorError):
    pass
