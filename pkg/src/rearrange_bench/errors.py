"""Exception hierarchy. Everything raised on purpose derives from BenchError."""


class BenchError(Exception):
    pass


# geometry / parsing
class InvalidRotation(BenchError, ValueError):
    pass


class NotOrthonormal(InvalidRotation):
    pass


class ImproperRotation(InvalidRotation):
    pass


class NonFinite(BenchError, ValueError):
    pass


class InvalidQuaternion(BenchError, ValueError):
    pass


class FormatError(BenchError, ValueError):
    """A file or payload does not match its documented schema."""


# scoring
class MissingObject(BenchError, KeyError):
    def __init__(self, instance_id):
        super().__init__(instance_id)
        self.instance_id = instance_id

    def __str__(self):
        return f"solution has no pose for object {self.instance_id!r}"


class NonPositiveBaseline(BenchError, ValueError):
    pass


class EmptyInput(BenchError, ValueError):
    pass


class InvalidCounts(BenchError, ValueError):
    pass


# scene generation
class EmptyCandidateSet(BenchError, LookupError):
    def __init__(self, slot_id):
        super().__init__(f"no model in the database matches slot {slot_id!r}")
        self.slot_id = slot_id


class GenerationExhausted(BenchError, RuntimeError):
    def __init__(self, max_rejections, template_index=None):
        where = "" if template_index is None else f" (template {template_index})"
        super().__init__(f"no valid scene after {max_rejections} attempts{where}")
        self.max_rejections = max_rejections
        self.template_index = template_index


# harness
class MalformedScript(BenchError, ValueError):
    pass


class UnknownInstance(BenchError, KeyError):
    def __str__(self):
        return f"unknown object instance {self.args[0]!r}"


# service
class UnknownContest(BenchError, LookupError):
    pass


class ContestClosed(UnknownContest):
    pass


class UnknownSubmission(BenchError, LookupError):
    pass


class TaskSetMismatch(BenchError, ValueError):
    pass


class PayloadTooLarge(BenchError, ValueError):
    pass


class InvalidTransition(BenchError, ValueError):
    pass


class EvaluationFailed(BenchError, RuntimeError):
    pass
