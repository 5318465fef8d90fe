"""Exception types shared across the package."""


class BayesTeachError(Exception):
    """Base class for all package-specific errors."""


class EmptyDataset(BayesTeachError):
    """An operation that needs at least one item received none."""


class NonFiniteLoss(BayesTeachError):
    """Training loss became NaN or infinite (usually a divergent learning rate)."""


class PoolEmpty(BayesTeachError):
    """A confusion-category pool has no images, so no teaching set can exist."""

    def __init__(self, category: str):
        super().__init__(f"category pool '{category}' is empty")
        self.category = category


class NoTeachingSetFound(BayesTeachError):
    """No sampled candidate drove the learner posterior inside epsilon."""

    def __init__(self, target_id: str, n_candidates: int, epsilon: float,
                 best_prob: float):
        super().__init__(
            f"no teaching set for target '{target_id}' after {n_candidates} "
            f"candidates (epsilon={epsilon:g}, best learner probability "
            f"{best_prob!r})")
        self.target_id = target_id
        self.n_candidates = n_candidates
        self.epsilon = epsilon
        self.best_prob = best_prob


class OutOfRange(BayesTeachError):
    """A scalar argument fell outside its documented domain."""


class BadMagic(BayesTeachError):
    """A probability-map file does not start with the expected header."""


class BadDimensions(BayesTeachError):
    """A probability-map file's payload does not match its declared shape."""


class ValueOutOfRange(BayesTeachError):
    """A probability-map file contains values outside [0, 1] or non-finite."""


class DuplicateId(BayesTeachError):
    """A manifest lists the same image id twice."""


class MissingFile(BayesTeachError):
    """A manifest references a file that does not exist."""


class SchemaError(BayesTeachError):
    """A JSON document does not match the expected schema."""


class InsufficientCategory(BayesTeachError):
    """A confusion category has too few images to build a study plan."""

    def __init__(self, category: str, needed: int, available: int):
        super().__init__(
            f"category '{category}' has {available} usable images, "
            f"needs {needed}")
        self.category = category
        self.needed = needed
        self.available = available


class OddCount(BayesTeachError):
    """Pairing requires an even number of candidates."""


class DimensionMismatch(BayesTeachError):
    """Probability maps being compared have different shapes."""


class UnknownSession(BayesTeachError):
    """No session exists with the given id."""


class OutOfOrder(BayesTeachError):
    """A response arrived for a trial/phase that is not the current one."""


class ValidationError(BayesTeachError):
    """A response payload violates the protocol rules."""
