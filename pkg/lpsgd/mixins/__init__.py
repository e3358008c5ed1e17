from .analysis import AnalysisMixin  # noqa
from .logreg import LogregMixin  # noqa
from .synthetic import SyntheticMixin  # noqa
