from .node import ServiceNode, RecoveryReport  # noqa: F401
from .config import ServiceConfig  # noqa: F401
from .journal import JournalRecord, JournalWriter, read_journal  # noqa: F401
