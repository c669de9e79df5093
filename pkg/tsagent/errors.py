"""Exception hierarchy shared across tsagent"""

from typing import List, Optional


class TsagentError(Exception):
    """Base class for every error raised by tsagent"""


class ConfigError(TsagentError):
    """A run configuration is invalid or incomplete"""


# --------------------------------------------------------------------------- #
# Grid / simulation
# --------------------------------------------------------------------------- #

class CaseFormatError(TsagentError):
    """A case file violates the schema; ``path`` points at the offending record"""

    def __init__(self, message: str, path: str = ''):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class PowerFlowError(TsagentError):
    """Newton-Raphson could not proceed (singular Jacobian)"""


class NetworkError(TsagentError):
    """Admittance construction or Kron reduction failed"""


class StagingError(TsagentError):
    """A scenario could not be staged into simulation networks"""


# --------------------------------------------------------------------------- #
# Datasets
# --------------------------------------------------------------------------- #

class DatasetError(TsagentError):
    """Feature selection, balancing or splitting failed"""


class ContainerError(TsagentError):
    """A .tsds/.tstr/.tsw container could not be read"""


class ChecksumError(ContainerError):
    pass


class ContainerVersionError(ContainerError):
    pass


class TruncatedContainerError(ContainerError):
    pass


# --------------------------------------------------------------------------- #
# LLM gateway
# --------------------------------------------------------------------------- #

class LLMError(TsagentError):
    """A chat or embedding request failed"""


class LLMAuthError(LLMError):
    pass


class RetriesExhaustedError(LLMError):
    def __init__(self, message: str, attempts: int):
        self.attempts = attempts
        super().__init__(message)


class MockScriptError(LLMError):
    """The mock backend has no scripted response for a prompt"""

    def __init__(self, digest: str, preview: str = ''):
        self.digest = digest
        super().__init__(f"mock script has no response for digest {digest}"
                         + (f" (prompt starts: {preview!r})" if preview else ''))


class CorpusError(TsagentError):
    """The retrieval corpus is empty or unreadable"""


class PromptError(TsagentError):
    """A template could not be rendered"""


class BlockParseError(TsagentError):
    """An LLM response did not contain a usable structured block"""


# --------------------------------------------------------------------------- #
# Agents
# --------------------------------------------------------------------------- #

class RepairFailedError(TsagentError):
    def __init__(self, message: str, errors: Optional[List] = None):
        self.errors = list(errors or [])
        super().__init__(message)


class CampaignError(TsagentError):
    def __init__(self, message: str, transcript=None):
        self.transcript = transcript
        super().__init__(message)


class SearchError(TsagentError):
    pass


class TrainingError(TsagentError):
    pass


class NonFiniteGradientError(TrainingError):
    def __init__(self, layer: str):
        self.layer = layer
        super().__init__(f"non-finite gradient in layer '{layer}'")
