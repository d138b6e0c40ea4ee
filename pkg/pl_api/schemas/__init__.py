from .schemas import EvaluateRequest, GenerateRequest, RunResponse

__all__ = ["EvaluateRequest", "GenerateRequest", "RunResponse"]
