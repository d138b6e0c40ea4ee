# Folder: platter/pl_api/routes
# File:   generate.py

from fastapi import APIRouter

from pl_api.routes._errors import to_http
from pl_api.schemas import GenerateRequest, RunResponse
from pl_core.errors import PlatterError
from pl_runtime.adapters.registry import dispatch

router = APIRouter(prefix="/generate", tags=["Generate"])


@router.post("", response_model=RunResponse)
def generate(req: GenerateRequest):
    """Style grid for a directory of shape inputs; same semantics as `platter generate`."""
    try:
        res = dispatch("generate", **req.model_dump())
    except PlatterError as e:
        raise to_http(e)
    m = res["manifest"]
    return RunResponse(run_id=res["run_id"], output_dir=res["output_dir"], manifest_path=res["manifest_path"], outputs=m.outputs, metrics=m.metrics)
