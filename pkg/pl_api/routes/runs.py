# Folder: platter/pl_api/routes
# File:   runs.py

from typing import Optional

from fastapi import APIRouter, HTTPException, Query

from pl_drivers.storage.run_store import get_run
from pl_runtime.adapters.registry import dispatch

router = APIRouter(prefix="/runs", tags=["Runs"])


@router.get("")
def runs(limit: int = Query(20, ge=1, le=500), command: Optional[str] = None):
    return {"ok": True, "runs": dispatch("runs", limit=limit, command=command)}


@router.get("/{run_id}")
def run(run_id: str):
    row = get_run(run_id)
    if row is None:
        raise HTTPException(status_code=404, detail={"kind": "NotFound", "message": f"no run {run_id}"})
    return {"ok": True, "run": row}
