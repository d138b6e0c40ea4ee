# Folder: platter/pl_api/routes
# File:   _errors.py

from fastapi import HTTPException

from pl_core.errors import ConfigError, PlatterError

# exit class -> HTTP status
_STATUS = {ConfigError: 422}


def to_http(e: PlatterError) -> HTTPException:
    status = next((code for cls, code in _STATUS.items() if isinstance(e, cls)), 400)
    return HTTPException(status_code=status, detail=e.to_dict())
