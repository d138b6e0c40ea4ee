# Folder: platter/pl_api
# File:   http_app.py

from contextlib import asynccontextmanager

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from pl_api.routes import evaluate, generate, runs
from pl_drivers.storage.run_store import close_connections, db_path
from pl_runtime import PLATTER_VERSION


@asynccontextmanager
async def lifespan(app: FastAPI):
    yield
    close_connections()


app = FastAPI(title="Platter Dev API", version=PLATTER_VERSION, lifespan=lifespan)

# development only
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(runs.router)
app.include_router(generate.router)
app.include_router(evaluate.router)


@app.get("/health")
def health():
    return {"ok": True, "name": "platter-dev-api", "version": PLATTER_VERSION, "run_db": db_path()}


if __name__ == "__main__":
    import uvicorn
    uvicorn.run("pl_api.http_app:app", host="0.0.0.0", port=8080, reload=True)
