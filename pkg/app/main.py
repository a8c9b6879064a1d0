"""
Application FastAPI principale - Loop Dimerization Lab
"""
import logging
import os
import time
from contextlib import asynccontextmanager
from datetime import datetime

import uvicorn
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from app.api.routes import bounds, contours, diagonalization, enumeration, simulations
from app.config import settings
from app.database import check_db_connection, init_db
from app.exceptions import ConfigParseError, InvalidConfigurationError, LoopModelError
from app.schemas import ErrorResponse
from app.utils.logger import app_logger

SLOW_REQUEST_S = 5.0


@asynccontextmanager
async def lifespan(app: FastAPI):
    """
    Démarrage: archive joignable et table créée, répertoire de sortie présent
    """
    app_logger.info(f"🚀 {settings.APP_NAME} v{settings.APP_VERSION}")
    app_logger.info(
        f"Budgets: énumération {settings.ENUM_BUDGET:.0e} configurations, "
        f"matrices denses {settings.DENSE_BUDGET}, {settings.THREADS} processus"
    )

    if not check_db_connection():
        raise RuntimeError(f"Archive inaccessible: {settings.DATABASE_URL}")
    init_db()
    os.makedirs(settings.OUTPUT_DIR, exist_ok=True)
    app_logger.info("✅ Service prêt")

    yield

    app_logger.info("🛑 Arrêt du service")


app = FastAPI(
    title=settings.APP_NAME,
    description=settings.APP_DESCRIPTION,
    version=settings.APP_VERSION,
    lifespan=lifespan,
    docs_url="/docs",
    redoc_url="/redoc",
    openapi_url="/openapi.json"
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.middleware("http")
async def log_requests(request: Request, call_next):
    """
    Journalise chaque requête avec sa durée (les calculs exacts peuvent être longs)
    """
    start = time.perf_counter()
    try:
        response = await call_next(request)
    except Exception as e:
        app_logger.error(f"❌ {request.method} {request.url.path}: {e}")
        raise

    elapsed = time.perf_counter() - start
    level = logging.WARNING if elapsed > SLOW_REQUEST_S else logging.INFO
    app_logger.log(level, f"{request.method} {request.url.path} -> {response.status_code} en {elapsed:.3f}s")
    response.headers["X-Process-Time"] = f"{elapsed:.6f}"
    return response


@app.exception_handler(LoopModelError)
async def loop_model_exception_handler(request: Request, exc: LoopModelError):
    """
    Erreurs du modèle: 422 pour une configuration invalide, 400 sinon
    """
    status_code = 422 if isinstance(exc, (InvalidConfigurationError, ConfigParseError)) else 400
    app_logger.warning(f"⚠️ {exc.code} sur {request.url.path}: {exc.message}")
    return JSONResponse(
        status_code=status_code,
        content=ErrorResponse(error=exc.code, message=exc.message).model_dump(mode="json"),
    )


@app.exception_handler(Exception)
async def global_exception_handler(request: Request, exc: Exception):
    """
    Gestionnaire global des exceptions non gérées
    """
    app_logger.error(f"Exception non gérée: {exc}", exc_info=True)

    return JSONResponse(
        status_code=500,
        content=ErrorResponse(
            error="internal-error",
            message="Une erreur inattendue s'est produite",
        ).model_dump(mode="json"),
    )


@app.get(
    "/",
    tags=["Root"],
    summary="Présentation du service",
    description="Version, documentation et liste des routes /api"
)
async def root():
    return {
        "name": settings.APP_NAME,
        "version": settings.APP_VERSION,
        "description": settings.APP_DESCRIPTION,
        "documentation": "/docs",
        "endpoints": sorted({route.path for route in app.routes if route.path.startswith("/api")}),
        "status": "online",
    }


@app.get(
    "/health",
    tags=["Health"],
    summary="État du service",
    description="Archive joignable, répertoire de sortie accessible en écriture, budgets des oracles exacts"
)
async def health_check():
    components = {
        "database": "connected" if check_db_connection() else "disconnected",
        "output_dir": "writable" if os.access(settings.OUTPUT_DIR, os.W_OK) else "unavailable",
    }
    healthy = components["database"] == "connected"
    return {
        "status": "healthy" if healthy else "unhealthy",
        "checked_at": datetime.now().isoformat(),
        "components": components,
        "limits": {
            "enum_budget": settings.ENUM_BUDGET,
            "dense_budget": settings.DENSE_BUDGET,
            "threads": settings.THREADS,
        },
        "version": settings.APP_VERSION,
    }


for router_module in (bounds, enumeration, diagonalization, contours, simulations):
    app.include_router(router_module.router)


if __name__ == "__main__":
    uvicorn.run("app.main:app", host=settings.HOST, port=settings.PORT, reload=settings.DEBUG)
