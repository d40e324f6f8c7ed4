from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from api.v1.endpoints import enhance_router, benchmark_router
import logging

logger = logging.getLogger(__name__)

# Create FastAPI app
app = FastAPI(
    title="Retinex Enhancement API",
)

# Add CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["http://localhost:5173", "http://localhost:5174"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Root endpoint for health checks
@app.get("/")
async def root():
    logger.info("Request: GET /")
    response = {"message": "Retinex Enhancement API is running", "status": "healthy"}
    logger.info("Response: 200")
    return response

# Include routers
app.include_router(enhance_router.router, prefix="/api/v1", tags=["Enhancement"])
app.include_router(benchmark_router.router, prefix="/api/v1", tags=["Benchmark"])


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
