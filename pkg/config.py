import os
from dotenv import load_dotenv

load_dotenv()


def _env_bool(name: str, default: str) -> bool:
    return os.getenv(name, default).strip().lower() in ("1", "true", "yes", "on")


class SolverDefaults:
    """Scalars of the decomposition objective and its staged solver"""
    GAMMA = float(os.getenv("RETINEX_GAMMA", "0.1"))
    LAMBDA = float(os.getenv("RETINEX_LAMBDA", "10.0"))
    SIGMA = float(os.getenv("RETINEX_SIGMA", "0.1"))
    ETA1 = float(os.getenv("RETINEX_ETA1", "1.0"))
    ETA2 = float(os.getenv("RETINEX_ETA2", "1.0"))
    STAGES = int(os.getenv("RETINEX_STAGES", "17"))
    EPS_DIV = float(os.getenv("RETINEX_EPS_DIV", "1e-4"))
    SAFEGUARD = _env_bool("RETINEX_SAFEGUARD", "true")
    MAX_HALVINGS = 8


class AdjustmentDefaults:
    """Starting point of the illumination/reflectance adjustment"""
    ALPHA = float(os.getenv("ADJUST_ALPHA", "0.5"))
    GAMMA_FLOOR = float(os.getenv("ADJUST_GAMMA_FLOOR", "0.2"))
    REFL_GAIN = float(os.getenv("ADJUST_REFL_GAIN", "0.5"))
    GAIN_MIN = 0.25
    GAIN_MAX = 4.0
    REFL_GAIN_MAX = 2.0


class GuideDefaults:
    """Pseudo normal-light guide synthesis"""
    TARGET_LUMA = float(os.getenv("GUIDE_TARGET_LUMA", "0.5"))
    CLAHE_TILES = int(os.getenv("GUIDE_CLAHE_TILES", "8"))
    CLAHE_CLIP = float(os.getenv("GUIDE_CLAHE_CLIP", "2.0"))
    DENOISE_RADIUS = int(os.getenv("GUIDE_DENOISE_RADIUS", "2"))
    DENOISE_EPS = 1e-3
    DENOISE_ITERATIONS = 2


class LossDefaults:
    """Balance weights of the decomposition and adjustment losses"""
    GAMMA_R = 0.1
    GAMMA_L = 1.0
    GAMMA_REC = 1000.0
    ETA_L = 0.05
    ETA_R = 0.05
    ETA_LBS = 0.1
    ETA_EN = 20.0
    EPS_GRAD = float(os.getenv("LOSS_EPS_GRAD", "0.01"))


class RuntimeConfig:
    OUTPUT_DIR = os.getenv("OUTPUT_DIR", "output")
    BENCHMARK_WORKERS = int(os.getenv("BENCHMARK_WORKERS", "4"))
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
    FINETUNE_ITERS = 30
    PSNR_CAP = 99.0
