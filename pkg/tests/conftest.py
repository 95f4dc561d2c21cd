import numpy as np
import pytest


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once up front so timing-sensitive tests
    measure steady-state throughput, not JIT latency."""
    from rgbdseg.config import PipelineConfig
    from rgbdseg.engine import SegmentationEngine

    frame = np.zeros((4, 4, 4), dtype=np.uint8)
    frame[:, :, 3] = 10
    for algo in ("gmm", "pbas"):
        cfg = PipelineConfig(algorithm=algo, mode="rgbd", workers=2)
        with SegmentationEngine(cfg, 4, 4) as eng:
            eng.process_frame(frame)
    yield
