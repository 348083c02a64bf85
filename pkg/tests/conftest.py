import numpy as np
import pytest

from spindecay.spinsys import SpinSystem

# Axial Cu(II)-like S=1/2, I=3/2 benchmark system used throughout the suite.
CU_G_PAR = 2.0898
CU_G_PERP = 2.0215
CU_A_PAR = 495.4
CU_A_PERP = 118.0
CU_GN = 1.4824
MW_FREQ = 9500.0
WORKING_FIELD = 3357.0


@pytest.fixture(scope="session")
def cu_system() -> SpinSystem:
    return SpinSystem.axial(CU_G_PAR, CU_G_PERP, CU_A_PAR, CU_A_PERP, 1.5, CU_GN, label="Cu")


@pytest.fixture(scope="session")
def bare_electron() -> SpinSystem:
    return SpinSystem(g_tensor=np.diag([2.0023, 2.0023, 2.0023]))
