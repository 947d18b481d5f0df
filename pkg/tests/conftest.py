import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qlambda.program import load_program

PROGRAMS = Path(__file__).resolve().parent.parent / "programs"

DELTA = r"(\!x. meas(U[H] new, \y.y, x !x))"
COIN = f"{DELTA} !{DELTA}"
ENTANGLED = r"let <x,y> = U[CNOT] <U[H] new, new> in meas(y, \z.z, \z.z) x"
OMEGA = r"(\!x. x !x) !(\!x. x !x)"


def program_file(name: str):
    return load_program((PROGRAMS / f"{name}.ql").read_text())


@pytest.fixture
def coin():
    return program_file("coin")


@pytest.fixture
def entangled():
    return program_file("entangled")
