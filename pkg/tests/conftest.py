import numpy as np
import pytest
from hypothesis import settings

from weightless.kinematics import FIXED, REVOLUTE, Joint, KinematicTree

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def random_tree(rng, n_max=30, fixed_frac=0.2):
    """Random topologically ordered tree with a marked waist, feet and contact points."""
    n = int(rng.integers(3, n_max + 1))
    joints = [Joint("root", None, (0.0, 0.0, 0.0), mass=float(rng.uniform(0.5, 5.0)), kind=FIXED)]
    for i in range(1, n):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        kind = FIXED if rng.random() < fixed_frac else REVOLUTE
        joints.append(Joint(f"j{i}", int(rng.integers(0, i)), tuple(rng.uniform(-0.3, 0.3, 3)),
                            axis=tuple(axis), mass=float(rng.uniform(0.0, 3.0)), kind=kind))
    waist = int(rng.integers(0, n))
    feet = frozenset(int(i) for i in rng.choice(n, size=min(2, n), replace=False))
    contacts = frozenset(range(n))
    return KinematicTree(tuple(joints), waist, feet, contacts, name="random")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> (status, title, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{status}] {n:2d}. {title}: {detail}")
