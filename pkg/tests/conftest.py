import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from recokit import InteractionSet, generate_synthetic  # noqa: E402


@pytest.fixture
def write_csv(tmp_path):
    def _write(text, name="data.csv"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return _write


@pytest.fixture(scope="session")
def planted():
    return generate_synthetic(n_users=200, n_items=100, rank=3, density=0.3, noise_sigma=0.1,
                              seed=5)


def random_set(rng, n_users=10, n_items=20, n=60, t_max=50):
    """Random interaction set with duplicate pairs and timestamp ties."""
    records = [
        (f"u{rng.integers(n_users)}", f"i{rng.integers(n_items)}",
         float(rng.integers(1, 6)), int(rng.integers(t_max)))
        for _ in range(n)
    ]
    return InteractionSet.from_records(records)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


SMOKE_CONFIG = """\
seed = {seed}
output = "{output}"

[data.synthetic]
n_users = 200
n_items = 100
rank = 3

[split]
method = "random"
ratios = [0.8, 0.2]

[model]
algorithm = "als"

[evaluate]
k = 10
"""


def write_smoke_config(directory, seed=42, output=None, extra=""):
    """Write the synthetic end-to-end config and return its path."""
    output = output or os.path.join(directory, "out")
    path = os.path.join(directory, "config.toml")
    with open(path, "w", encoding="utf-8") as f:
        f.write(SMOKE_CONFIG.format(seed=seed, output=output) + extra)
    return path


ACCEPTANCE_LINES = []


def record_criterion(number, name, passed, detail=""):
    """Remember one acceptance result; printed in the terminal summary."""
    line = f"criterion {number} {name}: {'PASS' if passed else 'FAIL'}"
    ACCEPTANCE_LINES.append(line + (f" ({detail})" if detail else ""))
    print(ACCEPTANCE_LINES[-1])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
