import numpy as np
import pytest

from chain_synthesis.core.error import FileFormatError, InputError
from chain_synthesis.core.schemas import CouplingStep, SynthesisPlan
from chain_synthesis.core.symplectic import rotation, squeeze
from chain_synthesis.core.synthesis import synthesize
from chain_synthesis.utils.serialization import (
    base_header,
    file_hash,
    format_float,
    matrix_hash,
    read_matrix,
    read_plan,
    write_matrix,
    write_negativity,
    write_plan,
)


def test_format_float_is_exact():
    for value in (0.1, 1.0 / 3.0, -2.5e-17, 1e300):
        assert float(format_float(value)) == value


def test_base_header_has_version():
    header = base_header(seed=3)
    assert "version" in header
    assert header["seed"] == 3


def test_matrix_hash():
    assert matrix_hash(np.eye(2)) == matrix_hash(np.eye(2))
    assert matrix_hash(np.eye(2)) != matrix_hash(np.eye(2) * (1 + 1e-15))
    assert matrix_hash(np.zeros((2, 2))) != matrix_hash(np.zeros((1, 4)))


def test_write_read_matrix(tmp_path, random_target):
    T = random_target(3)
    path = write_matrix(tmp_path / "target.csv", T, base_header(seed=0), "target")

    assert np.array_equal(read_matrix(path), T)
    assert path.read_text().startswith("# target\n# convention: ")


def test_read_matrix_not_a_number(tmp_path):
    path = tmp_path / "target.csv"
    path.write_text("# hand written\n1,0\nx,1\n")
    try:
        read_matrix(path)
        assert False
    except FileFormatError as error:
        assert error.line == 3
        assert error.field == "column 1"
        assert "line: `3`" in str(error)


def test_read_matrix_ragged(tmp_path):
    path = tmp_path / "target.csv"
    path.write_text("1,0\n0\n")
    try:
        read_matrix(path)
        assert False
    except FileFormatError as error:
        assert error.line == 2


def test_read_matrix_not_square(tmp_path):
    path = tmp_path / "target.csv"
    path.write_text("1,0,0\n0,1,0\n")
    try:
        read_matrix(path)
        assert False
    except FileFormatError:
        pass


def test_read_matrix_missing_file(tmp_path):
    try:
        read_matrix(tmp_path / "missing.csv")
        assert False
    except InputError:
        pass


def test_write_read_plan(tmp_path, random_target):
    plan = synthesize(random_target(3), seed=4)
    path = write_plan(tmp_path / "plan.txt", plan, dict(input_hash="abc"))
    loaded = read_plan(path)

    assert loaded.chain_length == plan.chain_length
    assert loaded.seed == 4
    assert loaded.variant == "row"
    assert loaded.stage_boundaries == plan.stage_boundaries
    assert loaded.stage_modes == plan.stage_modes
    assert np.array_equal(loaded.target, plan.target)
    assert [step.site for step in loaded.steps] == [step.site for step in plan.steps]
    for a, b in zip(loaded.steps, plan.steps):
        assert np.array_equal(a.inner, b.inner)


def test_write_plan_is_reproducible(tmp_path):
    plan = SynthesisPlan(
        chain_length=3,
        steps=[CouplingStep(site=1, inner=squeeze(0.2)), CouplingStep(site=2, inner=-np.eye(2))],
        target=np.eye(4),
    )
    first = write_plan(tmp_path / "first.txt", plan)
    second = write_plan(tmp_path / "second.txt", plan)
    assert file_hash(first) == file_hash(second)

    # -1 has no single real logarithm, its exponent columns stay empty
    last_record = first.read_text().splitlines()[-1]
    assert last_record.endswith(",,,")


def test_read_plan_target_hash_mismatch(tmp_path):
    plan = SynthesisPlan(chain_length=2, steps=[CouplingStep(site=1, inner=rotation(0.3))], target=rotation(0.3))
    path = write_plan(tmp_path / "plan.txt", plan)
    lines = [
        "# target_hash: 0000" if line.startswith("# target_hash:") else line
        for line in path.read_text().splitlines()
    ]
    path.write_text("\n".join(lines) + "\n")
    try:
        read_plan(path)
        assert False
    except FileFormatError as error:
        assert error.field == "target_hash"


def test_read_plan_invalid_inner(tmp_path):
    plan = SynthesisPlan(chain_length=2, steps=[CouplingStep(site=1, inner=np.eye(2))], target=np.eye(2))
    path = write_plan(tmp_path / "plan.txt", plan)
    lines = path.read_text().splitlines()
    lines[-1] = "1,1,2,0,0,2,,,"
    path.write_text("\n".join(lines) + "\n")
    try:
        read_plan(path)
        assert False
    except FileFormatError as error:
        assert error.line == len(lines)
        assert error.field == "inner"


def test_read_plan_missing_target(tmp_path):
    path = tmp_path / "plan.txt"
    path.write_text("# chain_length: 3\n")
    try:
        read_plan(path)
        assert False
    except FileFormatError as error:
        assert error.field == "target"


def test_write_negativity(tmp_path):
    table = np.zeros((3, 3))
    table[0, 1] = table[1, 0] = 0.5
    path = write_negativity(tmp_path / "negativity.csv", table, 1e-9, dict(seed=0))

    rows = [line for line in path.read_text().splitlines() if not line.startswith("#")]
    assert rows[0] == "n,m,log_negativity,entangled"
    assert rows[1] == "1,2,0.5,1"
    assert rows[2] == "1,3,0,0"
    assert len(rows) == 4
