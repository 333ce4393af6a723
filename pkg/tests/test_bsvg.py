import numpy as np
import pytest

from besovlift import bsvg
from besovlift.errors import BSVGFormatError
from besovlift.grid import Domain, GridFunction, make_grid


@pytest.mark.parametrize("dim,level,domain", [(1, 5, Domain.TORUS), (2, 3, Domain.CUBE), (3, 2, Domain.TORUS)])
def test_roundtrip_real(dim, level, domain, rng):
    g = make_grid(dim, level, domain)
    f = GridFunction(g, rng.normal(size=g.shape))
    back = bsvg.decode(bsvg.encode(f))
    assert back.grid == g and np.array_equal(back.values, f.values)


def test_roundtrip_complex_file(tmp_path, rng):
    g = make_grid(2, 3)
    f = GridFunction(g, np.exp(1j * rng.normal(size=g.shape)))
    path = tmp_path / "u.bsvg"
    bsvg.write(path, f)
    back = bsvg.read(path)
    assert back.is_complex and np.array_equal(back.values, f.values)


def test_force_complex(rng):
    g = make_grid(1, 3)
    f = GridFunction(g, rng.normal(size=8))
    back = bsvg.decode(bsvg.encode(f, force_complex=True))
    assert back.is_complex and np.array_equal(back.values.real, f.values)


def test_bad_inputs():
    g = make_grid(1, 2)
    data = bsvg.encode(GridFunction(g, np.zeros(4)))
    with pytest.raises(BSVGFormatError):
        bsvg.decode(b"XSVG" + data[4:])
    with pytest.raises(BSVGFormatError):
        bsvg.decode(data[:-8])
    with pytest.raises(BSVGFormatError):
        bsvg.decode(data[:5])
