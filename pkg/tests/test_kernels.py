import os
import subprocess
import sys

import numpy as np
import pytest

SCRIPT = r"""
import sys
import numpy as np
from bremermann import DomainSpec, build_grid, psh_envelope, ScalarField
from bremermann._accel import use_numba
from bremermann.envelope import field_scheme, _cfg
from bremermann.scheme import Scheme

out = {"numba": np.array(use_numba())}
for n, h in ((1, 0.1), (2, 0.25)):
    g = build_grid(DomainSpec("ball", n, {"radius": 1.0}), [[-1.25, 1.25]] * (2 * n), h)
    f = psh_envelope(g, lambda X: np.abs(X[:, 1]) + X[:, 0] ** 2)
    out[f"phi{n}"] = f.values
    probe = ScalarField.from_function(g, lambda X: np.sin(3 * X[:, 0]) + X[:, 1] ** 2)
    sch = field_scheme(probe, _cfg(None, g))
    out[f"means{n}"] = sch.means(probe.interior)
    A, b = sch.matrix(np.arange(g.n_interior) % sch.D)
    out[f"rows{n}"] = A @ probe.interior + b
np.savez(sys.argv[1], **out)
"""


def _run(tmp_path, disable):
    env = dict(os.environ, BREMERMANN_DISABLE_NUMBA="1" if disable else "0")
    path = tmp_path / f"k{int(disable)}.npz"
    subprocess.run([sys.executable, "-c", SCRIPT, str(path)], env=env, check=True, timeout=900)
    return np.load(path)


@pytest.fixture(scope="module")
def both(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("kernels")
    return _run(tmp, False), _run(tmp, True)


def test_flag_selects_backend(both):
    nb, np_ = both
    assert not bool(np_["numba"])
    pytest.importorskip("numba")
    assert bool(nb["numba"])


@pytest.mark.parametrize("key", ["means1", "means2", "rows1", "rows2", "phi1", "phi2"])
def test_backends_agree(both, key):
    nb, np_ = both
    np.testing.assert_allclose(nb[key], np_[key], rtol=0, atol=1e-13)
