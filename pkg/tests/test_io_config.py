import re

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crtmem import calibration as cal
from crtmem import errormodel as em
from crtmem import io, qcore
from crtmem.config import ConfigError, RunConfig, dump_config, load_config, parse_config

seeds = st.integers(0, 2**32 - 1)


# -- CSV round trips ------------------------------------------------------------


@given(seed=seeds)
def test_stochastic_round_trip_is_bit_exact(seed, tmp_path_factory):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    M = rng.dirichlet(np.ones(2**n), size=2**n).T
    path = tmp_path_factory.mktemp("csv") / "M.csv"
    io.write_stochastic(path, M)
    np.testing.assert_array_equal(io.read_stochastic(path), M)


def test_stochastic_layout(tmp_path):
    M = np.array([[0.9, 0.2], [0.1, 0.8]])
    io.write_stochastic(tmp_path / "M.csv", M)
    lines = (tmp_path / "M.csv").read_text().splitlines()
    assert lines == ["prepared,0,1", "0,0.9,0.1", "1,0.2,0.8"]


def test_read_stochastic_rejects_invalid(tmp_path):
    io.write_table(tmp_path / "bad.csv", "prepared", ["0", "1"], ["0", "1"], [[0.9, 0.2], [0.1, 0.8]])
    with pytest.raises(ValueError):
        io.read_stochastic(tmp_path / "bad.csv")


def test_read_table_rejects_ragged(tmp_path):
    (tmp_path / "r.csv").write_text("x,a,b\nr,1\n")
    with pytest.raises(ValueError, match="ragged"):
        io.read_table(tmp_path / "r.csv")


def test_L_round_trip(tmp_path):
    L = cal.compute_L(cal.fiducial_states(em.noisy_single_qubit(2e-2, 2e-4)))
    io.write_L(tmp_path / "L.csv", L)
    np.testing.assert_array_equal(io.read_L(tmp_path / "L.csv"), L)
    assert (tmp_path / "L.csv").read_text().splitlines()[0] == "lambda,0,1,+,+i"


def test_read_L_checks_row_sums(tmp_path):
    io.write_L(tmp_path / "L.csv", np.eye(4) * 0.9)
    with pytest.raises(ValueError, match="sum to 1"):
        io.read_L(tmp_path / "L.csv")


def test_calibration_table_round_trip(tmp_path):
    model = em.build_planted_model(em.NoiseConfig(n=2, seed=3))
    table = cal.measure_calibration_table(model)
    io.write_calibration_table(tmp_path / "t.csv", table)
    back = io.read_calibration_table(tmp_path / "t.csv")
    assert back.n == 2
    np.testing.assert_array_equal(back.probs, table.probs)


def test_ptm_round_trip(tmp_path):
    R = qcore.ptm_of_unitary(qcore.CNOT)
    io.write_ptm(tmp_path / "p.csv", R)
    np.testing.assert_array_equal(io.read_ptm(tmp_path / "p.csv"), R)
    bad = R.copy()
    bad[0, 1] = 0.5
    io.write_ptm(tmp_path / "bad.csv", bad)
    with pytest.raises(ValueError, match="first row"):
        io.read_ptm(tmp_path / "bad.csv")


def test_write_table_shape_check(tmp_path):
    with pytest.raises(ValueError):
        io.write_table(tmp_path / "x.csv", "c", ["a"], ["b", "c"], np.ones((2, 2)))


def test_json_rejects_nan(tmp_path):
    with pytest.raises(ValueError):
        io.write_json(tmp_path / "x.json", {"v": float("nan")})


# -- configuration --------------------------------------------------------------


def test_defaults():
    cfg = parse_config("")
    assert cfg == RunConfig()
    assert cfg.shots is None and cfg.n == 4 and cfg.eta == 0.2
    assert len(cfg.eta_grid) == 11


def test_parse_values_and_comments():
    cfg = parse_config(
        """
        [run]
        seed = 7   # trailing comment
        shots = 8192
        [mermin]
        order = 3
        eta_grid = 0, 0.5, 1
        [flags]
        bypass_gst = yes
        corrections = raw, gamma
        """.replace("        ", "")
    )
    assert cfg.seed == 7 and cfg.shots == 8192 and cfg.order == 3
    assert cfg.eta_grid == (0.0, 0.5, 1.0)
    assert cfg.bypass_gst is True
    assert cfg.corrections == ("raw", "gamma")


def test_dump_parse_round_trip():
    cfg = RunConfig(seed=5, shots=1000, eta=0.15, eta_grid=(0.0, 0.3), corrections=("T",), qpt_n=2, channel="CNOT")
    text = dump_config(cfg)
    assert parse_config(text) == cfg
    assert dump_config(parse_config(text)) == text


@pytest.mark.parametrize(
    "text, needle",
    [
        ("[run]\nsedd = 1\n", "unknown key 'sedd' in section [run]"),
        ("[runn]\nseed = 1\n", "unknown section [runn]"),
        ("[run]\nseed = abc\n", "run.seed"),
        ("[run]\nshots = 0\n", "run.shots"),
        ("[noise]\nstate_depol = 1.5\n", "state_depol"),
        ("[mermin]\norder = 5\n", "order"),
        ("[mermin]\neta_grid = 0, 2\n", "eta_grid"),
        ("[flags]\ncorrections = raw, magic\n", "magic"),
        ("[flags]\nbypass_gst = maybe\n", "bypass_gst"),
        ("[qpt]\nchannel = swap\n", "qpt.channel"),
        ("[qpt]\nn = 4\n", "qpt.n"),
        ("[noise]\npovm_noise_target = 3\n", "unreachable"),
        ("not an ini", "malformed"),
    ],
)
def test_invalid_config_names_the_problem(text, needle):
    with pytest.raises(ConfigError, match=re.escape(needle)):
        parse_config(text)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.ini")


def test_overrides_drop_none():
    cfg = RunConfig().with_overrides(seed=9, replicas=None, out_dir="x")
    assert cfg.seed == 9 and cfg.replicas == 16 and cfg.out_dir == "x"
    with pytest.raises(ConfigError):
        RunConfig().with_overrides(replicas=0)


def test_derived_configs():
    cfg = RunConfig(seed=3, bypass_gst=True, weight_e0=0.5)
    assert cfg.noise(2).n == 2 and cfg.noise().seed == 3
    m = cfg.mermin(0.4)
    assert m.eta == 0.4 and m.bypass_gst and m.gauge_weights["E0"] == 0.5


def test_to_dict_is_json_ready(tmp_path):
    io.write_json(tmp_path / "c.json", RunConfig().to_dict())
    assert '"shots": null' in (tmp_path / "c.json").read_text()
