import numpy as np
import pytest
import torch

from agetrain.errors import ConfigError
from agetrain.model import AgeRegressor, count_parameters


def test_scalar_output_per_batch_element():
    model = AgeRegressor()
    x = torch.rand(3, 1, 24, 24, 24)
    out = model(x)
    assert out.shape == (3,)
    assert torch.all(torch.isfinite(out))


def test_calibrated_fresh_model_predicts_the_center():
    torch.manual_seed(0)
    model = AgeRegressor()
    model.calibrate_output(52.0, 24.0)
    model.eval()
    with torch.no_grad():
        pred = model(torch.rand(2, 1, 24, 24, 24))
    assert torch.allclose(pred, torch.full((2,), 52.0))


def test_calibration_survives_a_state_dict_round_trip():
    model = AgeRegressor()
    model.calibrate_output(47.0, 19.5)
    clone = AgeRegressor()
    clone.load_state_dict(model.state_dict())
    assert float(clone.out_center) == 47.0
    assert float(clone.out_scale) == 19.5


def test_calibration_rejects_nonpositive_scale():
    with pytest.raises(ConfigError):
        AgeRegressor().calibrate_output(50.0, 0.0)


def test_default_sizing_is_small():
    n = count_parameters(AgeRegressor())
    assert 5e4 < n < 2e5


def test_half_million_parameter_sizing_exists():
    n = count_parameters(AgeRegressor(layers_per_block=10))
    assert 3.5e5 < n < 7e5


def test_eval_mode_is_deterministic():
    torch.manual_seed(1)
    model = AgeRegressor()
    model.eval()
    x = torch.rand(2, 1, 16, 16, 16)
    with torch.no_grad():
        a = model(x)
        b = model(x)
    assert torch.equal(a, b)


def test_dropout_active_in_train_mode():
    torch.manual_seed(2)
    model = AgeRegressor(dropout=0.5)
    model.train()
    x = torch.rand(4, 1, 16, 16, 16)
    a = model(x)
    b = model(x)
    assert not torch.equal(a, b)


def test_rejects_degenerate_sizing():
    with pytest.raises(ConfigError):
        AgeRegressor(growth=0)


def test_accepts_numpy_loaded_volumes():
    model = AgeRegressor()
    model.eval()
    volume = np.random.default_rng(0).random((16, 16, 16), dtype=np.float32)
    x = torch.from_numpy(volume).unsqueeze(0).unsqueeze(0)
    with torch.no_grad():
        assert model(x).shape == (1,)
