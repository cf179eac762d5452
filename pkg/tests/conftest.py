import pathlib

import numpy as np
import pytest

from tdcim import modelio, quant

FIXTURES = pathlib.Path(__file__).resolve().parents[1] / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> pathlib.Path:
    return FIXTURES


@pytest.fixture(scope="session")
def lenet_model():
    return modelio.load_model(FIXTURES / "lenet5.json", FIXTURES / "lenet5.bin")


@pytest.fixture(scope="session")
def mnist100():
    import json

    with open(FIXTURES / "mnist100.json", "r", encoding="ascii") as fh:
        meta = json.load(fh)
    data = np.fromfile(FIXTURES / meta["data_file"], dtype=np.int8)
    images = data.reshape(meta["count"], *meta["shape"])
    tensors = [
        quant.QuantTensor(tuple(meta["shape"]), images[i].reshape(-1),
                          quant.QuantParams(scale=meta["scale"],
                                            zero_point=meta["zero_point"]))
        for i in range(meta["count"])
    ]
    return tensors, list(meta["labels"])
