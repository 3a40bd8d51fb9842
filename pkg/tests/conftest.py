"""Session-wide trained pipelines (desk scale) and the acceptance result log."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import pytest

from naim.codec import Autoencoder, AutoencoderConfig, train_autoencoder
from naim.evalbench import BenchReport, ablation_run
from naim.experiment import DESK_AUTOENCODER, DESK_NAIM, DESK_SCALE, derive_seed
from naim.nam import NaimModel, TrainConfig, train
from naim.synthdata import EffectSpec, SyntheticDataset, make_dataset

SEED = 0
ACCEPTANCE: list[tuple[str, bool, str]] = []


def record(criterion: str, passed: bool, detail: str) -> None:
    line = f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} ({detail})"
    ACCEPTANCE.append((criterion, passed, detail))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for criterion, passed, detail in ACCEPTANCE:
            terminalreporter.write_line(f"{criterion}: {'PASS' if passed else 'FAIL'}  {detail}")


@dataclass
class Pipeline:
    domain: str
    spec: EffectSpec
    train_set: SyntheticDataset
    test_set: SyntheticDataset
    ae: Autoencoder
    models: dict[str, NaimModel]
    report: BenchReport | None = None
    seconds: dict[str, float] = field(default_factory=dict)

    @property
    def model(self) -> NaimModel:
        return self.models["with_image"]

    @property
    def effect_offset(self) -> float:
        return float(self.spec.image_effect(self.train_set.phi).mean())


def naim_config() -> TrainConfig:
    return TrainConfig(**{**DESK_NAIM, "seed": derive_seed(SEED, "naim")})


def datasets(domain: str, spec: EffectSpec):
    tr = make_dataset(domain, DESK_SCALE["n_train"], spec, derive_seed(SEED, "data-train"))
    te = make_dataset(domain, DESK_SCALE["n_test"], spec, derive_seed(SEED, "data-test"))
    return tr, te


def fit_autoencoder(domain: str, images) -> tuple[Autoencoder, float]:
    cfg = AutoencoderConfig(**{**DESK_AUTOENCODER[domain], "seed": derive_seed(SEED, "autoencoder")})
    t0 = time.process_time()
    ae = train_autoencoder(images, cfg)
    return ae, time.process_time() - t0


def full_ablation(domain: str) -> Pipeline:
    spec = EffectSpec(image="linear", sigma=0.1)
    tr, te = datasets(domain, spec)
    ae, ae_sec = fit_autoencoder(domain, tr.images)
    z_train = ae.encode(tr.images)
    cfg = naim_config()
    models, seconds = {}, {"autoencoder": ae_sec}
    for arm, latents in (("with_image", z_train), ("without_image", None)):
        t0 = time.process_time()
        models[arm] = train(tr.features, tr.y, latents, cfg)
        seconds[arm] = time.process_time() - t0
    report, models = ablation_run(tr, te, ae, cfg, models=models)
    return Pipeline(domain, spec, tr, te, ae, models, report, seconds)


@pytest.fixture(scope="session")
def squares_linear() -> Pipeline:
    return full_ablation("squares")


@pytest.fixture(scope="session")
def colors_linear() -> Pipeline:
    return full_ablation("colors")


@pytest.fixture(scope="session")
def squares_power(squares_linear) -> Pipeline:
    """Image effect 2x^4; the images (hence the autoencoder) are shared with the linear run."""
    spec = EffectSpec(image="power", sigma=0.1)
    tr, te = datasets("squares", spec)
    ae = squares_linear.ae
    t0 = time.process_time()
    model = train(tr.features, tr.y, ae.encode(tr.images), naim_config())
    return Pipeline("squares", spec, tr, te, ae, {"with_image": model},
                    seconds={"with_image": time.process_time() - t0})
