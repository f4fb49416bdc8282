import logging
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..exceptions import ConfigError

_logger = logging.getLogger(__name__)


def _describe(error):
    parts = []
    for err in error.errors():
        loc = '.'.join(str(p) for p in err['loc'])
        parts.append(f"{loc}: {err['msg']}" if loc else err['msg'])
    return '; '.join(parts)


class _Settings(BaseModel):
    """Frozen settings group; any validation failure surfaces as ConfigError"""

    model_config = ConfigDict(frozen=True, extra='forbid')

    def __init__(self, **data):
        try:
            super().__init__(**data)
        except ValidationError as e:
            raise ConfigError(f"Invalid {type(self).__name__}: {_describe(e)}") from None


class NetConfig(_Settings):
    r_depth: int = Field(6, ge=2, description='Conv+ReLU layers in the reflectance network')
    i_depth: int = Field(3, ge=2, description='Conv+ReLU layers in the illumination network')
    n_depth: int = Field(5, ge=2, description='Conv+norm+ReLU blocks in the noise network')
    width: int = Field(32, ge=1, description='Feature channels of every hidden layer')
    kernel: int = Field(3, ge=1, description='Spatial size of hidden convolution kernels')
    seed: int = Field(0, ge=0, description='Seed of the parameter initializer')

    @field_validator('kernel')
    @classmethod
    def _odd_kernel(cls, value):
        if value % 2 == 0:
            raise ValueError(f"kernel must be odd, got {value}")
        return value

    @model_validator(mode='after')
    def _reflection_deeper(self):
        if self.r_depth <= self.i_depth:
            raise ValueError(f"r_depth ({self.r_depth}) must exceed i_depth ({self.i_depth})")
        return self


class LossWeights(_Settings):
    lambda_i: float = Field(2.0, ge=0, description='Illumination smoothness coefficient')
    lambda_k: float = Field(2.0, ge=0, description='Reflectance smoothness coefficient')
    lambda_n: float = Field(6000.0, ge=0, description='Noise loss coefficient')
    lambda_rs: float = Field(1.0, ge=0, description='Fidelity coefficient inside the reflectance smoothness loss')
    lambda_color: float = Field(1.0, ge=0, description='Color loss coefficient (0 disables the term)')
    lambda_region: float = Field(1.0, ge=0, description='Region loss coefficient (0 disables the term)')
    lambda_maxa: float = Field(1.0, ge=0, description='Attention loss coefficient (0 disables the term)')
    eps_color: float = Field(1e-6, ge=0, description='Charbonnier epsilon of the color loss')
    eps_w: float = Field(1e-4, ge=0, description='Denominator guard of the illumination weight map')
    w_low: float = Field(4.0, ge=0, description='Region loss weight of the dark pixels')
    w_high: float = Field(1.0, ge=0, description='Region loss weight of the remaining pixels')
    dark_fraction: float = Field(0.4, gt=0, lt=1, description='Fraction of darkest pixels forming the dark region')
    gauss_sigma: float = Field(1.0, gt=0, description='Sigma of the Gaussian in the illumination weight map')
    gauss_ksize: int = Field(5, ge=1, description='Kernel size of the Gaussian in the illumination weight map')
    reduction: Literal['mean', 'sum'] = Field('mean', description="Reduction of the L1 terms: 'mean' or 'sum'")

    @field_validator('gauss_ksize')
    @classmethod
    def _odd_ksize(cls, value):
        if value % 2 == 0:
            raise ValueError(f"gauss_ksize must be odd, got {value}")
        return value


class AdamConfig(_Settings):
    lr: float = Field(1e-3, gt=0, description='Adam learning rate')
    beta1: float = Field(0.9, ge=0, lt=1, description='Adam first-moment decay')
    beta2: float = Field(0.999, ge=0, lt=1, description='Adam second-moment decay')
    eps: float = Field(1e-8, gt=0, description='Adam denominator epsilon')


class EnhanceConfig(_Settings):
    gamma: float = Field(0.4, gt=0, le=1, description='Gamma applied to the illumination map')
    iterations: int = Field(1000, ge=1, description='Optimization iterations per image')
    # No loss term reads it.
    delta: float = Field(0.1, description='Unused; kept so published parameter sets load unchanged')
    dump_intermediates: bool = Field(False, description='Also save R, I, N and the adjusted illumination')
    log_every: int = Field(100, ge=1, description='Iterations between debug log lines')
    net: NetConfig = Field(default_factory=NetConfig)
    weights: LossWeights = Field(default_factory=LossWeights)
    adam: AdamConfig = Field(default_factory=AdamConfig)

    # ===========================================
    # FLAT KEY NAMESPACE (config files, CLI, reports)
    # ===========================================

    def to_flat(self):
        flat = {}
        for key, (section, name) in FLAT_KEYS.items():
            owner = getattr(self, section) if section else self
            flat[key] = getattr(owner, name)
        return flat

    @classmethod
    def from_flat(cls, values, base=None):
        """Build a config from flat key/value pairs; strings are parsed by pydantic"""
        data = (base or cls()).model_dump()
        for key, raw in values.items():
            if key not in FLAT_KEYS:
                raise ConfigError(f"Unknown configuration key: {key}")
            section, name = FLAT_KEYS[key]
            owner = data[section] if section else data
            owner[name] = raw.strip() if isinstance(raw, str) else raw
        return cls(**data)

    def with_overrides(self, **values):
        return self.from_flat(values, base=self)


_SECTIONS = {None: EnhanceConfig, 'net': NetConfig, 'weights': LossWeights, 'adam': AdamConfig}


def _flat_keys():
    keys = {}
    for name in EnhanceConfig.model_fields:
        if name not in _SECTIONS:
            keys[name] = (None, name)
    for section in ('net', 'weights', 'adam'):
        for name in _SECTIONS[section].model_fields:
            key = 'adam_eps' if (section, name) == ('adam', 'eps') else name
            keys[key] = (section, name)
    return keys


FLAT_KEYS = _flat_keys()


def describe_keys():
    """Return {flat key: help text} for usage output"""
    return {
        key: _SECTIONS[section].model_fields[name].description or ''
        for key, (section, name) in FLAT_KEYS.items()
    }


# Named configurations following the structure of the network and loss ablations.
ABLATION_PRESETS = {
    'recon': {
        'lambda_i': 0.0, 'lambda_k': 0.0, 'lambda_n': 0.0,
        'lambda_color': 0.0, 'lambda_region': 0.0, 'lambda_maxa': 0.0,
    },
    'smooth': {'lambda_n': 0.0, 'lambda_color': 0.0, 'lambda_region': 0.0, 'lambda_maxa': 0.0},
    'texture': {'lambda_n': 0.0},
    'full': {},
    'shallow_reflection': {'r_depth': 4, 'i_depth': 3},
    'layers5': {'r_depth': 5, 'n_depth': 5},
    'layers10': {'r_depth': 10, 'n_depth': 10},
}


def apply_preset(cfg, name):
    if name not in ABLATION_PRESETS:
        raise ConfigError(
            f"Unknown preset {name!r}; choose from {', '.join(sorted(ABLATION_PRESETS))}"
        )
    _logger.debug(f"Applying preset {name}: {ABLATION_PRESETS[name]}")
    return cfg.with_overrides(**ABLATION_PRESETS[name])
