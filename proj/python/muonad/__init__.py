"""Python bindings for the muonad C++ core."""

import json

try:
    from . import _muonad
except ImportError:  # in-tree build: the extension sits next to, not inside, the package
    import _muonad

RNG_ALGORITHM = _muonad.RNG_ALGORITHM
MuonadError = _muonad.MuonadError
MuonadIoError = _muonad.MuonadIoError
binarize_mask = _muonad.binarize_mask
frechet_distance = _muonad.frechet_distance
keep_layers = _muonad.keep_layers
kl_divergence = _muonad.kl_divergence
latent_project = _muonad.latent_project
lr_schedule = _muonad.lr_schedule
mipmap_downsample = _muonad.mipmap_downsample
newton_schulz = _muonad.newton_schulz
phase_of = _muonad.phase_of
project_conflict = _muonad.project_conflict
quantize_hp16 = _muonad.quantize_hp16
quantize_hr16 = _muonad.quantize_hr16
retention_schedule = _muonad.retention_schedule
ssim = _muonad.ssim
update_lambda_style = _muonad.update_lambda_style


def _config_text(config):
    cfg = {"schema_version": 1} if config is None else dict(config)
    cfg.setdefault("schema_version", 1)
    return json.dumps(cfg)


def train(config=None):
    """Runs one training job; returns the run record as a dict."""
    return json.loads(_muonad.train_json(_config_text(config)))


def train_csv(config=None):
    return _muonad.train_csv(_config_text(config))


def gradcheck(config=None):
    return _muonad.gradcheck(_config_text(config))


def metrics(gen, gt, tau=0.05):
    return json.loads(_muonad.metrics_json(str(gen), str(gt), tau))
