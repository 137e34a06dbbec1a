"""Surrogate learning toolkit."""
from .sg_data import (
    ImageDataset, load_mnist, load_mnist_pair, load_mnist_split, read_idx, split_counts, stratified_split, subsample,
    write_idx,
)
from .sg_fetch import MnistClient
from .sg_patterns import (
    PatternBank, activation_maps, bank_from_arrays, brute_force_downscale, channel_wise_max, crop_torus,
    cwm_features, downscale_2x2_max, downscale_geo, extract_features, features_for_patterns,
    image_wide_maxpool, pattern_activation_map, sample_patterns, shift_images, upscale_geo, upscale_nearest,
)
from .sg_models import (
    CnnModel, CwmInputs, EmptyModel, Geo1Model, Geo2Model, MlpModel, SurrogateModel, cnn_forward,
    count_nonlinearities, count_params, geo1_forward, geo2_forward, mlp_forward,
)
from .sg_train import (
    EpochRecord, TrainConfig, TrainResult, accuracy, batch_loss, evaluate, loss_and_grad, sgd_step, train,
    train_on_inputs,
)
from .sg_store import load_bank, load_model, save_bank, save_model
from .sg_blackbox import TableBlackBox, read_prediction_table, supervisor, write_prediction_table

__all__ = [
    'ImageDataset', 'load_mnist', 'load_mnist_pair', 'load_mnist_split', 'read_idx', 'split_counts',
    'stratified_split', 'subsample', 'write_idx', 'MnistClient',
    'PatternBank', 'activation_maps', 'bank_from_arrays', 'brute_force_downscale', 'channel_wise_max',
    'crop_torus', 'cwm_features', 'downscale_2x2_max', 'downscale_geo', 'extract_features',
    'features_for_patterns', 'image_wide_maxpool', 'pattern_activation_map', 'sample_patterns', 'shift_images',
    'upscale_geo', 'upscale_nearest',
    'CnnModel', 'CwmInputs', 'EmptyModel', 'Geo1Model', 'Geo2Model', 'MlpModel', 'SurrogateModel',
    'cnn_forward', 'count_nonlinearities', 'count_params', 'geo1_forward', 'geo2_forward', 'mlp_forward',
    'EpochRecord', 'TrainConfig', 'TrainResult', 'accuracy', 'batch_loss', 'evaluate', 'loss_and_grad',
    'sgd_step', 'train', 'train_on_inputs',
    'load_bank', 'load_model', 'save_bank', 'save_model',
    'TableBlackBox', 'read_prediction_table', 'supervisor', 'write_prediction_table',
]
