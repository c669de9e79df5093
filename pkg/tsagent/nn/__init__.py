"""Self-contained dense-network training in numpy"""

from .layers import BatchNorm, Dropout, Layer, Linear, MultiBranch, ReLU, SelfAttention, Sequential
from .losses import class_weights, loss_and_grad, softmax
from .metrics import auc_roc, compute_metrics, evaluate
from .model import Model, instantiate, load_weights, save_weights
from .optim import AdamW, onecycle_lr, warmup_end
from .trainer import measure_latency, train

__all__ = [
    'BatchNorm', 'Dropout', 'Layer', 'Linear', 'MultiBranch', 'ReLU', 'SelfAttention', 'Sequential',
    'class_weights', 'loss_and_grad', 'softmax',
    'auc_roc', 'compute_metrics', 'evaluate',
    'Model', 'instantiate', 'load_weights', 'save_weights',
    'AdamW', 'onecycle_lr', 'warmup_end',
    'measure_latency', 'train',
]
