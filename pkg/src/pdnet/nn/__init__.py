"""Layer zoo: forward/backward passes, gradient checking."""
from pdnet.nn.activation import Activation, sigmoid
from pdnet.nn.base import Layer, layer_backward
from pdnet.nn.conv import Conv2d, LocallyConnected2d, col2im, im2col
from pdnet.nn.dense import Linear, SoftmaxCrossEntropy, log_softmax
from pdnet.nn.gradcheck import GradReport, grad_check, relative_error, run_suite
from pdnet.nn.norm import LRN, BatchNorm
from pdnet.nn.pool import Pool2d

__all__ = [
    "Activation", "BatchNorm", "Conv2d", "GradReport", "LRN", "Layer", "Linear",
    "LocallyConnected2d", "Pool2d", "SoftmaxCrossEntropy", "col2im", "grad_check",
    "im2col", "layer_backward", "log_softmax", "relative_error", "run_suite", "sigmoid",
]
