"""Network specifications, builders, whole-network passes and weight files."""
from pdnet.model.network import ForwardPass, network_backward, network_forward
from pdnet.model.spec import (LayerNode, NetworkSpec, chain, dense_connection_spec,
                              local_connection_spec, param_count, spec_to_text)
from pdnet.model.weights import (WeightStore, check_weights, init_weights, load_weights,
                                 save_weights, stores_equal)
from pdnet.model.zoo import MODELS, build_alexnet, build_alexnet_optimized, build_model

__all__ = [
    "MODELS", "ForwardPass", "LayerNode", "NetworkSpec", "WeightStore", "build_alexnet",
    "build_alexnet_optimized", "build_model", "chain", "check_weights", "dense_connection_spec",
    "init_weights", "load_weights", "local_connection_spec", "network_backward", "network_forward",
    "param_count", "save_weights", "spec_to_text", "stores_equal",
]
