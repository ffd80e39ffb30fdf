from mtln.train.model.mtln import ModelParams
from mtln.train.model.mtln import NetworkConfig
from mtln.train.model.mtln import build_mtln
from mtln.train.model.mtln import forward_mtln
from mtln.train.model.mtln import parameter_shapes
