from mtln.train.logging.logger import Logger
from mtln.train.logging.mlflow import MLFlowLogger
