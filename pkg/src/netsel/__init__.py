"""Task-focused selection of inferred network representations."""

from ._accel import backend
from .classifiers import Classifier, PredictorSpec, train_classifier
from .dataset import (AttributeMatrix, Dataset, EventLog, LabelSet, build_attributes, build_labels,
                      generate_synthetic, load_events, temporal_split)
from .mdl import canonical, cost, node_efficiency, total_efficiency
from .netinfer import EdgeSet, NetworkModelSpec, build_knn, build_threshold, cosine_similarity, rewire
from .weights import NodeWeightModel, reach_set, restrict_representation, sample_subset

__version__ = "0.1.0"
