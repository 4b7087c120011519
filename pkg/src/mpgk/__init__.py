"""Message passing graph kernels."""
from .errors import ConfigurationError, ContractError, DegenerateError, FormatError, MPGKError, ParameterError
from .evaluation import CvReport, cross_validate
from .graph import Graph, GraphDataset, KernelParams, make_barbell, permute_vertices, validate
from .graph_kernel import GramMatrix, compute_grams, graph_nystrom_features, normalize
from .hierarchy import ClusterTree, assignment_value, build_hierarchy, histogram, kernel_kmeans
from .io import load_tu_dataset, read_gram, write_coordinates, write_features, write_gram
from .linalg import kernel_pca, nystrom_fit, sym_eig
from .svm import OneVsRestSVM, svm_predict, svm_train
from .vertex_kernel import VertexKernelState, run_message_passing

__version__ = "0.1.0"
