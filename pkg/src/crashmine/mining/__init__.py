"""Mining-table assembly and the analyses run on it."""

from .arff import read_arff, write_arff
from .chi2 import AttributeRanking, chi_squared, chi_squared_rank, discretize
from .kmeans import kmeans, kmeans_classes
from .table import IntrusionResult, MiningTable, assemble_table, read_results_csv
from .tree import DecisionTree, build_tree

__all__ = [
    "AttributeRanking", "DecisionTree", "IntrusionResult", "MiningTable", "assemble_table",
    "build_tree", "chi_squared", "chi_squared_rank", "discretize", "kmeans", "kmeans_classes",
    "read_arff", "read_results_csv", "write_arff",
]
