"""
Streaming multi-label engine: data, projection, metric learning, kNN, evaluation.
"""
