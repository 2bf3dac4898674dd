"""
Tests for oml-stream.
"""
