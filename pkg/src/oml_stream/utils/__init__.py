"""
File-format and configuration helpers.
"""
