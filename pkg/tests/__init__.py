"""
Test package for the pose pipeline.
"""
