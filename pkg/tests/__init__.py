"""
Tests for skewdiff
"""
