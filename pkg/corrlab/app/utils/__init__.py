"""corrlab utilities"""
