"""corrlab services"""
