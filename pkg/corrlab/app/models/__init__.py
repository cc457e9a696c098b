"""corrlab models"""
