"""corrlab: finite-dimensional correspondences, commutants and product systems"""
