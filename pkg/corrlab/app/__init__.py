"""corrlab application package"""
