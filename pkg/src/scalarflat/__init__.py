"""Desk-scale gluing of scalar-flat metrics along a neck."""
