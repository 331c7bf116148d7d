"""Incompressible Euler on the torus: projection, analytic norms, Picard terms, ensembles."""
