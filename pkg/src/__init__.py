"""Hard-core model modules: recursion, certificates, solvers, exact oracle."""
