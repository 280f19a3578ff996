"""Self-verifying adiabatic VQE simulator."""
