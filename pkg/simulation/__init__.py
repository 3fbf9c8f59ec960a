# Simulation engine: quantization, Hamiltonians, pulses, propagation, scoring, optimization
