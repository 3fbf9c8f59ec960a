# Experiment layer: config, devices, scenario runners, result files
