"""Sound mixed-precision tuning of straight-line arithmetic kernels."""
