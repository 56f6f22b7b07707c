"""Storage layer for samples, datasets and run logs"""
