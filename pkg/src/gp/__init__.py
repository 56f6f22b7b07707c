"""Genetic programming core: primitives, trees, variation operators, learners"""
