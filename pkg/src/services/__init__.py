"""Experiment services: evaluation, population dynamics and the run harness"""
