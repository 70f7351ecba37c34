"""Automaton-guided trajectory preferences for tabular reinforcement learning."""
