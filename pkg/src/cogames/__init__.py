"""Context-ordinal games: voting-rule best responses, equilibrium solvers and metrics."""
