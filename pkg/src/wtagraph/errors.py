class GraphError(ValueError):
    """Invalid graph input, or an operation that needs a property the graph lacks."""


class ContractError(ValueError):
    """An argument violates an operation's precondition."""
