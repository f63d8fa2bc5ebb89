"""Node classification on weighted graphs with random spanning trees."""
