"""Sequential channel synthesis toolkit."""
