"""Core numerics: fields, operators, problems and eigensolvers."""
