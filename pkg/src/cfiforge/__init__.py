"""cfiforge: CFI structures, definable isomorphism systems, k-WL refinement,
and symmetry-reduced exact linear algebra over prime fields."""

__version__ = "0.1.0"
