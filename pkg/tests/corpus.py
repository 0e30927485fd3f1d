"""Expression corpus for the differentiation oracle.

Every component expression of the built-in catalog, evaluated on its
geometry's domain, plus hand-written expressions covering each grammar
feature.
"""

from prehomog.catalog import builtin_catalog

_EXTRA_BOX = ((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0))

EXTRA = [
    "x1",
    "-x2",
    "3.5",
    "x1*x2*x3",
    "x1^3 - 2*x2^2 + x3",
    "sin(x1)*cos(x2)",
    "exp(0.5*x1 - x3)",
    "log(2 + x1*x2)",
    "sqrt(3 + x1 + x2^2)",
    "tanh(x1 + 2*x2)",
    "1/(2 + sin(x3))",
    "(x1 + x2)^2/(4 + x3^2)",
    "-(x1 - 1.5e-1)^4",
    "2^3*x1 - x2/4",
    "exp(sin(x1))*log(3 + cos(x2*x3))",
    "sqrt(exp(x1) + x2^2)",
    "1/(1 + x1^2 + x2^2)^2",
]


def corpus():
    """List of ``(label, expression, domain bounds)``."""
    items = []
    for spec in builtin_catalog():
        for comp, table in spec.components.items():
            for key, text in sorted(table.items()):
                items.append((f"{spec.name}.{comp}[{key}]", text, spec.domain))
    for text in EXTRA:
        items.append((f"extra:{text}", text, _EXTRA_BOX))
    return items
