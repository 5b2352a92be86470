# Modelos do registro de experimentos

from .experimento import Experimento, ResultadoExpressao

__all__ = [
    'Experimento',
    'ResultadoExpressao',
]
