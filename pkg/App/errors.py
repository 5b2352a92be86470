"""
Exceções do pipeline de regressão simbólica de enxames

Cada exceção carrega o código de saída usado pela linha de comando:
- 2: erro de configuração / dados de entrada
- 3: artefato ausente
- 4: falha numérica
"""


class SwarmSymregError(Exception):
    """Erro base do projeto"""

    codigo = 1

    def __init__(self, message):
        super().__init__(message)
        self.message = message


class ConfigError(SwarmSymregError):
    """Configuração inválida (chave desconhecida, valor fora do intervalo...)"""

    codigo = 2


class DatasetError(SwarmSymregError):
    """Dados malformados ou impossíveis de normalizar"""

    codigo = 2

    def __init__(self, message, path=None, line=None):
        if path is not None:
            local = f"{path}:{line}" if line is not None else str(path)
            message = f"{local}: {message}"
        super().__init__(message)
        self.path = path
        self.line = line


class ExpressionSyntaxError(SwarmSymregError):
    """Erro de sintaxe ao interpretar uma expressão serializada"""

    codigo = 2

    def __init__(self, message, position):
        super().__init__(f"{message} (posição {position})")
        self.position = position


class MissingArtifactError(SwarmSymregError):
    """Artefato de uma etapa anterior não encontrado"""

    codigo = 3

    def __init__(self, path, etapa=None):
        dica = f" Execute antes a etapa '{etapa}'." if etapa else ""
        super().__init__(f"Artefato não encontrado: {path}.{dica}")
        self.path = path


class NumericalError(SwarmSymregError):
    """Divergência ou valores não finitos onde não são permitidos"""

    codigo = 4
