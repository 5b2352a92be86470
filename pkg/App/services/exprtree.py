"""
Árvores de expressão simbólica

Este módulo contém o substrato comum às duas camadas da evolução macro-micro:
- Representação imutável da árvore (operadores, variáveis e parâmetros)
- Avaliação escalar e vetorizada (várias combinações de parâmetros de uma vez)
- Complexidade por tabela de custos
- Igualdade estrutural (ignora o valor dos parâmetros)
- Serialização infixa e leitura de volta
"""

import logging
import re
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..errors import ExpressionSyntaxError

logger = logging.getLogger(__name__)


class OpKind(str, Enum):
    ADD = 'add'
    SUB = 'sub'
    MUL = 'mul'
    DIV = 'div'
    POW = 'pow'
    NEG = 'neg'


ARITY = {
    OpKind.ADD: 2,
    OpKind.SUB: 2,
    OpKind.MUL: 2,
    OpKind.DIV: 2,
    OpKind.POW: 2,
    OpKind.NEG: 1,
}

SYMBOLS = {
    OpKind.ADD: '+',
    OpKind.SUB: '-',
    OpKind.MUL: '*',
    OpKind.DIV: '/',
    OpKind.POW: '^',
}

KIND_BY_SYMBOL = {symbol: kind for kind, symbol in SYMBOLS.items()}

DEFAULT_OPERATORS = (OpKind.ADD, OpKind.SUB, OpKind.MUL, OpKind.DIV, OpKind.POW)


@dataclass(frozen=True)
class Operator:
    kind: OpKind
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, 'kind', OpKind(self.kind))
        object.__setattr__(self, 'children', tuple(self.children))
        if len(self.children) != ARITY[self.kind]:
            raise ValueError(
                f"Operador {self.kind.value} exige {ARITY[self.kind]} filho(s), recebeu {len(self.children)}"
            )


@dataclass(frozen=True)
class Variable:
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"Índice de variável negativo: {self.index}")


@dataclass(frozen=True)
class Parameter:
    slot: int  # posição no vetor de parâmetros do indivíduo


class InvalidReason(str, Enum):
    NON_FINITE = 'non_finite'
    COMPLEX_RESULT = 'complex_result'
    DOMAIN_ERROR = 'domain_error'


# códigos usados na avaliação vetorizada (0 = válido)
REASON_CODES = {
    1: InvalidReason.NON_FINITE,
    2: InvalidReason.COMPLEX_RESULT,
    3: InvalidReason.DOMAIN_ERROR,
}
_NON_FINITE, _COMPLEX, _DOMAIN = 1, 2, 3


@dataclass(frozen=True)
class Invalid:
    reason: InvalidReason


@dataclass
class CostTable:
    costs: dict = field(default_factory=dict)
    pow_with_operator_exponent: int = 20

    def __post_init__(self):
        self.costs = {OpKind(kind): int(valor) for kind, valor in self.costs.items()}
        for kind in OpKind:
            self.costs.setdefault(kind, ARITY[kind])
        if any(valor < 0 for valor in self.costs.values()) or self.pow_with_operator_exponent < 0:
            raise ValueError("Custos de operadores devem ser não negativos")
        if self.pow_with_operator_exponent < self.costs[OpKind.POW]:
            raise ValueError("pow_with_operator_exponent deve ser >= custo de pow")

    @classmethod
    def arity_default(cls):
        """Custo igual à aridade; potência com expoente não constante custa 20"""
        return cls({kind: ARITY[kind] for kind in OpKind}, pow_with_operator_exponent=20)

    def cost(self, node):
        if node.kind is OpKind.POW and not isinstance(node.children[1], Parameter):
            return self.pow_with_operator_exponent
        return self.costs[node.kind]


def _mark(reasons, mask, code, shape):
    linhas = np.broadcast_to(mask, shape).any(axis=1)
    reasons[(reasons == 0) & linhas] = code


def _walk(node, params, features, reasons, shape):
    if isinstance(node, Parameter):
        return params[:, node.slot][:, None]
    if isinstance(node, Variable):
        return features[:, node.index][None, :]

    valores = [_walk(filho, params, features, reasons, shape) for filho in node.children]
    with np.errstate(all='ignore'):
        if node.kind is OpKind.ADD:
            out = valores[0] + valores[1]
        elif node.kind is OpKind.SUB:
            out = valores[0] - valores[1]
        elif node.kind is OpKind.MUL:
            out = valores[0] * valores[1]
        elif node.kind is OpKind.DIV:
            _mark(reasons, valores[1] == 0, _DOMAIN, shape)
            out = valores[0] / valores[1]
        elif node.kind is OpKind.POW:
            base, expoente = np.broadcast_arrays(valores[0], valores[1])
            _mark(reasons, (base < 0) & (expoente != np.floor(expoente)), _COMPLEX, shape)
            _mark(reasons, (base == 0) & (expoente < 0), _DOMAIN, shape)
            out = np.power(base, expoente)
        else:
            out = -valores[0]
    _mark(reasons, ~np.isfinite(out), _NON_FINITE, shape)
    return out


def _iter_preorder(node, path=()):
    yield path, node
    if isinstance(node, Operator):
        for i, filho in enumerate(node.children):
            yield from _iter_preorder(filho, path + (i,))


class ExpressaoService:
    """Serviço de operações sobre árvores de expressão"""

    @staticmethod
    def param_count(expr):
        """Quantidade de folhas Parameter da árvore"""
        return sum(1 for _, node in _iter_preorder(expr) if isinstance(node, Parameter))

    @staticmethod
    def node_count(expr):
        return sum(1 for _ in _iter_preorder(expr))

    @staticmethod
    def depth(expr):
        if not isinstance(expr, Operator):
            return 0
        return 1 + max(ExpressaoService.depth(filho) for filho in expr.children)

    @staticmethod
    def iter_nodes(expr):
        """Percorre a árvore em pré-ordem devolvendo (caminho, nó)"""
        return _iter_preorder(expr)

    @staticmethod
    def get_node(expr, path):
        node = expr
        for i in path:
            node = node.children[i]
        return node

    @staticmethod
    def replace_node(expr, path, novo):
        """Devolve uma nova árvore com o nó em `path` substituído por `novo`"""
        if not path:
            return novo
        filhos = list(expr.children)
        filhos[path[0]] = ExpressaoService.replace_node(filhos[path[0]], path[1:], novo)
        return Operator(expr.kind, tuple(filhos))

    @staticmethod
    def variables_used(expr):
        return sorted({node.index for _, node in _iter_preorder(expr) if isinstance(node, Variable)})

    @staticmethod
    def operator_histogram(expr):
        histograma = {kind.value: 0 for kind in OpKind}
        for _, node in _iter_preorder(expr):
            if isinstance(node, Operator):
                histograma[node.kind.value] += 1
        return histograma

    @staticmethod
    def shift_slots(expr, offset):
        if isinstance(expr, Parameter):
            return Parameter(expr.slot + offset)
        if isinstance(expr, Variable):
            return expr
        return Operator(expr.kind, tuple(ExpressaoService.shift_slots(f, offset) for f in expr.children))

    @staticmethod
    def canonicalize(expr, params):
        """
        Renumera os parâmetros em pré-ordem e descarta valores não usados

        Args:
            expr: Árvore cujos slots indexam `params`
            params: Vetor de valores (pode conter valores não referenciados)

        Returns:
            tuple: (árvore com slots contíguos a partir de 0, novo vetor)
        """
        params = np.asarray(params, dtype=float)
        novos = []

        def _rebuild(node):
            if isinstance(node, Parameter):
                novos.append(params[node.slot])
                return Parameter(len(novos) - 1)
            if isinstance(node, Variable):
                return node
            return Operator(node.kind, tuple(_rebuild(filho) for filho in node.children))

        arvore = _rebuild(expr)
        return arvore, np.array(novos, dtype=float)

    @staticmethod
    def evaluate_batch(expr, params, features):
        """
        Avalia K vetores de parâmetros sobre N linhas de uma vez

        Args:
            expr: Árvore de expressão
            params (array K x P): Um vetor de parâmetros por linha
            features (array N x F): Linhas do dataset

        Returns:
            tuple: (valores K x N, códigos K com 0 = válido, 1 = non_finite,
                    2 = complex_result, 3 = domain_error)
        """
        params = np.atleast_2d(np.asarray(params, dtype=float))
        features = np.asarray(features, dtype=float)
        if features.ndim == 1:
            features = features.reshape(1, -1)

        n_params = ExpressaoService.param_count(expr)
        if params.shape[1] != n_params:
            raise ValueError(f"Esperados {n_params} parâmetros, recebidos {params.shape[1]}")
        variaveis = ExpressaoService.variables_used(expr)
        if variaveis and variaveis[-1] >= features.shape[1]:
            raise ValueError(
                f"Variável x{variaveis[-1]} fora do dataset com {features.shape[1]} coluna(s)"
            )

        shape = (params.shape[0], features.shape[0])
        reasons = np.zeros(params.shape[0], dtype=np.int8)
        valores = _walk(expr, params, features, reasons, shape)
        return np.array(np.broadcast_to(valores, shape)), reasons

    @staticmethod
    def evaluate(expr, params, features):
        """
        Avalia a expressão em uma linha do dataset

        Args:
            expr: Árvore de expressão
            params: Vetor de parâmetros (tamanho = número de slots)
            features: Linha do dataset (pode ser vazia)

        Returns:
            float | Invalid: Valor real ou marcador de invalidez
        """
        linha = np.asarray(features, dtype=float).reshape(1, -1)
        valores, reasons = ExpressaoService.evaluate_batch(
            expr, np.asarray(params, dtype=float).reshape(1, -1), linha
        )
        if reasons[0]:
            return Invalid(REASON_CODES[int(reasons[0])])
        return float(valores[0, 0])

    @staticmethod
    def complexity(expr, costs):
        """
        Soma dos custos dos operadores da árvore

        Folhas custam 0; potência cujo expoente não é um único Parameter usa
        o custo `pow_with_operator_exponent`.
        """
        if not isinstance(expr, Operator):
            return 0
        return costs.cost(expr) + sum(ExpressaoService.complexity(f, costs) for f in expr.children)

    @staticmethod
    def structure_key(expr):
        """Chave hashable que identifica a estrutura, sem os valores dos parâmetros"""
        if isinstance(expr, Parameter):
            return ('p',)
        if isinstance(expr, Variable):
            return ('x', expr.index)
        return (expr.kind.value,) + tuple(ExpressaoService.structure_key(f) for f in expr.children)

    @staticmethod
    def structural_equal(a, b):
        return ExpressaoService.structure_key(a) == ExpressaoService.structure_key(b)

    @staticmethod
    def serialize(expr, params):
        """
        Serializa em infixo ASCII com parênteses explícitos

        Parâmetros são escritos como literais decimais com 17 dígitos
        significativos; variáveis como x0..xN.
        """
        params = np.asarray(params, dtype=float)
        if params.shape[0] != ExpressaoService.param_count(expr):
            raise ValueError("Tamanho do vetor de parâmetros não confere com a árvore")
        if not np.all(np.isfinite(params)):
            raise ValueError("Parâmetros não finitos não podem ser serializados")

        def _fmt(node):
            if isinstance(node, Parameter):
                return format(float(params[node.slot]), '.17g')
            if isinstance(node, Variable):
                return f"x{node.index}"
            if node.kind is OpKind.NEG:
                return f"(- {_fmt(node.children[0])})"
            return f"({_fmt(node.children[0])} {SYMBOLS[node.kind]} {_fmt(node.children[1])})"

        return _fmt(expr)

    @staticmethod
    def structure_string(expr):
        """Forma textual com parâmetros anônimos (p), usada em desempates"""
        if isinstance(expr, Parameter):
            return 'p'
        if isinstance(expr, Variable):
            return f"x{expr.index}"
        if expr.kind is OpKind.NEG:
            return f"(- {ExpressaoService.structure_string(expr.children[0])})"
        a, b = (ExpressaoService.structure_string(f) for f in expr.children)
        return f"({a} {SYMBOLS[expr.kind]} {b})"

    @staticmethod
    def parse(text):
        """
        Lê uma expressão serializada

        Returns:
            tuple: (árvore, vetor de parâmetros na ordem de aparição)

        Raises:
            ExpressionSyntaxError: com a posição do primeiro erro
        """
        tokens = _tokenize(text)
        valores = []
        pos = [0]

        def _peek():
            return tokens[pos[0]] if pos[0] < len(tokens) else None

        def _next(esperado=None):
            token = _peek()
            if token is None:
                raise ExpressionSyntaxError("Fim da entrada inesperado", len(text))
            if esperado is not None and token[0] != esperado:
                raise ExpressionSyntaxError(f"Esperado '{esperado}', encontrado '{token[1]}'", token[2])
            pos[0] += 1
            return token

        def _operand():
            tipo, valor, posicao = _next()
            if tipo == 'num':
                valores.append(float(valor))
                return Parameter(len(valores) - 1)
            if tipo == 'var':
                return Variable(int(valor[1:]))
            if tipo != '(':
                raise ExpressionSyntaxError(f"Token inesperado '{valor}'", posicao)

            token = _peek()
            if token is not None and token[0] == 'op' and token[1] == '-':
                _next()
                filho = _operand()
                _next(')')
                return Operator(OpKind.NEG, (filho,))
            esquerda = _operand()
            _, simbolo, pos_op = _next('op')
            direita = _operand()
            _next(')')
            return Operator(KIND_BY_SYMBOL[simbolo], (esquerda, direita))

        arvore = _operand()
        sobra = _peek()
        if sobra is not None:
            raise ExpressionSyntaxError(f"Conteúdo após o fim da expressão: '{sobra[1]}'", sobra[2])
        return arvore, np.array(valores, dtype=float)


_NUMBER = re.compile(r'-?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?')
_VARIABLE = re.compile(r'x\d+')


def _tokenize(text):
    tokens = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
            continue
        anterior = tokens[-1][0] if tokens else None
        if c == '-' and anterior in (None, '(', 'op') and i + 1 < len(text) and (text[i + 1].isdigit() or text[i + 1] == '.'):
            m = _NUMBER.match(text, i)
            tokens.append(('num', m.group(), i))
            i = m.end()
        elif c in '()':
            tokens.append((c, c, i))
            i += 1
        elif c in KIND_BY_SYMBOL:
            tokens.append(('op', c, i))
            i += 1
        elif c.isdigit() or c == '.':
            m = _NUMBER.match(text, i)
            if m is None:
                raise ExpressionSyntaxError("Número malformado", i)
            tokens.append(('num', m.group(), i))
            i = m.end()
        elif c == 'x':
            m = _VARIABLE.match(text, i)
            if m is None:
                raise ExpressionSyntaxError("Variável malformada", i)
            tokens.append(('var', m.group(), i))
            i = m.end()
        else:
            raise ExpressionSyntaxError(f"Caractere inesperado '{c}'", i)
    return tokens


class GeradorArvores:
    """Geração aleatória de árvores (inicialização e mutação de subárvore)"""

    def __init__(self, n_features, operators=DEFAULT_OPERATORS, p_leaf=0.3,
                 p_variable=0.5, p_param_exponent=0.8):
        if n_features < 0:
            raise ValueError("n_features deve ser >= 0")
        self.n_features = n_features
        self.operators = tuple(OpKind(op) for op in operators)
        self.p_leaf = p_leaf
        self.p_variable = p_variable if n_features > 0 else 0.0
        self.p_param_exponent = p_param_exponent

    def leaf(self, rng, contador):
        if rng.random() < self.p_variable:
            return Variable(int(rng.integers(self.n_features)))
        contador[0] += 1
        return Parameter(contador[0] - 1)

    def tree(self, rng, max_depth, method='grow'):
        """Gera uma árvore com slots já em pré-ordem"""
        contador = [0]
        return self._node(rng, 0, max_depth, method, contador)

    def _node(self, rng, depth, max_depth, method, contador):
        if depth >= max_depth or not self.operators:
            return self.leaf(rng, contador)
        if method == 'grow' and depth > 0 and rng.random() < self.p_leaf:
            return self.leaf(rng, contador)

        kind = self.operators[int(rng.integers(len(self.operators)))]
        if kind is OpKind.NEG:
            return Operator(kind, (self._node(rng, depth + 1, max_depth, method, contador),))
        base = self._node(rng, depth + 1, max_depth, method, contador)
        if kind is OpKind.POW and rng.random() < self.p_param_exponent:
            contador[0] += 1
            expoente = Parameter(contador[0] - 1)
        else:
            expoente = self._node(rng, depth + 1, max_depth, method, contador)
        return Operator(kind, (base, expoente))
