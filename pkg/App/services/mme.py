"""
Evolução macro-micro (MME)

Algoritmo evolutivo aninhado:
- Camada macro: evolui a estrutura das expressões (seleção por torneio,
  crossover de subárvore, mutações e remoção de duplicatas estruturais)
- Camada micro: ajusta o vetor de parâmetros de cada sobrevivente

As duas camadas usam a mesma função de aptidão, que combina linearmente a
penalidade de complexidade f^c e a acurácia relativa h (menor é melhor).
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from ..errors import ConfigError, DatasetError, NumericalError
from .exprtree import (
    DEFAULT_OPERATORS, ARITY, CostTable, ExpressaoService, GeradorArvores,
    Invalid, InvalidReason, OpKind, Operator, Parameter, Variable, REASON_CODES,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MicroConfig:
    micro_population: int = 32
    micro_generations: int = 25
    init_spread: float = 15.0          # largura em décadas da amostragem log-uniforme
    init_max_magnitude: float = 1e3
    mutation_sigma: float = 0.3
    sign_flip_rate: float = 0.1
    convergence_tol: float = 1e-6
    patience: int = 5

    def __post_init__(self):
        if self.micro_population < 1 or self.micro_generations < 1 or self.patience < 1:
            raise ConfigError("micro_population, micro_generations e patience devem ser >= 1")
        if self.init_spread <= 0 or self.mutation_sigma <= 0 or self.init_max_magnitude <= 0:
            raise ConfigError("init_spread, init_max_magnitude e mutation_sigma devem ser positivos")
        if self.convergence_tol < 0:
            raise ConfigError("convergence_tol deve ser >= 0")
        if not 0.0 <= self.sign_flip_rate <= 1.0:
            raise ConfigError("sign_flip_rate deve estar em [0, 1]")


@dataclass(frozen=True)
class MmeConfig:
    population_size: int = 4000
    max_generations: int = 200
    rho: float = 0.3
    tau: int = 12
    operators: tuple = DEFAULT_OPERATORS
    costs: CostTable = field(default_factory=CostTable.arity_default)
    survivor_fraction: float = 0.25
    crossover_rate: float = 0.7
    mutation_rate: float = 0.3
    tournament_size: int = 4
    max_nodes: int = 40
    init_max_depth: int = 4
    mutation_max_depth: int = 3
    report_size: int = 50
    micro: MicroConfig = field(default_factory=MicroConfig)
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'operators', tuple(OpKind(op) for op in self.operators))
        if self.population_size < 2:
            raise ConfigError("population_size deve ser >= 2")
        if self.max_generations < 0:
            raise ConfigError("max_generations deve ser >= 0")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigError("rho deve estar em [0, 1]")
        if self.tau < 1:
            raise ConfigError("tau deve ser >= 1")
        if not self.operators:
            raise ConfigError("O conjunto de operadores não pode ser vazio")
        if not 0.0 < self.survivor_fraction < 1.0:
            raise ConfigError("survivor_fraction deve estar em (0, 1)")
        for nome in ('crossover_rate', 'mutation_rate'):
            if not 0.0 <= getattr(self, nome) <= 1.0:
                raise ConfigError(f"{nome} deve estar em [0, 1]")
        if self.tournament_size < 1 or self.max_nodes < 1 or self.report_size < 1:
            raise ConfigError("tournament_size, max_nodes e report_size devem ser >= 1")


@dataclass
class RegressionDataset:
    """
    Amostras tabulares (colunas de entrada -> alvo)

    `targets` pode ter uma coluna ou duas (alvo vetorial). No caso vetorial a
    mesma árvore escalar é avaliada uma vez por componente: a componente x usa
    as colunas na ordem original e a componente y usa `component_permutation`.
    """

    features: np.ndarray
    targets: np.ndarray
    feature_names: list
    target_names: list
    component_permutation: tuple = None
    groups: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.features.ndim == 1:
            self.features = self.features.reshape(-1, 1)
        if self.features.shape[0] == 0 or self.targets.shape[0] == 0:
            raise ConfigError("Dataset vazio: é preciso ao menos uma linha")
        if self.features.shape[0] != self.targets.shape[0]:
            raise DatasetError(
                f"Número de linhas diferente entre entradas ({self.features.shape[0]}) e alvos ({self.targets.shape[0]})"
            )
        if self.targets.ndim == 2 and self.targets.shape[1] == 1:
            self.targets = self.targets[:, 0]
        if self.targets.ndim == 2 and self.targets.shape[1] != 2:
            raise DatasetError("Alvos devem ter uma ou duas colunas")
        if not (np.all(np.isfinite(self.features)) and np.all(np.isfinite(self.targets))):
            raise DatasetError("Dataset contém valores não finitos")
        if len(self.feature_names) != self.features.shape[1]:
            raise DatasetError("Quantidade de nomes de colunas não confere com as entradas")

    @property
    def n_rows(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def n_components(self):
        return 1 if self.targets.ndim == 1 else 2

    def target_matrix(self):
        return self.targets.reshape(self.n_rows, self.n_components)

    def views(self):
        """Uma matriz de entradas por componente do alvo"""
        if self.n_components == 1:
            return [self.features]
        permutacao = self.component_permutation or tuple(range(self.n_features))
        return [self.features, self.features[:, list(permutacao)]]

    def select_group(self, valor):
        """Subconjunto das linhas de um grupo (ex.: edge_attr), sem a coluna de grupo"""
        if self.groups is None:
            raise DatasetError("Dataset sem coluna de grupo")
        mascara = self.groups == valor
        if not np.any(mascara):
            raise DatasetError(f"Nenhuma linha com grupo {valor}")
        meta = dict(self.meta, group=int(valor))
        return RegressionDataset(
            self.features[mascara], self.targets[mascara], list(self.feature_names),
            list(self.target_names), self.component_permutation, None, meta,
        )


class Individual:
    """Expressão + vetor de parâmetros com caches de complexidade, MSE e aptidão"""

    def __init__(self, expr, params, generation=0):
        params = np.asarray(params, dtype=float).reshape(-1)
        if params.shape[0] != ExpressaoService.param_count(expr):
            raise ValueError("Tamanho do vetor de parâmetros não confere com a árvore")
        self._expr = expr
        self._params = params
        self.generation = generation
        self._clear()

    def _clear(self):
        self.complexity = None
        self.mse = None
        self.fitness = None
        self._key = None

    @property
    def expr(self):
        return self._expr

    @expr.setter
    def expr(self, valor):
        self._expr = valor
        self._clear()

    @property
    def params(self):
        return self._params

    @params.setter
    def params(self, valor):
        self._params = np.asarray(valor, dtype=float).reshape(-1)
        self._clear()

    @property
    def key(self):
        if self._key is None:
            self._key = ExpressaoService.structure_key(self._expr)
        return self._key

    @property
    def invalid(self):
        return isinstance(self.mse, Invalid)

    @property
    def text(self):
        return ExpressaoService.serialize(self._expr, self._params)

    def copy(self):
        clone = Individual(self._expr, self._params.copy(), self.generation)
        clone.complexity = self.complexity
        clone.mse = self.mse
        clone.fitness = self.fitness
        return clone

    def __repr__(self):
        return f"<Individual(expr={self.text}, mse={self.mse}, fitness={self.fitness})>"


@dataclass
class RunStats:
    recoveries: int = 0
    invalid: int = 0            # candidatos descartados por Invalid na geração corrente
    history: list = field(default_factory=list)


@dataclass
class ReportEntry:
    rank: int
    expr: object
    params: np.ndarray
    text: str
    complexity: int
    mse: float
    fitness: float
    generation: int


@dataclass
class MmeReport:
    entries: list
    best: ReportEntry
    recoveries: int
    generations_run: int
    history: list


def _sort_value(valor):
    return math.inf if valor is None or isinstance(valor, Invalid) else valor


def _mse_batch(expr, params, data):
    """MSE de K vetores de parâmetros; inválidos recebem inf e um código de motivo"""
    alvos = data.target_matrix()
    total = None
    reasons = None
    for c, view in enumerate(data.views()):
        valores, motivos = ExpressaoService.evaluate_batch(expr, params, view)
        with np.errstate(all='ignore'):
            parcial = np.sum((valores - alvos[:, c][None, :]) ** 2, axis=1)
        total = parcial if total is None else total + parcial
        reasons = motivos if reasons is None else np.where(reasons == 0, motivos, reasons)
    mse = total / (data.n_rows * data.n_components)
    nao_finito = (reasons == 0) & ~np.isfinite(mse)
    reasons = np.where(nao_finito, 1, reasons)
    mse = np.where(reasons == 0, mse, np.inf)
    return mse, reasons


def _sample_params(rng, n, cfg):
    """Amostragem log-uniforme com sinal: magnitude em [max·10^-spread, max]"""
    topo = math.log10(cfg.init_max_magnitude)
    magnitudes = 10.0 ** rng.uniform(topo - cfg.init_spread, topo, size=n)
    sinais = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return sinais * magnitudes


class EvolucaoService:
    """Serviço da evolução macro-micro"""

    @staticmethod
    def fc(complexity, tau):
        """Penalidade de complexidade: max(0, complexity - tau) / tau"""
        if tau < 1:
            raise ConfigError("tau deve ser >= 1")
        return max(0, complexity - tau) / tau

    @staticmethod
    def accuracy_h(mse, worst_mse):
        """Acurácia relativa ao pior indivíduo válido da geração"""
        return mse / worst_mse

    @staticmethod
    def fitness(ind, worst_mse, cfg):
        """
        Aptidão f = rho·f^c + (1 - rho)·h (menor é melhor)

        Args:
            ind (Individual): Indivíduo com MSE já calculado
            worst_mse (float): Maior MSE finito da geração (> 0)
            cfg (MmeConfig): Configuração (rho, tau, custos)

        Returns:
            float | Invalid
        """
        if ind.mse is None:
            raise ValueError("MSE do indivíduo ainda não foi calculado")
        if isinstance(ind.mse, Invalid):
            return ind.mse
        if ind.complexity is None:
            ind.complexity = ExpressaoService.complexity(ind.expr, cfg.costs)
        f_c = EvolucaoService.fc(ind.complexity, cfg.tau)
        h = EvolucaoService.accuracy_h(ind.mse, worst_mse)
        return cfg.rho * f_c + (1.0 - cfg.rho) * h

    @staticmethod
    def compute_mse(ind, data):
        """MSE entre a expressão e os alvos; Invalid se qualquer linha for inválida"""
        mse, reasons = _mse_batch(ind.expr, ind.params.reshape(1, -1), data)
        if reasons[0]:
            return Invalid(REASON_CODES[int(reasons[0])])
        return float(mse[0])

    @staticmethod
    def score(pop, data, cfg):
        """Calcula MSE/complexidade pendentes e a aptidão relativa ao pior válido"""
        for ind in pop:
            if ind.mse is None:
                ind.mse = EvolucaoService.compute_mse(ind, data)
            if ind.complexity is None:
                ind.complexity = ExpressaoService.complexity(ind.expr, cfg.costs)
        finitos = [ind.mse for ind in pop if not ind.invalid]
        worst = max(finitos) if finitos else 1.0
        if worst <= 0:
            worst = 1.0
        for ind in pop:
            ind.fitness = EvolucaoService.fitness(ind, worst, cfg)
        return worst

    @staticmethod
    def rank_key(ind):
        return (_sort_value(ind.fitness), ind.complexity, ind.text)

    @staticmethod
    def remove_duplicates(pop):
        """
        Mantém um representante por estrutura: o de menor MSE

        Empates preservam o primeiro da lista (pais antes dos filhos).
        """
        melhores = {}
        ordem = []
        for ind in pop:
            atual = melhores.get(ind.key)
            if atual is None:
                melhores[ind.key] = ind
                ordem.append(ind.key)
            elif _sort_value(ind.mse) < _sort_value(atual.mse):
                melhores[ind.key] = ind
        return [melhores[chave] for chave in ordem]

    @staticmethod
    def micro_evolve(ind, data, cfg, rng):
        """
        Ajusta os parâmetros mantendo a estrutura

        (mu+lambda) com mutação multiplicativa log-normal em três escalas e
        troca de sinal. O vetor atual faz parte da população inicial, então o
        resultado nunca tem MSE maior que a entrada.

        Returns:
            Individual: Nova instância com a mesma estrutura
        """
        n_params = ExpressaoService.param_count(ind.expr)
        if ind.mse is None:
            ind.mse = EvolucaoService.compute_mse(ind, data)
        if n_params == 0:
            return ind

        mu = cfg.micro_population
        atual = ind.params.reshape(1, -1)
        n_mutados = (mu - 1) // 2
        mutados = EvolucaoService._micro_mutate(np.repeat(atual, n_mutados, axis=0), cfg, rng)
        aleatorios = _sample_params(rng, (mu - 1 - n_mutados) * n_params, cfg).reshape(-1, n_params)
        populacao = np.vstack([atual, mutados, aleatorios])
        mses, _ = _mse_batch(ind.expr, populacao, data)

        melhor = mses.min()
        estagnado = 0
        for _ in range(cfg.micro_generations):
            ordem = np.argsort(mses, kind='stable')
            pais = populacao[ordem[:max(1, mu // 2)]]
            i1 = rng.integers(len(pais), size=mu)
            i2 = rng.integers(len(pais), size=mu)
            cruza = rng.random((mu, n_params)) < 0.5
            filhos = np.where(cruza, pais[i2], pais[i1])
            filhos = EvolucaoService._micro_mutate(filhos, cfg, rng)
            mses_filhos, _ = _mse_batch(ind.expr, filhos, data)

            todos = np.vstack([populacao, filhos])
            todos_mse = np.concatenate([mses, mses_filhos])
            escolhidos = np.argsort(todos_mse, kind='stable')[:mu]
            populacao, mses = todos[escolhidos], todos_mse[escolhidos]

            novo = mses[0]
            if math.isfinite(melhor):
                ganho = (melhor - novo) / max(abs(melhor), 1e-300)
            else:
                ganho = math.inf if math.isfinite(novo) else 0.0
            estagnado = estagnado + 1 if ganho < cfg.convergence_tol else 0
            melhor = min(melhor, novo)
            if estagnado >= cfg.patience:
                break

        indice = int(np.argsort(mses, kind='stable')[0])
        if not math.isfinite(mses[indice]):
            resultado = ind.copy()
            resultado.mse = ind.mse if ind.invalid else Invalid(InvalidReason.NON_FINITE)
            return resultado
        if not ind.invalid and mses[indice] >= ind.mse:
            return ind
        resultado = Individual(ind.expr, populacao[indice], ind.generation)
        resultado.mse = float(mses[indice])
        resultado.complexity = ind.complexity
        return resultado

    @staticmethod
    def _micro_mutate(params, cfg, rng):
        if params.size == 0:
            return params
        escalas = cfg.mutation_sigma * np.array([1.0, 0.1, 0.01])[rng.integers(3, size=(params.shape[0], 1))]
        novos = params * np.exp(escalas * rng.standard_normal(params.shape))
        sinais = np.where(rng.random(params.shape) < cfg.sign_flip_rate, -1.0, 1.0)
        novos = np.clip(novos * sinais, -1e300, 1e300)
        zeros = novos == 0
        if np.any(zeros):
            novos[zeros] = _sample_params(rng, int(zeros.sum()), cfg)
        return novos

    @staticmethod
    def random_individual(rng, gerador, cfg, max_depth, method='grow', generation=0):
        for _ in range(100):
            expr = gerador.tree(rng, max_depth, method)
            if ExpressaoService.node_count(expr) <= cfg.max_nodes:
                break
        params = _sample_params(rng, ExpressaoService.param_count(expr), cfg.micro)
        return Individual(expr, params, generation)

    @staticmethod
    def initial_population(rng, n_features, cfg, size=None, generation=0):
        """Metade 'grow', metade 'full', profundidades de 1 a init_max_depth"""
        size = size or cfg.population_size
        gerador = GeradorArvores(n_features, cfg.operators)
        profundidades = max(1, cfg.init_max_depth)
        return [
            EvolucaoService.random_individual(
                rng, gerador, cfg, 1 + (i // 2) % profundidades,
                'grow' if i % 2 == 0 else 'full', generation,
            )
            for i in range(size)
        ]

    @staticmethod
    def _tournament(rng, pop, size):
        indices = rng.integers(len(pop), size=size)
        return min((pop[i] for i in indices), key=lambda ind: (_sort_value(ind.fitness), ind.complexity))

    @staticmethod
    def crossover(rng, pai, mae):
        """Troca de subárvore: um nó aleatório de `pai` recebe uma subárvore de `mae`"""
        caminhos = [c for c, _ in ExpressaoService.iter_nodes(pai.expr)]
        doadores = [n for _, n in ExpressaoService.iter_nodes(mae.expr)]
        caminho = caminhos[int(rng.integers(len(caminhos)))]
        doado = doadores[int(rng.integers(len(doadores)))]
        doado = ExpressaoService.shift_slots(doado, len(pai.params))
        expr = ExpressaoService.replace_node(pai.expr, caminho, doado)
        expr, params = ExpressaoService.canonicalize(expr, np.concatenate([pai.params, mae.params]))
        return Individual(expr, params, pai.generation)

    @staticmethod
    def mutate(rng, ind, n_features, cfg):
        """Uma de três mutações: nova subárvore, troca de operador, troca de folha"""
        gerador = GeradorArvores(n_features, cfg.operators)
        escolha = int(rng.integers(3))
        nos = list(ExpressaoService.iter_nodes(ind.expr))

        if escolha == 1:
            operadores = [(c, n) for c, n in nos if isinstance(n, Operator)]
            if operadores:
                caminho, no = operadores[int(rng.integers(len(operadores)))]
                alternativas = [op for op in cfg.operators if ARITY[op] == ARITY[no.kind] and op is not no.kind]
                if alternativas:
                    novo = Operator(alternativas[int(rng.integers(len(alternativas)))], no.children)
                    expr = ExpressaoService.replace_node(ind.expr, caminho, novo)
                    expr, params = ExpressaoService.canonicalize(expr, ind.params)
                    return Individual(expr, params, ind.generation)
        elif escolha == 2 and n_features > 0:
            folhas = [(c, n) for c, n in nos if not isinstance(n, Operator)]
            caminho, folha = folhas[int(rng.integers(len(folhas)))]
            extra = np.empty(0)
            if isinstance(folha, Parameter):
                nova = Variable(int(rng.integers(n_features)))
            else:
                nova = Parameter(len(ind.params))
                extra = _sample_params(rng, 1, cfg.micro)
            expr = ExpressaoService.replace_node(ind.expr, caminho, nova)
            expr, params = ExpressaoService.canonicalize(expr, np.concatenate([ind.params, extra]))
            return Individual(expr, params, ind.generation)

        caminho, _ = nos[int(rng.integers(len(nos)))]
        sub = gerador.tree(rng, int(rng.integers(cfg.mutation_max_depth + 1)), 'grow')
        sub_params = _sample_params(rng, ExpressaoService.param_count(sub), cfg.micro)
        sub = ExpressaoService.shift_slots(sub, len(ind.params))
        expr = ExpressaoService.replace_node(ind.expr, caminho, sub)
        expr, params = ExpressaoService.canonicalize(expr, np.concatenate([ind.params, sub_params]))
        return Individual(expr, params, ind.generation)

    @staticmethod
    def merge_offspring(pais, filhos, data, cfg, stats=None):
        """
        Junta pais e filhos numa lista ordenada, sem duplicatas estruturais

        O MSE dos filhos é calculado antes da remoção de duplicatas, para que
        um filho de mesma estrutura e MSE menor substitua o pai.
        Os inválidos são descartados e contados em `stats.invalid`.
        """
        for ind in filhos:
            if ind.mse is None:
                ind.mse = EvolucaoService.compute_mse(ind, data)
        candidatos = EvolucaoService.remove_duplicates(list(pais) + list(filhos))
        EvolucaoService.score(candidatos, data, cfg)
        validos = [ind for ind in candidatos if not ind.invalid]
        if stats is not None:
            stats.invalid = len(candidatos) - len(validos)
        validos.sort(key=EvolucaoService.rank_key)
        return validos

    @staticmethod
    def macro_generation(pop, data, cfg, rng, generation=0, stats=None, jobs=1):
        """
        Uma geração da camada macro

        1. remoção de duplicatas e pontuação da população de entrada
        2. seleção por torneio, crossover e mutação gerando filhos
        3. MSE dos filhos e remoção de duplicatas (fica o representante de menor MSE)
        4. primeira pontuação: ordena filhos + pais, descartando e contando os inválidos
        5. sobreviventes (survivor_fraction · population_size) passam pela micro evolução
        6. nova pontuação

        Returns:
            list: Sobreviventes ordenados, sem duplicatas estruturais
        """
        stats = stats if stats is not None else RunStats()
        if not pop:
            raise ConfigError("População vazia")

        pop = EvolucaoService.remove_duplicates(list(pop))
        EvolucaoService.score(pop, data, cfg)
        validos = [ind for ind in pop if not ind.invalid]

        tentativas = 0
        while not validos:
            tentativas += 1
            if tentativas > 5:
                raise NumericalError("População degenerada: nenhuma expressão válida após 5 reinícios")
            stats.recoveries += 1
            logger.warning(f"⚠️ Geração {generation}: população degenerada, reiniciando com árvores aleatórias")
            pop = EvolucaoService.initial_population(rng, data.n_features, cfg, generation=generation)
            pop = EvolucaoService.remove_duplicates(pop)
            EvolucaoService.score(pop, data, cfg)
            validos = [ind for ind in pop if not ind.invalid]

        filhos = []
        for _ in range(cfg.population_size):
            pai = EvolucaoService._tournament(rng, validos, cfg.tournament_size)
            if rng.random() < cfg.crossover_rate:
                mae = EvolucaoService._tournament(rng, validos, cfg.tournament_size)
                filho = EvolucaoService.crossover(rng, pai, mae)
            else:
                filho = Individual(pai.expr, pai.params.copy(), pai.generation)
            if rng.random() < cfg.mutation_rate:
                filho = EvolucaoService.mutate(rng, filho, data.n_features, cfg)
            if ExpressaoService.node_count(filho.expr) > cfg.max_nodes:
                continue
            filho.generation = generation
            filhos.append(filho)

        candidatos = EvolucaoService.merge_offspring(validos, filhos, data, cfg, stats)

        n_sobreviventes = max(1, int(round(cfg.survivor_fraction * cfg.population_size)))
        sobreviventes = candidatos[:n_sobreviventes]
        elite_mse = min(candidatos, key=lambda ind: (ind.mse, ind.complexity, ind.text))
        if all(ind is not elite_mse for ind in sobreviventes):
            sobreviventes.append(elite_mse)

        ajustados = Parallel(n_jobs=jobs, prefer='threads')(
            delayed(EvolucaoService.micro_evolve)(
                ind, data, cfg.micro, np.random.default_rng([cfg.rng_seed, generation, i])
            )
            for i, ind in enumerate(sobreviventes)
        )
        ajustados = [ind for ind in ajustados if not ind.invalid]
        EvolucaoService.score(ajustados, data, cfg)
        ajustados.sort(key=EvolucaoService.rank_key)
        return ajustados[:cfg.population_size]

    @staticmethod
    def report_best_key(entry, tau):
        return (EvolucaoService.fc(entry.complexity, tau), entry.mse, entry.complexity, entry.text)

    @staticmethod
    def run_mme(data, cfg, jobs=1):
        """
        Executa a evolução completa

        Args:
            data (RegressionDataset): Amostras (entradas -> alvo)
            cfg (MmeConfig): Configuração
            jobs (int): Trabalhadores para a micro evolução

        Returns:
            MmeReport: Entradas ordenadas por complexidade e depois MSE
        """
        if data is None or data.n_rows == 0:
            raise ConfigError("Dataset vazio")

        logger.info(
            f"🔄 MME: população {cfg.population_size}, {cfg.max_generations} gerações, "
            f"tau={cfg.tau}, rho={cfg.rho}, {data.n_rows} linhas"
        )
        rng = np.random.default_rng(cfg.rng_seed)
        stats = RunStats()
        pop = EvolucaoService.initial_population(rng, data.n_features, cfg)
        hall = {}

        def _registrar(populacao):
            for ind in populacao:
                atual = hall.get(ind.key)
                if atual is None:
                    hall[ind.key] = ind.copy()
                elif ind.mse < atual.mse:
                    melhor = ind.copy()
                    melhor.generation = atual.generation
                    hall[ind.key] = melhor

        for geracao in range(1, cfg.max_generations + 1):
            pop = EvolucaoService.macro_generation(pop, data, cfg, rng, geracao, stats, jobs)
            _registrar(pop)
            melhor = pop[0]
            melhor_mse = min(ind.mse for ind in pop)
            stats.history.append({
                'generation': geracao,
                'best_fitness': melhor.fitness,
                'best_mse': melhor_mse,
                'population': len(pop),
                'recoveries': stats.recoveries,
                'invalid': stats.invalid,
            })
            logger.info(
                f"📊 Geração {geracao}: melhor aptidão {melhor.fitness:.6g}, "
                f"melhor MSE {melhor_mse:.6g}, população {len(pop)}, {stats.invalid} inválido(s)"
            )

        if not hall:
            EvolucaoService.score(pop, data, cfg)
            _registrar([ind for ind in pop if not ind.invalid])
        if not hall:
            raise NumericalError("Nenhuma expressão válida encontrada")

        melhores = list(hall.values())
        EvolucaoService.score(melhores, data, cfg)
        melhores.sort(key=EvolucaoService.rank_key)
        selecionados = melhores[:cfg.report_size]
        selecionados.sort(key=lambda ind: (ind.complexity, ind.mse, ind.text))

        entries = [
            ReportEntry(
                rank=i + 1, expr=ind.expr, params=ind.params.copy(), text=ind.text,
                complexity=ind.complexity, mse=ind.mse, fitness=ind.fitness,
                generation=ind.generation,
            )
            for i, ind in enumerate(selecionados)
        ]
        best = min(entries, key=lambda e: EvolucaoService.report_best_key(e, cfg.tau))
        logger.info(f"✅ MME concluída: melhor expressão {best.text} (MSE {best.mse:.6g})")
        return MmeReport(entries, best, stats.recoveries, cfg.max_generations, stats.history)
