"""
Surrogate da fase 1: rede totalmente conectada usada como modelo de aresta

Implementação própria em numpy (forward, backpropagation e Adam). A rede
mapeia as features de um par (agente, vizinho) para a mensagem da aresta
(vetor de força); o modelo de nó é a soma das mensagens (hex/square) ou a
média (boids).
"""

import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DatasetError, MissingArtifactError, NumericalError
from .datasets import DatasetService, NormalizationRecord, pair_features

logger = logging.getLogger(__name__)

MODEL_HEADER = '# swarm-symreg surrogate v1'
ACTIVATIONS = ('tanh', 'relu')


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 256
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden: tuple = (300, 300)
    activation: str = 'tanh'
    validation_fraction: float = 0.1
    max_target_norm: float = 500.0
    max_samples: int = 20000     # 0 = sem limite
    rng_seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs e batch_size devem ser >= 1")
        if self.learning_rate <= 0 or self.eps <= 0:
            raise ConfigError("learning_rate e eps devem ser positivos")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("beta1 e beta2 devem estar em [0, 1)")
        if not self.hidden or any(int(h) < 1 for h in self.hidden):
            raise ConfigError("Camadas ocultas devem ter ao menos um neurônio")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"Ativação desconhecida: {self.activation}. Use uma de {ACTIVATIONS}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction deve estar em [0, 1)")
        if self.max_target_norm <= 0 or self.max_samples < 0:
            raise ConfigError("max_target_norm deve ser positivo e max_samples >= 0")


@dataclass
class Mlp:
    """
    Rede in -> hidden... -> out

    `weights[k]` tem forma (entrada, saída) e as ativações ocultas são
    `activation`; a saída é identidade. `normalization` e `target_scale`
    acompanham o modelo para converter unidades físicas.
    """

    weights: list
    biases: list
    activation: str = 'tanh'
    normalization: NormalizationRecord = None
    target_scale: float = 1.0
    behavior: str = ''
    aggregation: str = 'sum'

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ConfigError("Mlp precisa de pares peso/viés")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ConfigError(f"Camada {k} com formas inconsistentes")
            if k > 0 and self.weights[k - 1].shape[1] != w.shape[0]:
                raise ConfigError(f"Camadas {k - 1} e {k} não encadeiam")

    @property
    def sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def parameters(self):
        return list(self.weights) + list(self.biases)

    def copy(self):
        return Mlp(
            [w.copy() for w in self.weights], [b.copy() for b in self.biases], self.activation,
            self.normalization, self.target_scale, self.behavior, self.aggregation,
        )

    @classmethod
    def init(cls, sizes, rng, activation='tanh'):
        """Inicialização de Xavier (uniforme) com vieses nulos"""
        pesos, vieses = [], []
        for entrada, saida in zip(sizes[:-1], sizes[1:]):
            limite = math.sqrt(6.0 / (entrada + saida))
            pesos.append(rng.uniform(-limite, limite, size=(entrada, saida)))
            vieses.append(np.zeros(saida))
        return cls(pesos, vieses, activation)


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0, lr, beta1, beta2, eps)


@dataclass
class TrainResult:
    net: Mlp
    trace: list                 # dicts epoch/train_loss/val_loss
    best_epoch: int
    dropped: int = 0
    n_train: int = 0
    n_val: int = 0
    meta: dict = field(default_factory=dict)


def _activate(z, nome):
    if nome == 'tanh':
        return np.tanh(z)
    return np.maximum(z, 0.0)


def _activation_grad(a, nome):
    if nome == 'tanh':
        return 1.0 - a * a
    return (a > 0.0).astype(float)


def _forward_cache(net, x):
    ativacoes = [x]
    ultima = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = ativacoes[-1] @ w + b
        ativacoes.append(z if k == ultima else _activate(z, net.activation))
    return ativacoes


def _backprop(net, ativacoes, grad_saida):
    n_camadas = len(net.weights)
    grads_w = [None] * n_camadas
    grads_b = [None] * n_camadas
    delta = grad_saida
    for k in range(n_camadas - 1, -1, -1):
        grads_w[k] = ativacoes[k].T @ delta
        grads_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ net.weights[k].T) * _activation_grad(ativacoes[k], net.activation)
    return grads_w + grads_b


class _Problema:
    """Entradas normalizadas e alvos escalados, por unidade de treino (aresta ou nó)"""

    def __init__(self, entradas, alvos, grupos=None):
        self.entradas = entradas
        self.alvos = alvos
        self.media = grupos is not None
        if self.media:
            ordem = np.argsort(grupos, kind='stable')
            self.entradas = entradas[ordem]
            contagem = np.bincount(grupos, minlength=alvos.shape[0])
            self.inicios = np.cumsum(contagem) - contagem
            self.contagem = contagem

    @property
    def n_unidades(self):
        return self.alvos.shape[0]

    def lote(self, unidades):
        """Entradas do lote e índice local do nó de cada aresta (None no modo aresta)"""
        if not self.media:
            return self.entradas[unidades], None, None
        contagem = self.contagem[unidades]
        total = int(contagem.sum())
        deslocamento = np.cumsum(contagem) - contagem
        indices = np.arange(total) - np.repeat(deslocamento, contagem) + np.repeat(self.inicios[unidades], contagem)
        local = np.repeat(np.arange(unidades.size), contagem)
        return self.entradas[indices], local, contagem

    def perda(self, net, unidades, com_grad=True):
        x, local, contagem = self.lote(unidades)
        ativacoes = _forward_cache(net, x)
        saida = ativacoes[-1]
        alvo = self.alvos[unidades]
        if local is not None:
            previsto = np.zeros_like(alvo)
            np.add.at(previsto, local, saida)
            previsto /= contagem[:, None]
        else:
            previsto = saida
        erro = previsto - alvo
        perda = float(np.mean(erro ** 2))
        if not com_grad:
            return perda, None
        grad = 2.0 * erro / erro.size
        if local is not None:
            grad = grad[local] / contagem[local][:, None]
        return perda, _backprop(net, ativacoes, grad)

    def perda_total(self, net, unidades, bloco=4096):
        if unidades.size == 0:
            return float('nan')
        soma = 0.0
        for inicio in range(0, unidades.size, bloco):
            parte = unidades[inicio:inicio + bloco]
            perda, _ = self.perda(net, parte, com_grad=False)
            soma += perda * parte.size
        return soma / unidades.size


class SurrogateService:
    """Serviço do surrogate (rede de aresta)"""

    @staticmethod
    def forward(net, entrada):
        """Cadeia afim + ativação; aceita um vetor ou uma matriz (linhas = amostras)"""
        x = np.asarray(entrada, dtype=float)
        vetor = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != net.sizes[0]:
            raise ValueError(f"Entrada com {x.shape[1]} colunas; a rede espera {net.sizes[0]}")
        saida = _forward_cache(net, x)[-1]
        return saida[0] if vetor else saida

    @staticmethod
    def backward(net, entrada, alvo):
        """
        Perda MSE e gradientes exatos de todos os parâmetros

        Returns:
            tuple: (perda, gradientes na ordem de `net.parameters()`)
        """
        x = np.atleast_2d(np.asarray(entrada, dtype=float))
        t = np.asarray(alvo, dtype=float).reshape(x.shape[0], -1)
        ativacoes = _forward_cache(net, x)
        erro = ativacoes[-1] - t
        perda = float(np.mean(erro ** 2))
        return perda, _backprop(net, ativacoes, 2.0 * erro / erro.size)

    @staticmethod
    def adam_step(params, grads, state):
        """Atualização de Adam com correção de viés (in-place); incrementa t"""
        if len(params) != len(grads) or len(params) != len(state.m):
            raise ValueError("params, grads e estado do Adam não se alinham")
        state.t += 1
        correcao1 = 1.0 - state.beta1 ** state.t
        correcao2 = 1.0 - state.beta2 ** state.t
        for p, g, m, v in zip(params, grads, state.m, state.v):
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * g * g
            p -= state.lr * (m / correcao1) / (np.sqrt(v / correcao2) + state.eps)
        return params, state

    @staticmethod
    def aggregate_node(messages, mode='sum'):
        """Soma (hex/square) ou média (boids) das mensagens; lista vazia -> zero"""
        mensagens = np.asarray(messages, dtype=float)
        if mensagens.size == 0:
            return np.zeros(2)
        mensagens = mensagens.reshape(-1, mensagens.shape[-1])
        if mode == 'sum':
            return mensagens.sum(axis=0)
        if mode == 'mean':
            return mensagens.mean(axis=0)
        raise ValueError(f"Modo de agregação desconhecido: {mode}")

    @staticmethod
    def train_edge_model(samples, cfg):
        """
        Treina o modelo de aresta com mini-lotes embaralhados e Adam

        Modo aresta (hex/square): alvo = força de cada par. Modo média (boids):
        as mensagens das arestas de cada nó são agregadas pela média e comparadas
        com a aceleração do nó. Devolve o checkpoint de menor perda de validação.

        Raises:
            DatasetError: sem amostras utilizáveis
            NumericalError: perda não finita durante o treino
        """
        rng = np.random.default_rng(cfg.rng_seed)
        entradas = samples.inputs()
        media = samples.groups is not None
        alvos = samples.node_targets if media else samples.targets
        if entradas.shape[0] == 0 or alvos is None or alvos.shape[0] == 0:
            raise DatasetError("Nenhuma amostra de treino")
        alvos = alvos.reshape(alvos.shape[0], -1)

        normas = np.linalg.norm(alvos, axis=1)
        mantidos = np.nonzero(normas <= cfg.max_target_norm)[0]
        descartados = alvos.shape[0] - mantidos.size
        if descartados:
            logger.warning(f"⚠️ {descartados} amostra(s) com |alvo| > {cfg.max_target_norm} descartada(s)")
        if cfg.max_samples and mantidos.size > cfg.max_samples:
            mantidos = np.sort(rng.choice(mantidos, size=cfg.max_samples, replace=False))
        if mantidos.size == 0:
            raise DatasetError("Todas as amostras foram descartadas pelo limite de norma do alvo")

        grupos = None
        if media:
            mapa = np.full(alvos.shape[0], -1)
            mapa[mantidos] = np.arange(mantidos.size)
            arestas = mapa[samples.groups] >= 0
            entradas = entradas[arestas]
            grupos = mapa[samples.groups[arestas]]
        else:
            entradas = entradas[mantidos]
        alvos = alvos[mantidos]

        unidades = rng.permutation(alvos.shape[0])
        n_val = int(round(cfg.validation_fraction * unidades.size)) if unidades.size >= 10 else 0
        validacao, treino = unidades[:n_val], unidades[n_val:]

        arestas_treino = entradas if not media else entradas[np.isin(grupos, treino)]
        registro = DatasetService.fit_normalization(
            arestas_treino, samples.input_names(), samples.behavior, samples.source_runs
        )
        escala = float(np.sqrt(np.mean(alvos[treino] ** 2))) or 1.0

        problema = _Problema(DatasetService.normalize(entradas, registro), alvos / escala, grupos)
        sizes = [entradas.shape[1], *[int(h) for h in cfg.hidden], alvos.shape[1]]
        net = Mlp.init(sizes, rng, cfg.activation)
        net.normalization = registro
        net.target_scale = escala
        net.behavior = samples.behavior
        net.aggregation = 'mean' if media else 'sum'
        estado = AdamState.for_params(net.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)

        logger.info(
            f"🔄 Treinando surrogate {sizes} em {treino.size} unidade(s) ({n_val} de validação), "
            f"{cfg.epochs} épocas"
        )
        trace = []
        melhor, melhor_perda, melhor_epoca = net.copy(), math.inf, 0
        for epoca in range(1, cfg.epochs + 1):
            ordem = rng.permutation(treino)
            for inicio in range(0, ordem.size, cfg.batch_size):
                perda, grads = problema.perda(net, ordem[inicio:inicio + cfg.batch_size])
                if not math.isfinite(perda):
                    raise NumericalError(f"Treino divergiu na época {epoca} (perda {perda})")
                SurrogateService.adam_step(net.parameters(), grads, estado)

            perda_treino = problema.perda_total(net, treino)
            perda_val = problema.perda_total(net, validacao)
            if not math.isfinite(perda_treino):
                raise NumericalError(f"Treino divergiu na época {epoca} (perda {perda_treino})")
            trace.append({'epoch': epoca, 'train_loss': perda_treino, 'val_loss': perda_val})
            criterio = perda_val if n_val else perda_treino
            if criterio < melhor_perda:
                melhor, melhor_perda, melhor_epoca = net.copy(), criterio, epoca
            logger.debug(f"📊 Época {epoca}: treino {perda_treino:.6g}, validação {perda_val:.6g}")

        logger.info(f"✅ Surrogate treinado: melhor época {melhor_epoca} (perda {melhor_perda:.6g})")
        return TrainResult(
            melhor, trace, melhor_epoca, int(descartados), int(treino.size), int(n_val),
            {'aggregation': net.aggregation, 'target_scale': escala},
        )

    @staticmethod
    def predict(net, entradas):
        """Saída em unidades físicas a partir de entradas brutas"""
        x = np.atleast_2d(np.asarray(entradas, dtype=float))
        if net.normalization is not None:
            x = DatasetService.normalize(x, net.normalization)
        return SurrogateService.forward(net, x) * net.target_scale

    @staticmethod
    def _pair_inputs(d, r, edge_attr=None):
        x = pair_features(d, r)
        if edge_attr is not None:
            x = np.column_stack([x, np.broadcast_to(np.asarray(edge_attr, dtype=float), r.shape)])
        return x

    @staticmethod
    def trained_range(net, column='r'):
        """Intervalo [min, max] visto no treino para uma coluna de entrada, ou None"""
        registro = net.normalization
        if registro is None or column not in registro.columns:
            return None
        k = list(registro.columns).index(column)
        return [float(registro.mins[k]), float(registro.maxs[k])]

    @staticmethod
    def sample_surrogate(net, behavior, n, rng):
        """
        Consulta a rede em pares de sonda e monta o dataset de regressão

        hex/square: alvo = força radial prevista (positiva = repulsiva) em função de r;
        square com metades balanceadas de edge_attr 1 e 2. boids: 12 priors -> (fx, fy).

        As linhas com r fora do intervalo visto no treino (pares próximos
        descartados pelo limite de norma do alvo) são extrapolações da rede;
        a contagem vai em `meta['extrapolated_rows']`.
        """
        if behavior != net.behavior and net.behavior:
            raise ConfigError(f"Modelo treinado para '{net.behavior}', pedido '{behavior}'")
        sonda = DatasetService.probe_pairs(behavior, n, rng)
        meta = {'source': 'surrogate'}
        if behavior == 'boids':
            features, _ = DatasetService.compute_priors_batch(sonda['d'], sonda['v'])
            alvos = SurrogateService.predict(net, features)
        else:
            forca = SurrogateService.predict(net, SurrogateService._pair_inputs(sonda['d'], sonda['r'], sonda.get('edge_attr')))
            alvos = -np.sum(forca * sonda['d'], axis=1) / sonda['r']
            faixa = SurrogateService.trained_range(net, 'r')
            if faixa is not None:
                fora = int(np.count_nonzero((sonda['r'] < faixa[0]) | (sonda['r'] > faixa[1])))
                meta.update(trained_r_range_m=faixa, extrapolated_rows=fora)
                if fora:
                    logger.warning(
                        f"⚠️ {fora} de {n} amostra(s) com r fora do intervalo de treino "
                        f"[{faixa[0]:.4g}, {faixa[1]:.4g}] m"
                    )
        logger.info(f"📊 {n} amostras do surrogate '{behavior}'")
        return DatasetService.build_regression_dataset(behavior, sonda, alvos, meta)

    @staticmethod
    def _bearings(r_values, n_bearings):
        r = np.asarray(r_values, dtype=float)
        theta = 2.0 * math.pi * np.arange(n_bearings) / n_bearings
        rr = np.repeat(r, n_bearings)
        tt = np.tile(theta, r.size)
        return np.column_stack([rr * np.cos(tt), rr * np.sin(tt)]), rr

    @staticmethod
    def radial_curve(net, r_values, edge_attr=None, n_bearings=8):
        """Força radial prevista (positiva = repulsiva), média sobre direções igualmente espaçadas"""
        d, rr = SurrogateService._bearings(r_values, n_bearings)
        forca = SurrogateService.predict(net, SurrogateService._pair_inputs(d, rr, edge_attr))
        radial = -np.sum(forca * d, axis=1) / rr
        return radial.reshape(-1, n_bearings).mean(axis=1)

    @staticmethod
    def angular_errors(net, r_values, edge_attr=None, n_bearings=8):
        """Ângulo (graus) entre a força prevista e o eixo do par, por r e direção"""
        d, rr = SurrogateService._bearings(r_values, n_bearings)
        forca = SurrogateService.predict(net, SurrogateService._pair_inputs(d, rr, edge_attr))
        norma = np.linalg.norm(forca, axis=1)
        cosseno = np.abs(np.sum(forca * d, axis=1)) / np.where(norma > 0, norma * rr, np.inf)
        return np.degrees(np.arccos(np.clip(cosseno, 0.0, 1.0))).reshape(-1, n_bearings)

    @staticmethod
    def sign_changes(r_values, values):
        """Raízes estimadas por interpolação linear entre mudanças de sinal"""
        r = np.asarray(r_values, dtype=float)
        y = np.asarray(values, dtype=float)
        raizes = []
        for k in range(r.size - 1):
            if y[k] == 0.0:
                raizes.append(float(r[k]))
            elif y[k] * y[k + 1] < 0.0:
                raizes.append(float(r[k] - y[k] * (r[k + 1] - r[k]) / (y[k + 1] - y[k])))
        return raizes

    # ------------------------------------------------------------------
    # Persistência
    # ------------------------------------------------------------------

    @staticmethod
    def save_model(net, path):
        """Cabeçalho texto seguido dos blocos de pesos/vieses em ordem de linhas"""
        def _linha(valores):
            return ' '.join(format(float(v), '.17g') for v in np.ravel(valores))

        linhas = [
            MODEL_HEADER,
            f"behavior {net.behavior}",
            f"aggregation {net.aggregation}",
            f"activation {net.activation}",
            f"layers {' '.join(str(s) for s in net.sizes)}",
            f"target_scale {format(net.target_scale, '.17g')}",
        ]
        if net.normalization is not None:
            linhas += [
                f"columns {' '.join(net.normalization.columns)}",
                f"in_min {_linha(net.normalization.mins)}",
                f"in_max {_linha(net.normalization.maxs)}",
            ]
        for k, (w, b) in enumerate(zip(net.weights, net.biases)):
            linhas.append(f"W {k} {w.shape[0]} {w.shape[1]}")
            linhas.extend(_linha(linha) for linha in w)
            linhas.append(f"b {k} {b.shape[0]}")
            linhas.append(_linha(b))
        with open(path, 'w') as arquivo:
            arquivo.write('\n'.join(linhas) + '\n')
        logger.info(f"💾 Modelo salvo em {path}")

    @staticmethod
    def load_model(path):
        if not os.path.exists(path):
            raise MissingArtifactError(path, 'train-surrogate')
        with open(path) as arquivo:
            linhas = arquivo.read().splitlines()
        if not linhas or linhas[0] != MODEL_HEADER:
            raise DatasetError("Cabeçalho de modelo inválido", path, 1)

        campos = {}
        pos = 1
        while pos < len(linhas) and not linhas[pos].startswith('W '):
            chave, _, valor = linhas[pos].partition(' ')
            campos[chave] = valor
            pos += 1

        pesos, vieses = [], []
        try:
            while pos < len(linhas):
                _, _, linhas_w, colunas_w = linhas[pos].split()
                linhas_w, colunas_w = int(linhas_w), int(colunas_w)
                bloco = [[float(v) for v in linhas[pos + 1 + k].split()] for k in range(linhas_w)]
                pesos.append(np.array(bloco).reshape(linhas_w, colunas_w))
                pos += 1 + linhas_w
                vieses.append(np.array([float(v) for v in linhas[pos + 1].split()]))
                pos += 2
        except (ValueError, IndexError):
            raise DatasetError("Bloco de pesos malformado", path, pos + 1)

        normalizacao = None
        if 'columns' in campos:
            normalizacao = NormalizationRecord(
                campos['columns'].split(),
                [float(v) for v in campos['in_min'].split()],
                [float(v) for v in campos['in_max'].split()],
                campos.get('behavior', ''),
            )
        return Mlp(
            pesos, vieses, campos.get('activation', 'tanh'), normalizacao,
            float(campos.get('target_scale', 1.0)), campos.get('behavior', ''), campos.get('aggregation', 'sum'),
        )
