"""
Encanamento de dados entre as fases do pipeline

Trajetórias -> amostras de aresta (treino do surrogate), priors dos boids,
normalização [0, 1] e persistência dos datasets de regressão em CSV.
"""

import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..errors import DatasetError, MissingArtifactError
from .mme import RegressionDataset
from .swarmsim import BehaviorParams, SimulacaoService, TrajectoryLog

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 'swarm-symreg/v1'
R_RANGE = (0.07, 0.4)

PAIR_FEATURES = ('dx', 'dy', 'r', 'inv_r')

BOIDS_PRIORS_NAMES = (
    'dx', 'dy', 'dvx', 'dvy',
    'norm_dx', 'norm_dv', 'inv_norm_dx', 'inv_norm_dv',
    'dx_hat', 'dy_hat', 'dvx_hat', 'dvy_hat',
)

# Vista da componente y: troca os pares x/y (dx<->dy, dvx<->dvy, dx_hat<->dy_hat, dvx_hat<->dvy_hat)
BOIDS_Y_PERMUTATION = (1, 0, 3, 2, 4, 5, 6, 7, 9, 8, 11, 10)

CSV_OPTIONS = dict(index=False, float_format='%.17g', lineterminator='\n')


@dataclass(frozen=True)
class PriorSpec:
    """Lista nomeada de features derivadas de (Δx, Δv), em ordem fixa"""

    names: tuple = BOIDS_PRIORS_NAMES
    y_permutation: tuple = BOIDS_Y_PERMUTATION

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise DatasetError("Nomes de priors repetidos")


BOIDS_PRIORS = PriorSpec()


@dataclass
class NormalizationRecord:
    columns: list
    mins: np.ndarray
    maxs: np.ndarray
    behavior: str = ''
    source_runs: list = field(default_factory=list)

    def __post_init__(self):
        self.mins = np.asarray(self.mins, dtype=float)
        self.maxs = np.asarray(self.maxs, dtype=float)
        if len(self.columns) != self.mins.shape[0] or self.mins.shape != self.maxs.shape:
            raise DatasetError("Registro de normalização com tamanhos inconsistentes")
        constantes = [nome for nome, lo, hi in zip(self.columns, self.mins, self.maxs) if not hi > lo]
        if constantes:
            raise DatasetError(f"Coluna(s) constante(s) não podem ser normalizadas: {', '.join(constantes)}")


@dataclass(frozen=True)
class EdgeSample:
    features: np.ndarray
    target: np.ndarray = None
    edge_attr: int = None


@dataclass
class EdgeSampleSet:
    """
    Amostras de aresta em forma de matriz

    hex/square: `targets` traz a força registrada de cada par (M x 2).
    boids: `groups` liga cada aresta ao seu nó e `node_targets` traz a
    aceleração de cada nó (G x 2), para treino através da agregação por média.
    """

    behavior: str
    features: np.ndarray
    feature_names: list
    targets: np.ndarray = None
    edge_attr: np.ndarray = None
    groups: np.ndarray = None
    node_targets: np.ndarray = None
    skipped: int = 0
    flagged: int = 0
    source_runs: list = field(default_factory=list)

    def __len__(self):
        return self.features.shape[0]

    def __getitem__(self, k):
        return EdgeSample(
            self.features[k],
            None if self.targets is None else self.targets[k],
            None if self.edge_attr is None else int(self.edge_attr[k]),
        )

    @property
    def aggregation(self):
        return 'mean' if self.groups is not None else 'sum'

    def inputs(self):
        """Features mais a coluna edge_attr, quando existir"""
        if self.edge_attr is None:
            return self.features
        return np.column_stack([self.features, self.edge_attr.astype(float)])

    def input_names(self):
        return list(self.feature_names) + (['edge_attr'] if self.edge_attr is not None else [])


def pair_features(d, r):
    """(Δx, Δy, r, 1/r) para pares hex/square; r > 0"""
    d = np.atleast_2d(np.asarray(d, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    return np.column_stack([d[:, 0], d[:, 1], r, 1.0 / r])


class DatasetService:
    """Serviço de datasets e artefatos de dados"""

    @staticmethod
    def compute_priors(dx, dv, spec=BOIDS_PRIORS):
        """
        Vetor de 12 priors dos boids para um vizinho

        Ordem: Δx, Δy, Δvx, Δvy, |Δx|, |Δv|, 1/|Δx|, 1/|Δv|,
        Δx/|Δx|, Δy/|Δx|, Δvx/|Δv|, Δvy/|Δv|.
        Magnitude zero: canais inversos e normalizados valem 0 e a linha é marcada.

        Returns:
            tuple: (vetor de features, marcada)
        """
        features, flags = DatasetService.compute_priors_batch(
            np.asarray(dx, dtype=float).reshape(1, 2), np.asarray(dv, dtype=float).reshape(1, 2), spec
        )
        return features[0], bool(flags[0])

    @staticmethod
    def compute_priors_batch(dx, dv, spec=BOIDS_PRIORS):
        dx = np.asarray(dx, dtype=float)
        dv = np.asarray(dv, dtype=float)
        nx = np.hypot(dx[:, 0], dx[:, 1])
        nv = np.hypot(dv[:, 0], dv[:, 1])
        okx = nx > 0
        okv = nv > 0
        inx = np.divide(1.0, nx, out=np.zeros_like(nx), where=okx)
        inv = np.divide(1.0, nv, out=np.zeros_like(nv), where=okv)
        features = np.column_stack([
            dx[:, 0], dx[:, 1], dv[:, 0], dv[:, 1],
            nx, nv, inx, inv,
            dx[:, 0] * inx, dx[:, 1] * inx, dv[:, 0] * inv, dv[:, 1] * inv,
        ])
        if features.shape[1] != len(spec.names):
            raise DatasetError(f"PriorSpec com {len(spec.names)} nomes para {features.shape[1]} canais")
        return features, ~(okx & okv)

    @staticmethod
    def extract_pairs(log, sensing_range):
        """
        Amostras por par ordenado (i, j) dentro do alcance, quadro a quadro

        hex/square: alvo = força registrada sobre i devida a j.
        boids: uma linha por vizinho, agrupada pelo nó, com a aceleração do nó como alvo.
        Pares coincidentes são ignorados e contados.
        """
        if log.n_frames == 0:
            raise DatasetError(f"Trajetória vazia (execução {log.run_index})")
        n = log.n_agents
        boids = log.behavior == 'boids'
        chaves_registradas = (log.pair_frame * n + log.pair_i) * n + log.pair_j
        ordem = np.argsort(chaves_registradas, kind='stable')
        chaves_ordenadas = chaves_registradas[ordem]

        blocos_d, blocos_v, blocos_alvo, blocos_attr, blocos_grupo, alvos_no = [], [], [], [], [], []
        ignorados = 0
        marcados = 0
        proximo_grupo = 0
        fora_diagonal = ~np.eye(n, dtype=bool)

        for k in range(log.n_frames):
            p = log.positions[k]
            d = p[None, :, :] - p[:, None, :]
            d = d - np.floor(d + 0.5)
            r = np.hypot(d[..., 0], d[..., 1])
            no_alcance = fora_diagonal & (r <= sensing_range)
            coincidentes = no_alcance & (r == 0.0)
            ignorados += int(coincidentes.sum())

            if boids:
                for i in range(n):
                    vizinhos = np.nonzero(no_alcance[i])[0]
                    if vizinhos.size == 0:
                        continue
                    dx = d[i, vizinhos]
                    dv = log.velocities[k, vizinhos]
                    _, flags = DatasetService.compute_priors_batch(dx, dv)
                    if np.any(flags):
                        marcados += 1
                        continue
                    blocos_d.append(dx)
                    blocos_v.append(dv)
                    blocos_grupo.append(np.full(vizinhos.size, proximo_grupo))
                    alvos_no.append(log.accelerations[k, i])
                    proximo_grupo += 1
                continue

            ii, jj = np.nonzero(no_alcance & ~coincidentes)
            if ii.size == 0:
                continue
            chaves = (k * n + ii) * n + jj
            pos = np.searchsorted(chaves_ordenadas, chaves)
            pos = np.minimum(pos, max(chaves_ordenadas.size - 1, 0))
            if chaves_ordenadas.size == 0 or np.any(chaves_ordenadas[pos] != chaves):
                raise DatasetError(
                    f"Par sem força registrada no quadro {k} (execução {log.run_index}); "
                    f"sensing_range maior que o da simulação?"
                )
            registro = ordem[pos]
            blocos_d.append(d[ii, jj])
            blocos_alvo.append(log.pair_force[registro])
            blocos_attr.append(np.where(log.kin[ii] == log.kin[jj], 1, 2))

        if not blocos_d:
            raise DatasetError(f"Nenhum par dentro do alcance na execução {log.run_index}")

        if boids:
            features, _ = DatasetService.compute_priors_batch(np.concatenate(blocos_d), np.concatenate(blocos_v))
            return EdgeSampleSet(
                behavior='boids',
                features=features,
                feature_names=list(BOIDS_PRIORS_NAMES),
                groups=np.concatenate(blocos_grupo),
                node_targets=np.array(alvos_no),
                skipped=ignorados,
                flagged=marcados,
                source_runs=[log.run_index],
            )

        d = np.concatenate(blocos_d)
        r = np.hypot(d[:, 0], d[:, 1])
        return EdgeSampleSet(
            behavior=log.behavior,
            features=pair_features(d, r),
            feature_names=list(PAIR_FEATURES),
            targets=np.concatenate(blocos_alvo),
            edge_attr=np.concatenate(blocos_attr) if log.behavior == 'square' else None,
            skipped=ignorados,
            source_runs=[log.run_index],
        )

    @staticmethod
    def merge_samples(conjuntos):
        """Concatena amostras de várias execuções (grupos renumerados)"""
        if not conjuntos:
            raise DatasetError("Nenhuma amostra para juntar")
        primeiro = conjuntos[0]
        grupos = None
        if primeiro.groups is not None:
            deslocados, base = [], 0
            for conjunto in conjuntos:
                deslocados.append(conjunto.groups + base)
                base += conjunto.node_targets.shape[0]
            grupos = np.concatenate(deslocados)

        def _juntar(nome):
            valores = [getattr(c, nome) for c in conjuntos]
            return None if valores[0] is None else np.concatenate(valores)

        return EdgeSampleSet(
            behavior=primeiro.behavior,
            features=_juntar('features'),
            feature_names=list(primeiro.feature_names),
            targets=_juntar('targets'),
            edge_attr=_juntar('edge_attr'),
            groups=grupos,
            node_targets=_juntar('node_targets'),
            skipped=sum(c.skipped for c in conjuntos),
            flagged=sum(c.flagged for c in conjuntos),
            source_runs=[run for c in conjuntos for run in c.source_runs],
        )

    @staticmethod
    def fit_normalization(features, columns, behavior='', source_runs=None):
        features = np.asarray(features, dtype=float)
        return NormalizationRecord(
            list(columns), features.min(axis=0), features.max(axis=0), behavior, list(source_runs or [])
        )

    @staticmethod
    def normalize(features, record):
        """Mapa afim por coluna para [0, 1] no conjunto de ajuste"""
        features = np.asarray(features, dtype=float)
        if features.shape[-1] != len(record.columns):
            raise DatasetError(
                f"Registro de normalização cobre {len(record.columns)} colunas, dados têm {features.shape[-1]}"
            )
        return (features - record.mins) / (record.maxs - record.mins)

    @staticmethod
    def denormalize(features, record):
        features = np.asarray(features, dtype=float)
        if features.shape[-1] != len(record.columns):
            raise DatasetError(
                f"Registro de normalização cobre {len(record.columns)} colunas, dados têm {features.shape[-1]}"
            )
        return features * (record.maxs - record.mins) + record.mins

    @staticmethod
    def probe_pairs(behavior, n, rng, max_speed=0.5):
        """
        Pares de sonda: agente na origem, vizinho a distância uniforme em
        [0.07, 0.4] m e direção uniforme. square: metade kin (1), metade non-kin (2).
        boids: velocidade do vizinho com direção uniforme e módulo em [0.05, max_speed].
        """
        if n < 1:
            raise DatasetError("Quantidade de amostras deve ser >= 1")
        r = rng.uniform(R_RANGE[0], R_RANGE[1], size=n)
        theta = rng.uniform(0.0, 2.0 * math.pi, size=n)
        d = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        sonda = {'d': d, 'r': r}
        if behavior == 'square':
            attr = np.where(np.arange(n) < n // 2, 1, 2)
            sonda['edge_attr'] = rng.permutation(attr)
        if behavior == 'boids':
            fi = rng.uniform(0.0, 2.0 * math.pi, size=n)
            modulo = rng.uniform(0.05, max_speed, size=n)
            sonda['v'] = np.column_stack([modulo * np.cos(fi), modulo * np.sin(fi)])
        return sonda

    @staticmethod
    def build_regression_dataset(behavior, sonda, alvos, meta):
        """
        Dataset de regressão a partir das sondas e dos alvos

        hex/square: coluna única `r`, alvo escalar = força radial (positiva = repulsiva),
        grupo = edge_attr no square. boids: 12 priors, alvo vetorial (fx, fy).
        """
        if behavior == 'boids':
            features, _ = DatasetService.compute_priors_batch(sonda['d'], sonda['v'])
            return RegressionDataset(
                features, alvos, list(BOIDS_PRIORS_NAMES), ['fx', 'fy'],
                component_permutation=BOIDS_Y_PERMUTATION, meta=dict(meta, behavior=behavior),
            )
        return RegressionDataset(
            sonda['r'].reshape(-1, 1), alvos, ['r'], ['f'],
            groups=sonda.get('edge_attr'), meta=dict(meta, behavior=behavior),
        )

    @staticmethod
    def sample_ground_truth(behavior, n, rng, params=None):
        """Dataset de regressão tirado diretamente da lei de força do simulador"""
        params = params or BehaviorParams(behavior=behavior)
        sonda = DatasetService.probe_pairs(behavior, n, rng, params.max_speed)
        if behavior == 'boids':
            r = sonda['r'][:, None]
            alvos = params.C * sonda['d'] / r - params.S * sonda['d'] / r ** 2 + params.A * sonda['v']
        else:
            kin = sonda.get('edge_attr', np.ones(n, dtype=int)) == 1
            a_kin, b_kin = params.coefficients(True)
            a_non, b_non = params.coefficients(False)
            alvos = SimulacaoService.lj_force(sonda['r'], np.where(kin, a_kin, a_non), np.where(kin, b_kin, b_non))
        logger.info(f"📊 Dataset de referência '{behavior}' com {n} linhas")
        return DatasetService.build_regression_dataset(behavior, sonda, alvos, {'source': 'ground_truth'})

    # ------------------------------------------------------------------
    # Persistência
    # ------------------------------------------------------------------

    @staticmethod
    def save_dataset(data, path):
        """CSV com linha de schema versionada seguida do cabeçalho"""
        cabecalho = {
            'schema': SCHEMA_VERSION,
            'behavior': data.meta.get('behavior', ''),
            'source': data.meta.get('source', ''),
            'targets': '|'.join(data.target_names),
        }
        if data.groups is not None:
            cabecalho['group'] = 'edge_attr'
        if data.component_permutation is not None:
            cabecalho['permutation'] = ' '.join(str(k) for k in data.component_permutation)

        tabela = pd.DataFrame(data.features, columns=data.feature_names)
        alvos = data.target_matrix()
        for coluna, nome in enumerate(data.target_names):
            tabela[nome] = alvos[:, coluna]
        if data.groups is not None:
            tabela['edge_attr'] = np.asarray(data.groups, dtype=int)

        with open(path, 'w', newline='') as arquivo:
            arquivo.write('#' + ';'.join(f"{k}={v}" for k, v in cabecalho.items()) + '\n')
            tabela.to_csv(arquivo, **CSV_OPTIONS)
        logger.info(f"💾 Dataset salvo em {path} ({data.n_rows} linhas)")

    @staticmethod
    def load_dataset(path):
        if not os.path.exists(path):
            raise MissingArtifactError(path, 'sample-surrogate')
        with open(path) as arquivo:
            primeira = arquivo.readline().strip()
        if not primeira.startswith('#'):
            raise DatasetError("Linha de schema ausente", path, 1)
        try:
            cabecalho = dict(item.split('=', 1) for item in primeira[1:].split(';'))
        except ValueError:
            raise DatasetError("Linha de schema malformada", path, 1)
        if cabecalho.get('schema') != SCHEMA_VERSION:
            raise DatasetError(f"Schema não suportado: {cabecalho.get('schema')}", path, 1)

        tabela = pd.read_csv(path, skiprows=1, dtype=str)
        alvos = cabecalho.get('targets', '').split('|')
        faltando = [nome for nome in alvos if nome not in tabela.columns]
        if faltando:
            raise DatasetError(f"Coluna(s) de alvo ausente(s): {', '.join(faltando)}", path, 2)

        numeros = tabela.apply(pd.to_numeric, errors='coerce')
        linhas_ruins = numeros.isna().any(axis=1).to_numpy()
        if np.any(linhas_ruins):
            raise DatasetError("Valor não numérico ou ausente", path, int(np.argmax(linhas_ruins)) + 3)

        grupos = None
        if 'group' in cabecalho:
            grupos = numeros.pop(cabecalho['group']).to_numpy(dtype=int)
        permutacao = None
        if 'permutation' in cabecalho:
            permutacao = tuple(int(k) for k in cabecalho['permutation'].split())
        colunas = [c for c in numeros.columns if c not in alvos]
        meta = {k: cabecalho[k] for k in ('behavior', 'source') if k in cabecalho}
        return RegressionDataset(
            numeros[colunas].to_numpy(), numeros[alvos].to_numpy(), colunas, alvos,
            component_permutation=permutacao, groups=grupos, meta=meta,
        )

    @staticmethod
    def save_normalization(record, path):
        linhas = [
            f"behavior {record.behavior}",
            f"source_runs {' '.join(str(r) for r in record.source_runs)}".rstrip(),
            f"columns {' '.join(record.columns)}",
            f"min {' '.join(format(v, '.17g') for v in record.mins)}",
            f"max {' '.join(format(v, '.17g') for v in record.maxs)}",
        ]
        with open(path, 'w') as arquivo:
            arquivo.write('\n'.join(linhas) + '\n')

    @staticmethod
    def load_normalization(path):
        if not os.path.exists(path):
            raise MissingArtifactError(path, 'train-surrogate')
        campos = {}
        with open(path) as arquivo:
            for numero, linha in enumerate(arquivo, start=1):
                chave, _, valor = linha.strip().partition(' ')
                if chave not in ('behavior', 'source_runs', 'columns', 'min', 'max'):
                    raise DatasetError(f"Chave desconhecida '{chave}'", path, numero)
                campos[chave] = valor.split()
        try:
            return NormalizationRecord(
                campos['columns'],
                [float(v) for v in campos['min']],
                [float(v) for v in campos['max']],
                ' '.join(campos.get('behavior', [])),
                [int(v) for v in campos.get('source_runs', [])],
            )
        except (KeyError, ValueError) as e:
            raise DatasetError(f"Registro de normalização inválido: {e}", path)

    @staticmethod
    def save_trajectory(log, diretorio):
        """Um CSV de estados e um CSV de forças por par para a execução"""
        os.makedirs(diretorio, exist_ok=True)
        n, t = log.n_agents, log.n_frames
        estados = pd.DataFrame({
            't': np.repeat(log.times, n),
            'agent': np.tile(np.arange(n), t),
            'px': log.positions[..., 0].ravel(),
            'py': log.positions[..., 1].ravel(),
            'vx': log.velocities[..., 0].ravel(),
            'vy': log.velocities[..., 1].ravel(),
            'ax': log.accelerations[..., 0].ravel(),
            'ay': log.accelerations[..., 1].ravel(),
            'kin': np.tile(log.kin, t),
        })
        pares = pd.DataFrame({
            't': log.times[log.pair_frame],
            'i': log.pair_i,
            'j': log.pair_j,
            'fx': log.pair_force[:, 0],
            'fy': log.pair_force[:, 1],
            'r': log.pair_r,
            'kin_pair': log.pair_kin,
        })
        estados.to_csv(os.path.join(diretorio, f"run_{log.run_index:04d}.csv"), **CSV_OPTIONS)
        pares.to_csv(os.path.join(diretorio, f"pairs_{log.run_index:04d}.csv"), **CSV_OPTIONS)

    @staticmethod
    def load_trajectory(diretorio, run_index, behavior, seed=0):
        caminho = os.path.join(diretorio, f"run_{run_index:04d}.csv")
        caminho_pares = os.path.join(diretorio, f"pairs_{run_index:04d}.csv")
        for arquivo in (caminho, caminho_pares):
            if not os.path.exists(arquivo):
                raise MissingArtifactError(arquivo, 'simulate')

        estados = DatasetService._read_numeric(caminho, ['t', 'agent', 'px', 'py', 'vx', 'vy', 'ax', 'ay', 'kin'])
        pares = DatasetService._read_numeric(caminho_pares, ['t', 'i', 'j', 'fx', 'fy', 'r', 'kin_pair'])
        tempos = np.unique(estados['t'].to_numpy())
        n = int(estados['agent'].max()) + 1
        if len(estados) != tempos.size * n:
            raise DatasetError(f"Esperadas {tempos.size * n} linhas, encontradas {len(estados)}", caminho)

        estados = estados.sort_values(['t', 'agent'], kind='stable')

        def _bloco(a, b):
            return estados[[a, b]].to_numpy().reshape(tempos.size, n, 2)

        return TrajectoryLog(
            behavior=behavior,
            run_index=run_index,
            seed=seed,
            times=tempos,
            positions=_bloco('px', 'py'),
            velocities=_bloco('vx', 'vy'),
            accelerations=_bloco('ax', 'ay'),
            kin=estados['kin'].to_numpy(dtype=int)[:n],
            pair_frame=np.searchsorted(tempos, pares['t'].to_numpy()),
            pair_i=pares['i'].to_numpy(dtype=int),
            pair_j=pares['j'].to_numpy(dtype=int),
            pair_force=pares[['fx', 'fy']].to_numpy(),
            pair_r=pares['r'].to_numpy(),
            pair_kin=pares['kin_pair'].to_numpy(dtype=int),
        )

    @staticmethod
    def _read_numeric(path, colunas):
        tabela = pd.read_csv(path, dtype=str)
        faltando = [c for c in colunas if c not in tabela.columns]
        if faltando:
            raise DatasetError(f"Coluna(s) ausente(s): {', '.join(faltando)}", path, 1)
        numeros = tabela[colunas].apply(pd.to_numeric, errors='coerce')
        linhas_ruins = numeros.isna().any(axis=1).to_numpy()
        if np.any(linhas_ruins):
            raise DatasetError("Valor não numérico ou ausente", path, int(np.argmax(linhas_ruins)) + 2)
        return numeros
