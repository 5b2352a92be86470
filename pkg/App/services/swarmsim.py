"""
Simulador 2D de enxames em um toro unitário

Casos de estudo:
- hex: formação hexagonal com força de Lennard-Jones a/r^12 - b/r^6
- square: formação quadrada; pares kin (mesmo rótulo) e non-kin usam coeficientes diferentes
- boids: coesão, separação e alinhamento (média sobre os vizinhos)

Dinâmica de integrador duplo (massa 1 kg), Euler semi-implícito, sensoriamento sem ruído.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed

from ..errors import ConfigError

logger = logging.getLogger(__name__)

BEHAVIORS = ('hex', 'square', 'boids')


@dataclass(frozen=True)
class BehaviorParams:
    """
    Parâmetros do comportamento

    `a`, `b` valem para hex e para pares non-kin do square; `a_kin`, `b_kin`
    para pares kin do square. A força é aplicada diretamente como a/r^12 - b/r^6.
    """

    behavior: str = 'hex'
    a: float = 1.2e-10
    b: float = 2.2e-5
    a_kin: float = 7.84e-9
    b_kin: float = 1.7e-4
    delta: float = 0.13
    C: float = 2.0
    S: float = 75.0
    A: float = 3.0
    sensing_range: float = 0.5
    damping: float = 0.9          # fator por passo; só para formação de padrões
    use_damping: bool = True
    max_speed: float = 0.5
    min_separation: float = 0.05

    def __post_init__(self):
        if self.behavior not in BEHAVIORS:
            raise ConfigError(f"Comportamento desconhecido: {self.behavior}. Use um de {BEHAVIORS}")
        if self.sensing_range <= 0 or self.max_speed <= 0 or self.delta <= 0:
            raise ConfigError("sensing_range, max_speed e delta devem ser positivos")
        if not 0.0 < self.damping <= 1.0:
            raise ConfigError("damping deve estar em (0, 1]")
        if self.min_separation < 0:
            raise ConfigError("min_separation deve ser >= 0")

    @staticmethod
    def from_delta_epsilon(delta, epsilon):
        """Converte (δ, ε) do potencial LJ em (a, b): a = 4εδ^12, b = 4εδ^6"""
        return 4.0 * epsilon * delta ** 12, 4.0 * epsilon * delta ** 6

    def coefficients(self, kin_pair):
        if self.behavior == 'square' and kin_pair:
            return self.a_kin, self.b_kin
        return self.a, self.b

    @property
    def damping_active(self):
        return self.use_damping and self.behavior != 'boids'


@dataclass(frozen=True)
class SimConfig:
    agent_count: int = 20
    duration_s: float = 25.0
    integration_dt_s: float = 0.005
    record_hz: float = 10.0
    runs: int = 250
    rng_seed: int = 0
    params: BehaviorParams = field(default_factory=BehaviorParams)

    def __post_init__(self):
        if self.agent_count < 1 or self.runs < 1:
            raise ConfigError("agent_count e runs devem ser >= 1")
        if self.duration_s <= 0 or self.integration_dt_s <= 0 or self.record_hz <= 0:
            raise ConfigError("duration_s, integration_dt_s e record_hz devem ser positivos")
        razao = (1.0 / self.record_hz) / self.integration_dt_s
        if abs(razao - round(razao)) > 1e-6 or round(razao) < 1:
            raise ConfigError(
                f"O período de gravação (1/{self.record_hz} s) deve ser múltiplo inteiro de integration_dt ({self.integration_dt_s} s)"
            )

    @property
    def substeps(self):
        return int(round((1.0 / self.record_hz) / self.integration_dt_s))

    @property
    def frames(self):
        return int(round(self.duration_s * self.record_hz))

    @classmethod
    def for_behavior(cls, behavior, **overrides):
        """Valores padrão de cada caso de estudo, sobrescritos por `overrides`"""
        params = overrides.pop('params', None) or BehaviorParams(behavior=behavior)
        if behavior == 'boids':
            base = dict(agent_count=50, integration_dt_s=1.0 / 300.0, record_hz=30.0)
        else:
            base = dict(agent_count=20, integration_dt_s=0.005, record_hz=10.0)
        base.update(overrides)
        return cls(params=params, **base)


@dataclass
class AgentState:
    position: np.ndarray
    velocity: np.ndarray
    kin_label: int = 1
    mass: float = 1.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)


@dataclass
class WorldState:
    positions: np.ndarray     # N x 2 em [0, 1)
    velocities: np.ndarray    # N x 2
    kin: np.ndarray           # N, rótulos 1/2
    t: float = 0.0
    degenerate_pairs: int = 0

    def agent(self, i):
        return AgentState(self.positions[i].copy(), self.velocities[i].copy(), int(self.kin[i]))


@dataclass
class TrajectoryLog:
    behavior: str
    run_index: int
    seed: int
    times: np.ndarray           # T
    positions: np.ndarray       # T x N x 2
    velocities: np.ndarray      # T x N x 2
    accelerations: np.ndarray   # T x N x 2
    kin: np.ndarray             # N
    pair_frame: np.ndarray      # M (índice do quadro)
    pair_i: np.ndarray
    pair_j: np.ndarray
    pair_force: np.ndarray      # M x 2
    pair_r: np.ndarray
    pair_kin: np.ndarray        # 1 = kin, 2 = non-kin
    degenerate_pairs: int = 0

    @property
    def n_frames(self):
        return self.times.shape[0]

    @property
    def n_agents(self):
        return self.kin.shape[0]


def _wrap(p):
    p = p - np.floor(p)
    p[p >= 1.0] = 0.0
    return p


class SimulacaoService:
    """Serviço de simulação de enxames"""

    @staticmethod
    def torus_displacement(origem, destino):
        """Deslocamento de imagem mínima; cada componente em [-0.5, 0.5)"""
        d = np.asarray(destino, dtype=float) - np.asarray(origem, dtype=float)
        return d - np.floor(d + 0.5)

    @staticmethod
    def lj_force(r, a, b):
        """
        Força escalar a/r^12 - b/r^6 (positiva = repulsiva ao longo do eixo do par)

        Raises:
            ValueError: se r <= 0
        """
        r_arr = np.asarray(r, dtype=float)
        if np.any(r_arr <= 0):
            raise ValueError("lj_force exige r > 0")
        forca = a / r_arr ** 12 - b / r_arr ** 6
        return float(forca) if np.ndim(forca) == 0 else forca

    @staticmethod
    def lj_root(a, b):
        """Distância de equilíbrio (a/b)^(1/6)"""
        return (a / b) ** (1.0 / 6.0)

    @staticmethod
    def pair_force_vector(i, j, params):
        """
        Força sobre o agente i devida ao agente j

        hex/square: magnitude lj_force ao longo do eixo i<-j. boids: termo do
        vizinho j (sem a média) C·x/|x| - S·x/|x|² + A·v_j. Pares fora do alcance
        ou coincidentes contribuem zero.
        """
        d = SimulacaoService.torus_displacement(i.position, j.position)
        r = float(np.hypot(d[0], d[1]))
        if r == 0.0 or r > params.sensing_range:
            return np.zeros(2)
        if params.behavior == 'boids':
            return params.C * d / r - params.S * d / r ** 2 + params.A * np.asarray(j.velocity, dtype=float)
        a, b = params.coefficients(i.kin_label == j.kin_label)
        return SimulacaoService.lj_force(r, a, b) * (-d / r)

    @staticmethod
    def boids_accel(agente, vizinhos, params):
        """
        Média dos termos de coesão, separação e alinhamento sobre os vizinhos

        Returns:
            tuple: (aceleração 2D, número de vizinhos coincidentes ignorados)
        """
        soma = np.zeros(2)
        contados = 0
        degenerados = 0
        for vizinho in vizinhos:
            d = SimulacaoService.torus_displacement(agente.position, vizinho.position)
            r = float(np.hypot(d[0], d[1]))
            if r > params.sensing_range:
                continue
            contados += 1
            if r == 0.0:
                degenerados += 1
                continue
            soma += params.C * d / r - params.S * d / r ** 2 + params.A * np.asarray(vizinho.velocity, dtype=float)
        if contados == 0:
            return np.zeros(2), degenerados
        return soma / contados, degenerados

    @staticmethod
    def interactions(world, params):
        """
        Acelerações de todos os agentes e registros por par (i, j) dentro do alcance

        Returns:
            tuple: (aceleração N x 2, dict de arrays dos pares, pares coincidentes)
        """
        p = world.positions
        n = p.shape[0]
        d = p[None, :, :] - p[:, None, :]
        d = d - np.floor(d + 0.5)                     # d[i, j] = deslocamento de i para j
        r = np.hypot(d[..., 0], d[..., 1])
        fora_diagonal = ~np.eye(n, dtype=bool)
        coincidentes = fora_diagonal & (r == 0.0)
        vizinhos = fora_diagonal & (r <= params.sensing_range)
        ativos = vizinhos & ~coincidentes
        mesmo_kin = world.kin[:, None] == world.kin[None, :]

        r_seguro = np.where(ativos, r, 1.0)
        unitario = d / r_seguro[..., None]
        if params.behavior == 'boids':
            termos = (
                params.C * unitario
                - params.S * d / (r_seguro ** 2)[..., None]
                + params.A * world.velocities[None, :, :]
            )
            termos = np.where(ativos[..., None], termos, 0.0)
            contagem = vizinhos.sum(axis=1)
            accel = termos.sum(axis=1) / np.maximum(contagem, 1)[:, None]
        else:
            a_par, b_par = params.coefficients(False)
            a_kin, b_kin = params.coefficients(True)
            a_mat = np.where(mesmo_kin, a_kin, a_par)
            b_mat = np.where(mesmo_kin, b_kin, b_par)
            magnitude = a_mat / r_seguro ** 12 - b_mat / r_seguro ** 6
            termos = np.where(ativos[..., None], magnitude[..., None] * (-unitario), 0.0)
            accel = termos.sum(axis=1)

        ii, jj = np.nonzero(ativos)
        pares = {
            'i': ii,
            'j': jj,
            'force': termos[ii, jj],
            'r': r[ii, jj],
            'kin_pair': np.where(mesmo_kin[ii, jj], 1, 2),
        }
        return accel, pares, int(coincidentes.sum())

    @staticmethod
    def step(world, params, dt, accel=None):
        """
        Um passo de Euler semi-implícito: v <- v + a·dt; p <- wrap(p + v·dt)

        Amortecimento (formação de padrões) e limite de velocidade conforme `params`.
        """
        if dt <= 0:
            raise ValueError("dt deve ser positivo")
        degenerados = 0
        if accel is None:
            accel, _, degenerados = SimulacaoService.interactions(world, params)
        v = world.velocities + accel * dt
        if params.damping_active:
            v = v * params.damping
        velocidade = np.hypot(v[:, 0], v[:, 1])
        excesso = velocidade > params.max_speed
        if np.any(excesso):
            v[excesso] *= (params.max_speed / velocidade[excesso])[:, None]
        p = _wrap(world.positions + v * dt)
        return WorldState(p, v, world.kin, world.t + dt, world.degenerate_pairs + degenerados)

    @staticmethod
    def initial_world(cfg, rng):
        """Posições uniformes com separação mínima; velocidades nulas ou unitárias (boids)"""
        params = cfg.params
        n = cfg.agent_count
        posicoes = np.empty((n, 2))
        for k in range(n):
            for _ in range(10000):
                candidato = rng.random(2)
                if k == 0:
                    break
                d = SimulacaoService.torus_displacement(candidato, posicoes[:k])
                if np.min(np.hypot(d[:, 0], d[:, 1])) >= params.min_separation:
                    break
            else:
                raise ConfigError(
                    f"Não foi possível posicionar {n} agentes com separação mínima {params.min_separation} m"
                )
            posicoes[k] = candidato

        if params.behavior == 'boids':
            angulos = rng.uniform(0.0, 2.0 * math.pi, size=n)
            velocidades = np.column_stack([np.cos(angulos), np.sin(angulos)])
        else:
            velocidades = np.zeros((n, 2))
        if params.behavior == 'square':
            kin = np.arange(n) % 2 + 1
        else:
            kin = np.ones(n, dtype=int)
        return WorldState(_wrap(posicoes), velocidades, kin)

    @staticmethod
    def simulate_run(cfg, run_index):
        """Executa uma simulação com semente derivada de (rng_seed, run_index)"""
        rng = np.random.default_rng([cfg.rng_seed, run_index])
        world = SimulacaoService.initial_world(cfg, rng)
        params = cfg.params
        n_frames = cfg.frames
        n = cfg.agent_count

        tempos = np.empty(n_frames)
        posicoes = np.empty((n_frames, n, 2))
        velocidades = np.empty((n_frames, n, 2))
        aceleracoes = np.empty((n_frames, n, 2))
        pares = {'frame': [], 'i': [], 'j': [], 'force': [], 'r': [], 'kin_pair': []}
        degenerados = 0

        for k in range(n_frames):
            accel, registro, coincidentes = SimulacaoService.interactions(world, params)
            degenerados += coincidentes
            tempos[k] = k / cfg.record_hz
            posicoes[k] = world.positions
            velocidades[k] = world.velocities
            aceleracoes[k] = accel
            pares['frame'].append(np.full(registro['i'].shape[0], k))
            for chave in ('i', 'j', 'force', 'r', 'kin_pair'):
                pares[chave].append(registro[chave])

            world = SimulacaoService.step(world, params, cfg.integration_dt_s, accel=accel)
            for _ in range(cfg.substeps - 1):
                world = SimulacaoService.step(world, params, cfg.integration_dt_s)
            degenerados += world.degenerate_pairs
            world = replace(world, degenerate_pairs=0)

        if degenerados:
            logger.warning(f"⚠️ Execução {run_index}: {degenerados} pares coincidentes ignorados")
        return TrajectoryLog(
            behavior=params.behavior,
            run_index=run_index,
            seed=cfg.rng_seed,
            times=tempos,
            positions=posicoes,
            velocities=velocidades,
            accelerations=aceleracoes,
            kin=world.kin.copy(),
            pair_frame=np.concatenate(pares['frame']).astype(int),
            pair_i=np.concatenate(pares['i']).astype(int),
            pair_j=np.concatenate(pares['j']).astype(int),
            pair_force=np.concatenate(pares['force']).reshape(-1, 2),
            pair_r=np.concatenate(pares['r']),
            pair_kin=np.concatenate(pares['kin_pair']).astype(int),
            degenerate_pairs=degenerados,
        )

    @staticmethod
    def simulate(cfg, jobs=1):
        """
        Executa `cfg.runs` simulações independentes

        Returns:
            list: Um TrajectoryLog por execução, na ordem dos índices
        """
        logger.info(
            f"🔄 Simulando {cfg.runs} execução(ões) de '{cfg.params.behavior}' com {cfg.agent_count} agentes, "
            f"{cfg.duration_s} s a {cfg.record_hz} Hz"
        )
        logs = Parallel(n_jobs=jobs)(
            delayed(SimulacaoService.simulate_run)(cfg, indice) for indice in range(cfg.runs)
        )
        logger.info(f"✅ Simulação concluída: {sum(log.n_frames for log in logs)} quadros gravados")
        return logs

    @staticmethod
    def polarization(velocities):
        """‖Σ v̂_i‖ / N (agentes parados contribuem zero)"""
        v = np.asarray(velocities, dtype=float)
        norma = np.hypot(v[:, 0], v[:, 1])
        unitarios = np.where(norma[:, None] > 0, v / np.where(norma > 0, norma, 1.0)[:, None], 0.0)
        return float(np.hypot(*unitarios.sum(axis=0)) / v.shape[0])

    @staticmethod
    def nearest_neighbor_distances(positions, kin=None, relation=None):
        """
        Distância ao vizinho mais próximo de cada agente no toro

        Args:
            relation: None (todos), 'kin' (mesmo rótulo) ou 'nonkin'
        """
        p = np.asarray(positions, dtype=float)
        d = p[None, :, :] - p[:, None, :]
        d = d - np.floor(d + 0.5)
        r = np.hypot(d[..., 0], d[..., 1])
        np.fill_diagonal(r, np.inf)
        if relation is not None:
            mesmo = np.asarray(kin)[:, None] == np.asarray(kin)[None, :]
            r = np.where(mesmo if relation == 'kin' else ~mesmo, r, np.inf)
        return r.min(axis=1)
