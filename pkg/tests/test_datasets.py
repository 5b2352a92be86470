"""
Testes unitários para o DatasetService
"""
import unittest
import sys
import os
import math
import tempfile

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

# Adiciona o diretório raiz ao path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from App.errors import DatasetError, MissingArtifactError
from App.services.datasets import BOIDS_PRIORS_NAMES, BOIDS_Y_PERMUTATION, R_RANGE, DatasetService
from App.services.swarmsim import BehaviorParams, SimConfig, SimulacaoService, TrajectoryLog


def _log_manual(behavior, posicoes, velocidades, aceleracoes=None, kin=None, pares=None):
    """TrajectoryLog de um quadro montado à mão"""
    posicoes = np.asarray(posicoes, dtype=float)[None]
    velocidades = np.asarray(velocidades, dtype=float)[None]
    n = posicoes.shape[1]
    aceleracoes = np.zeros_like(posicoes) if aceleracoes is None else np.asarray(aceleracoes, dtype=float)[None]
    pares = pares or {'i': [], 'j': [], 'force': np.empty((0, 2)), 'r': []}
    return TrajectoryLog(
        behavior=behavior, run_index=0, seed=0, times=np.zeros(1),
        positions=posicoes, velocities=velocidades, accelerations=aceleracoes,
        kin=np.ones(n, dtype=int) if kin is None else np.asarray(kin),
        pair_frame=np.zeros(len(pares['i']), dtype=int),
        pair_i=np.asarray(pares['i'], dtype=int), pair_j=np.asarray(pares['j'], dtype=int),
        pair_force=np.asarray(pares['force'], dtype=float).reshape(-1, 2),
        pair_r=np.asarray(pares['r'], dtype=float), pair_kin=np.ones(len(pares['i']), dtype=int),
    )


class TestPriors(unittest.TestCase):
    """Os 12 priors dos boids"""

    def test_vetor_completo(self):
        features, marcada = DatasetService.compute_priors((1.0, 0.0), (0.0, 2.0))
        np.testing.assert_allclose(features, [1, 0, 0, 2, 1, 2, 1, 0.5, 1, 0, 0, 1])
        self.assertFalse(marcada)

    def test_velocidade_nula_marcada(self):
        features, marcada = DatasetService.compute_priors((3.0, 4.0), (0.0, 0.0))
        np.testing.assert_allclose(features, [3, 4, 0, 0, 5, 0, 0.2, 0, 0.6, 0.8, 0, 0])
        self.assertTrue(marcada)

    def test_permutacao_troca_x_e_y(self):
        features, _ = DatasetService.compute_priors((0.3, -0.1), (0.2, 0.5))
        trocado, _ = DatasetService.compute_priors((-0.1, 0.3), (0.5, 0.2))
        np.testing.assert_allclose(features[list(BOIDS_Y_PERMUTATION)], trocado)
        self.assertEqual(len(BOIDS_PRIORS_NAMES), 12)


class TestNormalizacao(unittest.TestCase):
    """Registro min-max"""

    def test_mapeia_para_unidade(self):
        registro = DatasetService.fit_normalization(np.array([[0.0], [5.0], [10.0]]), ['r'])
        np.testing.assert_allclose(DatasetService.normalize([[0.0], [5.0], [10.0]], registro)[:, 0], [0.0, 0.5, 1.0])
        np.testing.assert_allclose(DatasetService.denormalize([[0.5]], registro), [[5.0]])

    def test_coluna_constante(self):
        with self.assertRaises(DatasetError):
            DatasetService.fit_normalization(np.array([[1.0, 0.0], [1.0, 2.0]]), ['a', 'b'])

    def test_colunas_incompativeis(self):
        registro = DatasetService.fit_normalization(np.array([[0.0], [1.0]]), ['r'])
        with self.assertRaises(DatasetError):
            DatasetService.normalize(np.zeros((2, 2)), registro)

    def test_arquivo(self):
        registro = DatasetService.fit_normalization(np.array([[0.0, 1.0], [2.0, 3.0]]), ['dx', 'dy'], 'hex', [0, 1])
        with tempfile.TemporaryDirectory() as pasta:
            caminho = os.path.join(pasta, 'normalization.txt')
            DatasetService.save_normalization(registro, caminho)
            lido = DatasetService.load_normalization(caminho)
        self.assertEqual(lido.columns, ['dx', 'dy'])
        self.assertEqual(lido.behavior, 'hex')
        self.assertEqual(lido.source_runs, [0, 1])
        np.testing.assert_array_equal(lido.maxs, registro.maxs)


class TestExtracao(unittest.TestCase):
    """Amostras de aresta a partir das trajetórias"""

    def test_dois_agentes_dois_pares_por_quadro(self):
        params = BehaviorParams(behavior='hex', sensing_range=1.0)
        cfg = SimConfig.for_behavior('hex', runs=1, agent_count=2, duration_s=1.0, params=params)
        log = SimulacaoService.simulate_run(cfg, 0)
        amostras = DatasetService.extract_pairs(log, params.sensing_range)
        self.assertEqual(len(amostras), 2 * log.n_frames)
        self.assertEqual(amostras.feature_names, ['dx', 'dy', 'r', 'inv_r'])
        self.assertIsNone(amostras.edge_attr)

        d = amostras.features[:, :2]
        r = amostras.features[:, 2]
        esperado = SimulacaoService.lj_force(r, params.a, params.b)[:, None] * (-d / r[:, None])
        np.testing.assert_allclose(amostras.targets, esperado, rtol=1e-9, atol=1e-12)

    def test_square_marca_edge_attr(self):
        params = BehaviorParams(behavior='square', sensing_range=1.0)
        cfg = SimConfig.for_behavior('square', runs=1, agent_count=4, duration_s=0.5, params=params)
        amostras = DatasetService.extract_pairs(SimulacaoService.simulate_run(cfg, 0), 1.0)
        self.assertEqual(set(np.unique(amostras.edge_attr)), {1, 2})
        self.assertEqual(amostras.inputs().shape[1], 5)
        self.assertEqual(amostras.input_names()[-1], 'edge_attr')

    def test_par_sem_forca_registrada(self):
        log = _log_manual('hex', [[0.2, 0.2], [0.5, 0.2]], np.zeros((2, 2)))
        with self.assertRaises(DatasetError):
            DatasetService.extract_pairs(log, 0.5)

    def test_nenhum_par_no_alcance(self):
        log = _log_manual('hex', [[0.1, 0.1], [0.5, 0.5]], np.zeros((2, 2)))
        with self.assertRaises(DatasetError):
            DatasetService.extract_pairs(log, 0.1)

    def test_boids_agrupa_por_no(self):
        aceleracoes = [[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]
        log = _log_manual(
            'boids', [[0.4, 0.4], [0.5, 0.4], [0.45, 0.5]],
            [[0.1, 0.0], [0.0, 0.2], [0.1, 0.1]], aceleracoes,
        )
        amostras = DatasetService.extract_pairs(log, 0.5)
        self.assertEqual(len(amostras), 6)
        self.assertEqual(amostras.aggregation, 'mean')
        np.testing.assert_array_equal(amostras.groups, [0, 0, 1, 1, 2, 2])
        np.testing.assert_array_equal(amostras.node_targets, aceleracoes)
        # dv é a velocidade do vizinho no referencial do mundo
        np.testing.assert_allclose(amostras.features[0, 2:4], [0.0, 0.2])

    def test_boids_no_marcado_e_ignorado(self):
        log = _log_manual('boids', [[0.4, 0.4], [0.5, 0.4]], [[0.1, 0.0], [0.0, 0.0]])
        amostras = DatasetService.extract_pairs(log, 0.5)
        self.assertEqual(amostras.flagged, 1)
        self.assertEqual(len(amostras), 1)
        self.assertEqual(amostras.node_targets.shape, (1, 2))

    def test_juntar_renumera_grupos(self):
        log = _log_manual(
            'boids', [[0.4, 0.4], [0.5, 0.4]], [[0.1, 0.0], [0.0, 0.1]],
        )
        amostras = DatasetService.extract_pairs(log, 0.5)
        juntas = DatasetService.merge_samples([amostras, amostras])
        np.testing.assert_array_equal(juntas.groups, [0, 1, 2, 3])
        self.assertEqual(juntas.node_targets.shape, (4, 2))

    def test_trajetoria_em_disco(self):
        params = BehaviorParams(behavior='square', sensing_range=1.0)
        cfg = SimConfig.for_behavior('square', runs=1, agent_count=4, duration_s=0.5, params=params, rng_seed=2)
        log = SimulacaoService.simulate_run(cfg, 0)
        with tempfile.TemporaryDirectory() as pasta:
            DatasetService.save_trajectory(log, pasta)
            self.assertTrue(os.path.exists(os.path.join(pasta, 'run_0000.csv')))
            self.assertTrue(os.path.exists(os.path.join(pasta, 'pairs_0000.csv')))
            lido = DatasetService.load_trajectory(pasta, 0, 'square', 2)
        np.testing.assert_array_equal(lido.positions, log.positions)
        np.testing.assert_array_equal(lido.kin, log.kin)
        direto = DatasetService.extract_pairs(log, 1.0)
        relido = DatasetService.extract_pairs(lido, 1.0)
        np.testing.assert_array_equal(direto.targets, relido.targets)

    def test_trajetoria_ausente(self):
        with tempfile.TemporaryDirectory() as pasta:
            with self.assertRaises(MissingArtifactError):
                DatasetService.load_trajectory(pasta, 3, 'hex')


class TestSondas(unittest.TestCase):
    """Pares de sonda e datasets de regressão"""

    def test_hex_4500_linhas(self):
        sonda = DatasetService.probe_pairs('hex', 4500, np.random.default_rng(0))
        self.assertEqual(sonda['r'].shape, (4500,))
        self.assertTrue(np.all((sonda['r'] >= R_RANGE[0]) & (sonda['r'] <= R_RANGE[1])))
        np.testing.assert_allclose(np.linalg.norm(sonda['d'], axis=1), sonda['r'])

    def test_square_metades_balanceadas(self):
        sonda = DatasetService.probe_pairs('square', 10000, np.random.default_rng(0))
        self.assertEqual(int(np.sum(sonda['edge_attr'] == 1)), 5000)
        self.assertEqual(int(np.sum(sonda['edge_attr'] == 2)), 5000)

    def test_mesma_semente(self):
        a = DatasetService.probe_pairs('boids', 50, np.random.default_rng(7))
        b = DatasetService.probe_pairs('boids', 50, np.random.default_rng(7))
        np.testing.assert_array_equal(a['d'], b['d'])
        np.testing.assert_array_equal(a['v'], b['v'])

    def test_lei_exata_hex(self):
        data = DatasetService.sample_ground_truth('hex', 200, np.random.default_rng(1))
        self.assertEqual(data.feature_names, ['r'])
        r = data.features[:, 0]
        np.testing.assert_allclose(data.targets, 1.2e-10 / r ** 12 - 2.2e-5 / r ** 6)

    def test_lei_exata_boids_vetorial(self):
        data = DatasetService.sample_ground_truth('boids', 100, np.random.default_rng(1))
        self.assertEqual(data.n_components, 2)
        self.assertEqual(data.feature_names, list(BOIDS_PRIORS_NAMES))
        self.assertEqual(data.component_permutation, BOIDS_Y_PERMUTATION)


class TestArquivoDeDataset(unittest.TestCase):
    """CSV com linha de schema"""

    def setUp(self):
        self.pasta = tempfile.TemporaryDirectory()
        self.caminho = os.path.join(self.pasta.name, 'dataset.csv')

    def tearDown(self):
        self.pasta.cleanup()

    def test_boids_preserva_alvos_e_permutacao(self):
        data = DatasetService.sample_ground_truth('boids', 30, np.random.default_rng(3))
        DatasetService.save_dataset(data, self.caminho)
        with open(self.caminho) as arquivo:
            self.assertTrue(arquivo.readline().startswith('#schema=swarm-symreg/v1;behavior=boids'))
        lido = DatasetService.load_dataset(self.caminho)
        self.assertEqual(lido.target_names, ['fx', 'fy'])
        self.assertEqual(lido.component_permutation, BOIDS_Y_PERMUTATION)
        np.testing.assert_array_equal(lido.features, data.features)
        np.testing.assert_array_equal(lido.targets, data.targets)

    def test_square_preserva_grupos(self):
        data = DatasetService.sample_ground_truth('square', 20, np.random.default_rng(3))
        DatasetService.save_dataset(data, self.caminho)
        lido = DatasetService.load_dataset(self.caminho)
        np.testing.assert_array_equal(lido.groups, data.groups)
        self.assertEqual(lido.select_group(1).n_rows, 10)

    def test_celula_invalida_informa_linha(self):
        data = DatasetService.sample_ground_truth('hex', 5, np.random.default_rng(3))
        DatasetService.save_dataset(data, self.caminho)
        with open(self.caminho) as arquivo:
            linhas = arquivo.readlines()
        linhas[3] = 'abc,' + linhas[3].split(',', 1)[1]
        with open(self.caminho, 'w') as arquivo:
            arquivo.writelines(linhas)
        with self.assertRaises(DatasetError) as contexto:
            DatasetService.load_dataset(self.caminho)
        self.assertEqual(contexto.exception.line, 4)

    def test_schema_ausente(self):
        with open(self.caminho, 'w') as arquivo:
            arquivo.write('r,f\n0.1,1.0\n')
        with self.assertRaises(DatasetError):
            DatasetService.load_dataset(self.caminho)

    def test_arquivo_ausente(self):
        with self.assertRaises(MissingArtifactError):
            DatasetService.load_dataset(os.path.join(self.pasta.name, 'nada.csv'))


def _contagem_bruta(posicoes, alcance):
    """Pares ordenados (i, j), i != j, com distância mínima no toro em (0, alcance]"""
    total = 0
    for quadro in posicoes:
        for i, pi in enumerate(quadro):
            for j, pj in enumerate(quadro):
                if i == j:
                    continue
                r = min(
                    math.hypot(pj[0] - pi[0] + ox, pj[1] - pi[1] + oy)
                    for ox in (-1.0, 0.0, 1.0) for oy in (-1.0, 0.0, 1.0)
                )
                if 0.0 < r <= alcance:
                    total += 1
    return total


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2 ** 32 - 1),
    n_agentes=st.integers(min_value=2, max_value=7),
    n_quadros=st.integers(min_value=1, max_value=4),
    alcance=st.floats(min_value=0.05, max_value=0.7),
)
def test_extracao_confere_com_contagem_bruta(seed, n_agentes, n_quadros, alcance):
    """Quantidade de amostras = pares ordenados dentro do alcance, somados quadro a quadro"""
    rng = np.random.default_rng(seed)
    posicoes = rng.uniform(0.0, 1.0, size=(n_quadros, n_agentes, 2))
    quadros, ii, jj = np.nonzero(~np.eye(n_agentes, dtype=bool)[None].repeat(n_quadros, axis=0))
    log = TrajectoryLog(
        behavior='hex', run_index=0, seed=seed, times=np.arange(n_quadros, dtype=float),
        positions=posicoes, velocities=np.zeros_like(posicoes), accelerations=np.zeros_like(posicoes),
        kin=np.ones(n_agentes, dtype=int),
        pair_frame=quadros, pair_i=ii, pair_j=jj,
        pair_force=rng.normal(size=(quadros.size, 2)),
        pair_r=np.zeros(quadros.size), pair_kin=np.ones(quadros.size, dtype=int),
    )
    esperado = _contagem_bruta(posicoes, alcance)
    if esperado == 0:
        with pytest.raises(DatasetError):
            DatasetService.extract_pairs(log, alcance)
        return

    amostras = DatasetService.extract_pairs(log, alcance)
    assert len(amostras) == esperado
    assert amostras.skipped == 0
    assert np.all(amostras.features[:, 2] <= alcance)
