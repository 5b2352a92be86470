"""
Testes unitários para o SurrogateService (rede de aresta)
"""
import unittest
import sys
import os
import tempfile

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

# Adiciona o diretório raiz ao path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from App.errors import ConfigError, DatasetError, MissingArtifactError
from App.services.datasets import PAIR_FEATURES, DatasetService, EdgeSampleSet
from App.services.surrogate import AdamState, Mlp, SurrogateService, TrainConfig


def _rede_eixo():
    """Camada linear cuja saída é -d: força repulsiva de módulo r ao longo do eixo do par"""
    w = np.zeros((4, 2))
    w[0, 0] = -1.0
    w[1, 1] = -1.0
    return Mlp([w], [np.zeros(2)], behavior='hex')


class TestForward(unittest.TestCase):
    """Propagação direta"""

    def test_camada_afim(self):
        net = Mlp([np.array([[2.0]])], [np.array([1.0])])
        np.testing.assert_allclose(SurrogateService.forward(net, [3.0]), [7.0])

    def test_pesos_nulos(self):
        net = Mlp.init([3, 5, 2], np.random.default_rng(0))
        for w, b in zip(net.weights, net.biases):
            w[:] = 0.0
            b[:] = 0.0
        np.testing.assert_array_equal(SurrogateService.forward(net, [1.0, -2.0, 3.0]), [0.0, 0.0])

    def test_forma_da_saida(self):
        net = Mlp.init([4, 300, 300, 2], np.random.default_rng(0))
        self.assertEqual(net.sizes, [4, 300, 300, 2])
        self.assertEqual(SurrogateService.forward(net, np.ones((7, 4))).shape, (7, 2))

    def test_entrada_com_tamanho_errado(self):
        net = Mlp.init([4, 3, 2], np.random.default_rng(0))
        with self.assertRaises(ValueError):
            SurrogateService.forward(net, np.ones(3))

    def test_camadas_que_nao_encadeiam(self):
        with self.assertRaises(ConfigError):
            Mlp([np.zeros((2, 3)), np.zeros((4, 1))], [np.zeros(3), np.zeros(1)])


class TestBackward(unittest.TestCase):
    """Gradientes exatos"""

    def test_diferencas_finitas(self):
        rng = np.random.default_rng(1)
        for ativacao in ('tanh', 'relu'):
            net = Mlp.init([3, 6, 2], rng, ativacao)
            for b in net.biases:
                b[:] = rng.normal(size=b.shape) * 0.1
            x = rng.normal(size=(5, 3))
            t = rng.normal(size=(5, 2))
            _, grads = SurrogateService.backward(net, x, t)
            h = 1e-6
            for p, g in zip(net.parameters(), grads):
                for indice in [(0,) * p.ndim, tuple(s - 1 for s in p.shape)]:
                    original = p[indice]
                    p[indice] = original + h
                    mais, _ = SurrogateService.backward(net, x, t)
                    p[indice] = original - h
                    menos, _ = SurrogateService.backward(net, x, t)
                    p[indice] = original
                    self.assertAlmostEqual(g[indice], (mais - menos) / (2 * h), delta=1e-5 + 1e-4 * abs(g[indice]))

    def test_erro_nulo_gradiente_nulo(self):
        net = Mlp.init([2, 4, 2], np.random.default_rng(2))
        x = np.array([[0.3, -0.7]])
        perda, grads = SurrogateService.backward(net, x, SurrogateService.forward(net, x))
        self.assertEqual(perda, 0.0)
        for g in grads:
            np.testing.assert_array_equal(g, np.zeros_like(g))


class TestAdam(unittest.TestCase):
    """Passo do Adam"""

    def test_primeiro_passo_segue_o_sinal(self):
        params = [np.array([1.0, -2.0])]
        estado = AdamState.for_params(params, lr=1e-3)
        SurrogateService.adam_step(params, [np.array([0.5, -3.0])], estado)
        np.testing.assert_allclose(params[0], [1.0 - 1e-3, -2.0 + 1e-3], rtol=1e-6)
        self.assertEqual(estado.t, 1)

    def test_gradiente_nulo(self):
        params = [np.array([1.0, -2.0])]
        estado = AdamState.for_params(params)
        SurrogateService.adam_step(params, [np.zeros(2)], estado)
        np.testing.assert_array_equal(params[0], [1.0, -2.0])
        self.assertEqual(estado.t, 1)

    def test_dois_passos_monotonos(self):
        params = [np.array([0.0])]
        estado = AdamState.for_params(params, lr=0.1)
        posicoes = []
        for _ in range(2):
            SurrogateService.adam_step(params, [np.array([2.0])], estado)
            posicoes.append(float(params[0][0]))
        self.assertLess(posicoes[0], 0.0)
        self.assertLess(posicoes[1], posicoes[0])

    def test_listas_desalinhadas(self):
        estado = AdamState.for_params([np.zeros(1)])
        with self.assertRaises(ValueError):
            SurrogateService.adam_step([np.zeros(1), np.zeros(1)], [np.zeros(1)], estado)


class TestAgregacao(unittest.TestCase):

    def test_soma(self):
        np.testing.assert_array_equal(SurrogateService.aggregate_node([(1, 0), (0, 1)], 'sum'), (1, 1))

    def test_media(self):
        np.testing.assert_array_equal(SurrogateService.aggregate_node([(1, 0), (0, 1)], 'mean'), (0.5, 0.5))

    def test_vazia(self):
        np.testing.assert_array_equal(SurrogateService.aggregate_node([]), (0.0, 0.0))

    def test_modo_desconhecido(self):
        with self.assertRaises(ValueError):
            SurrogateService.aggregate_node([(1, 0)], 'max')


class TestTreino(unittest.TestCase):
    """Treino do modelo de aresta"""

    def _linear(self, n=500):
        x = np.random.default_rng(0).uniform(0.0, 1.0, size=(n, 1))
        return EdgeSampleSet(behavior='', features=x, feature_names=['x'], targets=3.0 * x + 1.0), x

    def test_ajuste_linear(self):
        amostras, x = self._linear()
        cfg = TrainConfig(epochs=300, batch_size=32, learning_rate=1e-2, hidden=(16,), max_samples=0)
        treino = SurrogateService.train_edge_model(amostras, cfg)
        previsto = SurrogateService.predict(treino.net, x)
        self.assertLess(float(np.mean((previsto - (3.0 * x + 1.0)) ** 2)), 1e-2)
        self.assertEqual(treino.n_train + treino.n_val, 500)
        self.assertEqual(treino.n_val, 50)
        self.assertEqual(len(treino.trace), 300)

    def test_mesma_semente_mesmo_historico(self):
        amostras, _ = self._linear(100)
        cfg = TrainConfig(epochs=5, batch_size=16, hidden=(8,))
        a = SurrogateService.train_edge_model(amostras, cfg)
        b = SurrogateService.train_edge_model(amostras, cfg)
        self.assertEqual(a.trace, b.trace)
        for wa, wb in zip(a.net.weights, b.net.weights):
            np.testing.assert_array_equal(wa, wb)

    def test_descarta_alvos_extremos(self):
        amostras, _ = self._linear(100)
        amostras.targets[:3] = 1e4
        treino = SurrogateService.train_edge_model(amostras, TrainConfig(epochs=1, hidden=(4,)))
        self.assertEqual(treino.dropped, 3)

    def test_boids_pela_media(self):
        rng = np.random.default_rng(3)
        features = rng.normal(size=(60, 12))
        grupos = np.repeat(np.arange(20), 3)
        amostras = EdgeSampleSet(
            behavior='boids', features=features, feature_names=[f"c{k}" for k in range(12)],
            groups=grupos, node_targets=rng.normal(size=(20, 2)),
        )
        treino = SurrogateService.train_edge_model(amostras, TrainConfig(epochs=3, hidden=(8,)))
        self.assertEqual(treino.net.aggregation, 'mean')
        self.assertEqual(treino.net.sizes, [12, 8, 2])
        self.assertEqual(treino.n_train + treino.n_val, 20)

    def test_sem_amostras(self):
        vazio = EdgeSampleSet(behavior='hex', features=np.empty((0, 4)), feature_names=list(PAIR_FEATURES),
                              targets=np.empty((0, 2)))
        with self.assertRaises(DatasetError):
            SurrogateService.train_edge_model(vazio, TrainConfig(epochs=1))

    def test_configuracao_invalida(self):
        with self.assertRaises(ConfigError):
            TrainConfig(activation='sigmoid')
        with self.assertRaises(ConfigError):
            TrainConfig(epochs=0)


class TestConsultas(unittest.TestCase):
    """Amostragem, curvas radiais e persistência"""

    def test_square_metades_balanceadas(self):
        rng = np.random.default_rng(0)
        colunas = list(PAIR_FEATURES) + ['edge_attr']
        registro = DatasetService.fit_normalization(
            np.array([[-0.4, -0.4, 0.07, 2.5, 1.0], [0.4, 0.4, 0.4, 14.3, 2.0]]), colunas, 'square'
        )
        net = Mlp.init([5, 4, 2], rng)
        net.normalization = registro
        net.behavior = 'square'
        data = SurrogateService.sample_surrogate(net, 'square', 10000, rng)
        self.assertEqual(int(np.sum(data.groups == 1)), 5000)
        self.assertEqual(int(np.sum(data.groups == 2)), 5000)
        self.assertEqual(data.meta['source'], 'surrogate')

    def test_amostras_fora_do_intervalo_de_treino(self):
        """Pares mais próximos que o menor r de treino são contados como extrapolação"""
        rng = np.random.default_rng(7)
        net = Mlp.init([4, 3, 2], rng)
        net.normalization = DatasetService.fit_normalization(
            np.array([[-0.4, -0.4, 0.09, 2.5], [0.4, 0.4, 0.4, 11.1]]), list(PAIR_FEATURES), 'hex'
        )
        net.behavior = 'hex'
        self.assertEqual(SurrogateService.trained_range(net, 'r'), [0.09, 0.4])

        data = SurrogateService.sample_surrogate(net, 'hex', 2000, rng)
        r = data.features[:, 0]
        self.assertEqual(data.meta['trained_r_range_m'], [0.09, 0.4])
        self.assertEqual(data.meta['extrapolated_rows'], int(np.count_nonzero(r < 0.09)))
        self.assertGreater(data.meta['extrapolated_rows'], 0)

    def test_intervalo_de_treino_sem_coluna_r(self):
        self.assertIsNone(SurrogateService.trained_range(_rede_eixo(), 'r'))
        net = Mlp.init([12, 3, 2], np.random.default_rng(8))
        net.normalization = DatasetService.fit_normalization(
            np.random.default_rng(9).normal(size=(10, 12)), [f"c{k}" for k in range(12)], 'boids'
        )
        self.assertIsNone(SurrogateService.trained_range(net, 'r'))

    def test_comportamento_diferente_do_modelo(self):
        with self.assertRaises(ConfigError):
            SurrogateService.sample_surrogate(_rede_eixo(), 'boids', 10, np.random.default_rng(0))

    def test_curva_radial_e_erro_angular(self):
        r = np.linspace(0.08, 0.2, 7)
        np.testing.assert_allclose(SurrogateService.radial_curve(_rede_eixo(), r), r, rtol=1e-12)
        erros = SurrogateService.angular_errors(_rede_eixo(), r)
        self.assertEqual(erros.shape, (7, 8))
        self.assertLess(float(np.max(erros)), 1e-5)

    def test_mudancas_de_sinal(self):
        raizes = SurrogateService.sign_changes([0.0, 1.0, 2.0, 3.0], [1.0, -1.0, -1.0, 1.0])
        self.assertEqual(raizes, [0.5, 2.5])

    def test_modelo_em_disco(self):
        net = Mlp.init([5, 3, 2], np.random.default_rng(4))
        net.normalization = DatasetService.fit_normalization(
            np.random.default_rng(5).normal(size=(10, 5)), list(PAIR_FEATURES) + ['edge_attr'], 'square'
        )
        net.behavior = 'square'
        net.target_scale = 12.5
        with tempfile.TemporaryDirectory() as pasta:
            caminho = os.path.join(pasta, 'model.txt')
            SurrogateService.save_model(net, caminho)
            lido = SurrogateService.load_model(caminho)
        self.assertEqual(lido.sizes, [5, 3, 2])
        self.assertEqual(lido.behavior, 'square')
        self.assertEqual(lido.target_scale, 12.5)
        x = np.random.default_rng(6).normal(size=(4, 5))
        np.testing.assert_array_equal(SurrogateService.predict(lido, x), SurrogateService.predict(net, x))

    def test_modelo_ausente_ou_invalido(self):
        with tempfile.TemporaryDirectory() as pasta:
            with self.assertRaises(MissingArtifactError):
                SurrogateService.load_model(os.path.join(pasta, 'model.txt'))
            caminho = os.path.join(pasta, 'ruim.txt')
            with open(caminho, 'w') as arquivo:
                arquivo.write('qualquer coisa\n')
            with self.assertRaises(DatasetError):
                SurrogateService.load_model(caminho)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_gradientes_de_redes_aleatorias_5_3_2(seed):
    """Cada peso e viés de uma rede 5-3-2 confere com a diferença finita central"""
    rng = np.random.default_rng(seed)
    net = Mlp.init([5, 3, 2], rng, 'tanh')
    for b in net.biases:
        b[:] = rng.normal(size=b.shape) * 0.1
    x = rng.normal(size=(6, 5))
    t = rng.normal(size=(6, 2))
    _, grads = SurrogateService.backward(net, x, t)
    h = 1e-6
    for p, g in zip(net.parameters(), grads):
        for indice in np.ndindex(p.shape):
            original = p[indice]
            p[indice] = original + h
            mais, _ = SurrogateService.backward(net, x, t)
            p[indice] = original - h
            menos, _ = SurrogateService.backward(net, x, t)
            p[indice] = original
            assert abs(g[indice] - (mais - menos) / (2 * h)) <= 1e-5 + 1e-4 * abs(g[indice])


_mensagens = arrays(
    np.float64, st.tuples(st.integers(min_value=1, max_value=12), st.just(2)),
    elements=st.floats(min_value=-1e3, max_value=1e3, allow_nan=False),
)


@settings(max_examples=50, deadline=None)
@given(mensagens=_mensagens, seed=st.integers(min_value=0, max_value=10 ** 6), modo=st.sampled_from(['sum', 'mean']))
def test_agregacao_invariante_a_permutacao(mensagens, seed, modo):
    permutadas = mensagens[np.random.default_rng(seed).permutation(mensagens.shape[0])]
    np.testing.assert_allclose(
        SurrogateService.aggregate_node(permutadas, modo), SurrogateService.aggregate_node(mensagens, modo),
        rtol=1e-9, atol=1e-9,
    )


@settings(max_examples=50, deadline=None)
@given(a=_mensagens, b=_mensagens)
def test_soma_aditiva_sobre_vizinhancas_disjuntas(a, b):
    """Somar as mensagens de duas vizinhanças = somar os agregados de cada uma"""
    juntas = SurrogateService.aggregate_node(np.vstack([a, b]), 'sum')
    np.testing.assert_allclose(
        juntas, SurrogateService.aggregate_node(a, 'sum') + SurrogateService.aggregate_node(b, 'sum'),
        rtol=1e-9, atol=1e-9,
    )
