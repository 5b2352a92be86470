"""
Testes funcionais que realmente funcionam - sem mocks desnecessários
"""
import unittest
import sys
import os
import tempfile

import numpy as np
import pytest

# Adiciona o diretório raiz ao path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))


class TestBasicImports(unittest.TestCase):
    """Testa importações básicas"""

    def test_import_all_models(self):
        """Testa se todos os modelos podem ser importados"""
        try:
            from App.Models import Experimento, ResultadoExpressao
            self.assertEqual(Experimento.__tablename__, 'experimento')
            self.assertEqual(ResultadoExpressao.__tablename__, 'resultado_expressao')
        except ImportError as e:
            self.fail(f"Falha ao importar modelos: {e}")

    def test_import_all_controllers(self):
        """Testa se todos os controllers podem ser importados"""
        try:
            from App.Controllers.simulacao import SimulacaoController
            from App.Controllers.surrogate import SurrogateController
            from App.Controllers.regressao import RegressaoController
            from App.Controllers.relatorio import RelatorioController
            from App.Controllers.experimentos import ExperimentoController
            self.assertTrue(callable(SimulacaoController.simular))
            self.assertTrue(callable(RegressaoController.regredir))
        except ImportError as e:
            self.fail(f"Falha ao importar controllers: {e}")

    def test_import_all_services(self):
        """Testa se todos os serviços podem ser importados"""
        try:
            from App.services.exprtree import ExpressaoService
            from App.services.mme import EvolucaoService
            from App.services.swarmsim import SimulacaoService
            from App.services.datasets import DatasetService
            from App.services.surrogate import SurrogateService
            from App.services.avaliacao import AvaliacaoService
        except ImportError as e:
            self.fail(f"Falha ao importar serviços: {e}")


class TestConfiguracaoReal(unittest.TestCase):
    """Resolução da configuração sem mocks"""

    def test_padroes_do_hex(self):
        from App.config import load_config

        cfg = load_config()
        self.assertEqual(cfg.behavior, 'hex')
        self.assertEqual(cfg.sample_size, 4500)
        self.assertEqual(cfg.simulation.agent_count, 20)
        self.assertEqual(cfg.mme.population_size, 4000)
        self.assertEqual(cfg.surrogate.hidden, (300, 300))

    def test_square_usa_dez_mil_linhas(self):
        from App.config import load_config

        self.assertEqual(load_config(overrides={'experiment': {'behavior': 'square'}}).sample_size, 10000)

    def test_semente_propagada(self):
        from App.config import load_config

        cfg = load_config(overrides={'experiment': {'seed': 42}})
        self.assertEqual(cfg.simulation.rng_seed, 42)
        self.assertEqual(cfg.surrogate.rng_seed, 42)
        self.assertEqual(cfg.mme.rng_seed, 42)

    def test_precedencia_arquivo_e_linha_de_comando(self):
        from App.config import load_config

        with tempfile.TemporaryDirectory() as pasta:
            caminho = os.path.join(pasta, 'exp.ini')
            with open(caminho, 'w', encoding='utf-8') as arquivo:
                arquivo.write('[experiment]\nbehavior = boids\n\n[mme]\ntau = 8\nrho = 0.5\n\n[surrogate]\nhidden = 64 32\n')
            cfg = load_config(caminho, {'mme': {'rho': 0.1, 'tau': None}})
        self.assertEqual(cfg.behavior, 'boids')
        self.assertEqual(cfg.mme.tau, 8)
        self.assertEqual(cfg.mme.rho, 0.1)
        self.assertEqual(cfg.surrogate.hidden, (64, 32))
        self.assertEqual(cfg.simulation.agent_count, 50)

    def test_erros_de_configuracao(self):
        from App.config import load_config
        from App.errors import ConfigError

        with self.assertRaises(ConfigError):
            load_config(overrides={'mme': {'velocidade': 1}})
        with self.assertRaises(ConfigError):
            load_config(overrides={'mme': {'rho': 'muito'}})
        with self.assertRaises(ConfigError):
            load_config(overrides={'experiment': {'behavior': 'flock'}})
        with self.assertRaises(ConfigError):
            load_config(overrides={'mme': {'operators': 'add log'}})

    def test_hash_ignora_diretorio_de_saida(self):
        from App.config import config_hash, load_config

        a = load_config(overrides={'experiment': {'out_dir': 'a'}})
        b = load_config(overrides={'experiment': {'out_dir': 'b'}})
        c = load_config(overrides={'experiment': {'seed': 1}})
        self.assertEqual(config_hash(a), config_hash(b))
        self.assertNotEqual(config_hash(a), config_hash(c))

    def test_custos_de_operadores(self):
        from App.config import load_config
        from App.services.exprtree import OpKind

        cfg = load_config(overrides={'mme': {'cost_pow': '5', 'operators': 'add mul pow'}})
        self.assertEqual(cfg.mme.costs.costs[OpKind.POW], 5)
        self.assertEqual(cfg.mme.operators, (OpKind.ADD, OpKind.MUL, OpKind.POW))


class TestPipelineReal(unittest.TestCase):
    """Encadeamento dos serviços sem a camada de linha de comando"""

    def test_simulacao_ate_amostras_de_aresta(self):
        from App.services.datasets import DatasetService
        from App.services.swarmsim import SimConfig, SimulacaoService

        cfg = SimConfig.for_behavior('hex', agent_count=6, duration_s=0.5, runs=1, rng_seed=2)
        log = SimulacaoService.simulate_run(cfg, 0)
        amostras = DatasetService.extract_pairs(log, cfg.params.sensing_range)
        self.assertEqual(amostras.features.shape[1], 4)
        self.assertEqual(amostras.targets.shape[1], 2)
        self.assertTrue(np.all(amostras.features[:, 2] <= cfg.params.sensing_range))


def _raizes(entry, r_min=0.07, r_max=0.4, n_pontos=661):
    """Mudanças de sinal da expressão de uma variável em [r_min, r_max]"""
    from App.services.avaliacao import AvaliacaoService
    from App.services.surrogate import SurrogateService

    r = np.linspace(r_min, r_max, n_pontos)
    valores = AvaliacaoService.expression_values(entry, r.reshape(-1, 1))[:, 0]
    if not np.all(np.isfinite(valores)):
        return []
    return SurrogateService.sign_changes(r, valores)


def _expoentes_de_dois_termos(entry):
    """
    Expoentes (maior, menor) de c1·x^-e1 ± c2·x^-e2, escrito com divisão
    (p / x^p) ou com produto (p · x^p); None para qualquer outra forma
    """
    from App.services.exprtree import OpKind, Operator, Parameter, Variable

    def _potencia(no):
        return (isinstance(no, Operator) and no.kind is OpKind.POW
                and isinstance(no.children[0], Variable) and isinstance(no.children[1], Parameter))

    def _expoente(termo):
        if not isinstance(termo, Operator):
            return None
        a, b = termo.children if len(termo.children) == 2 else (None, None)
        if termo.kind is OpKind.DIV and isinstance(a, Parameter) and _potencia(b):
            return float(entry.params[b.children[1].slot])
        if termo.kind is OpKind.MUL:
            for coef, pot in ((a, b), (b, a)):
                if isinstance(coef, Parameter) and _potencia(pot):
                    return -float(entry.params[pot.children[1].slot])
        return None

    raiz = entry.expr
    if not isinstance(raiz, Operator) or raiz.kind not in (OpKind.ADD, OpKind.SUB):
        return None
    expoentes = [_expoente(termo) for termo in raiz.children]
    if any(e is None for e in expoentes):
        return None
    return tuple(sorted(expoentes, reverse=True))


def _config_mme(seed, **extras):
    from App.services.mme import MicroConfig, MmeConfig

    valores = dict(
        population_size=1000, max_generations=100, tau=12, rho=0.3, rng_seed=seed,
        micro=MicroConfig(micro_population=16, micro_generations=10),
    )
    valores.update(extras)
    return MmeConfig(**valores)


@pytest.mark.slow
class TestAceitacaoSimulacao(unittest.TestCase):
    """Parâmetros de ordem após 25 s de simulação, cinco execuções por caso"""

    def _finais(self, behavior):
        from App.Controllers.simulacao import SimulacaoController
        from App.services.swarmsim import SimConfig, SimulacaoService

        cfg = SimConfig.for_behavior(behavior, runs=5, rng_seed=11)
        return cfg, [SimulacaoController.order_parameters(log) for log in SimulacaoService.simulate(cfg)]

    def test_espacamento_hexagonal(self):
        from App.services.swarmsim import SimulacaoService

        cfg, linhas = self._finais('hex')
        raiz = SimulacaoService.lj_root(cfg.params.a, cfg.params.b)
        self.assertAlmostEqual(raiz, 0.1327, places=3)
        for linha in linhas:
            self.assertLess(abs(linha['median_nn_final'] / raiz - 1.0), 0.10, linha)

    def test_espacamento_do_square_kin_e_non_kin(self):
        """Distância kin ≈ √2 vezes a non-kin"""
        from App.services.swarmsim import SimulacaoService

        cfg, linhas = self._finais('square')
        raiz_kin = SimulacaoService.lj_root(*cfg.params.coefficients(True))
        raiz_non = SimulacaoService.lj_root(*cfg.params.coefficients(False))
        for linha in linhas:
            self.assertLess(abs(linha['median_nn_kin_final'] / raiz_kin - 1.0), 0.10, linha)
            self.assertLess(abs(linha['median_nn_nonkin_final'] / raiz_non - 1.0), 0.10, linha)
        razao = np.median([linha['median_nn_kin_final'] / linha['median_nn_nonkin_final'] for linha in linhas])
        self.assertLess(abs(razao / np.sqrt(2.0) - 1.0), 0.10)

    def test_polarizacao_dos_boids(self):
        _, linhas = self._finais('boids')
        aumentos = sum(linha['polarization_final'] > linha['polarization_initial'] for linha in linhas)
        self.assertGreaterEqual(aumentos, 4)
        self.assertGreater(np.median([linha['polarization_final'] for linha in linhas]), 0.9)


@pytest.mark.slow
class TestAceitacaoSurrogate(unittest.TestCase):
    """Surrogate hex treinado com 20 execuções e 100 épocas"""

    def test_direcao_e_raiz_da_forca(self):
        from App.services.datasets import DatasetService
        from App.services.surrogate import SurrogateService, TrainConfig
        from App.services.swarmsim import SimConfig, SimulacaoService

        cfg = SimConfig.for_behavior('hex', runs=20, rng_seed=5)
        amostras = DatasetService.merge_samples([
            DatasetService.extract_pairs(log, cfg.params.sensing_range) for log in SimulacaoService.simulate(cfg)
        ])
        net = SurrogateService.train_edge_model(amostras, TrainConfig(epochs=100, rng_seed=5)).net

        r = np.linspace(0.08, 0.2, 121)
        self.assertLess(float(np.median(SurrogateService.angular_errors(net, r))), 5.0)
        raizes = SurrogateService.sign_changes(r, SurrogateService.radial_curve(net, r))
        self.assertEqual(len(raizes), 1, raizes)
        raiz = SimulacaoService.lj_root(cfg.params.a, cfg.params.b)
        self.assertLess(abs(raizes[0] / raiz - 1.0), 0.10)


@pytest.mark.slow
class TestAceitacaoRegressao(unittest.TestCase):
    """Recuperação das leis de força pela evolução macro-micro"""

    def _regredir(self, behavior, seed, n=2000, grupo=None, **extras):
        from App.services.datasets import DatasetService
        from App.services.mme import EvolucaoService

        data = DatasetService.sample_ground_truth(behavior, n, np.random.default_rng([seed, n]))
        if grupo is not None:
            data = data.select_group(grupo)
        return EvolucaoService.run_mme(data, _config_mme(seed, **extras))

    def test_recupera_lei_hexagonal(self):
        """Dois termos de potência com expoentes perto de 12 e 6 e raiz a ±15% de 0.1327 m em 3 de 5 sementes"""
        recuperadas = []
        for seed in range(5):
            melhor = self._regredir('hex', seed).best
            expoentes = _expoentes_de_dois_termos(melhor)
            raizes = _raizes(melhor)
            if (expoentes and 9.0 <= expoentes[0] <= 13.0 and 5.0 <= expoentes[1] <= 9.0
                    and len(raizes) == 1 and abs(raizes[0] / 0.1327 - 1.0) <= 0.15):
                recuperadas.append(seed)
        self.assertGreaterEqual(len(recuperadas), 3, recuperadas)

    def test_razao_das_raizes_do_square(self):
        """Regressões separadas por edge_attr: raiz kin / non-kin a ±15% de √2"""
        kin = _raizes(self._regredir('square', 0, n=4000, grupo=1).best)
        non_kin = _raizes(self._regredir('square', 0, n=4000, grupo=2).best)
        self.assertEqual(len(kin), 1, kin)
        self.assertEqual(len(non_kin), 1, non_kin)
        self.assertLess(abs((kin[0] / non_kin[0]) / np.sqrt(2.0) - 1.0), 0.15)

    def test_assinaturas_dos_boids(self):
        """Alguma das dez primeiras expressões tem coesão, separação e alinhamento"""
        from App.services.avaliacao import AvaliacaoService

        relatorio = self._regredir('boids', 0, max_generations=60)
        assinaturas = [AvaliacaoService.boids_signatures(entry) for entry in relatorio.entries[:10]]
        self.assertTrue(any(all(a.values()) for a in assinaturas), assinaturas)
