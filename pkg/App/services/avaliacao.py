"""
Avaliação e relatórios das expressões encontradas

O MSE recortado (ambas as séries saturadas em [-1, 1]) serve apenas para
comparar métodos; a aptidão da MME usa o MSE bruto.
"""

import logging
import math
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..errors import ConfigError, DatasetError, ExpressionSyntaxError, MissingArtifactError
from .datasets import CSV_OPTIONS, R_RANGE, DatasetService
from .exprtree import ExpressaoService, OpKind
from .mme import ReportEntry
from .surrogate import SurrogateService
from .swarmsim import SimulacaoService

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ['rank', 'expr', 'complexity', 'mse', 'fitness', 'generation']


@dataclass(frozen=True)
class EvalGridSpec:
    r_min: float = R_RANGE[0]
    r_max: float = R_RANGE[1]
    points: int = 331
    on_dataset: bool = False

    def __post_init__(self):
        if not 0.0 < self.r_min < self.r_max:
            raise ConfigError("Grade de avaliação exige 0 < r_min < r_max")
        if self.points < 2:
            raise ConfigError("Grade de avaliação exige ao menos 2 pontos")

    def grid(self):
        return np.linspace(self.r_min, self.r_max, self.points)


class AvaliacaoService:
    """Serviço de avaliação e montagem de relatórios"""

    @staticmethod
    def clipped_mse(expr_values, reference_values):
        """MSE após recortar as duas séries em [-1, 1]; NaN conta como erro máximo"""
        a = np.asarray(expr_values, dtype=float)
        b = np.asarray(reference_values, dtype=float)
        if a.shape != b.shape:
            raise ValueError(f"Séries com tamanhos diferentes: {a.shape} e {b.shape}")
        if a.size == 0:
            raise ValueError("Séries vazias")
        diferenca = np.clip(a, -1.0, 1.0) - np.clip(b, -1.0, 1.0)
        diferenca = np.where(np.isnan(diferenca), 2.0, diferenca)
        return float(np.mean(diferenca ** 2))

    @staticmethod
    def expression_values(entry, features):
        """Valores da expressão por linha (NaN se inválida); matriz N x 1 ou N x 2 por vistas"""
        if not isinstance(features, (list, tuple)):
            features = [features]
        colunas = []
        for vista in features:
            valores, motivos = ExpressaoService.evaluate_batch(entry.expr, entry.params.reshape(1, -1), vista)
            colunas.append(np.full(vista.shape[0], np.nan) if motivos[0] else valores[0])
        return np.column_stack(colunas)

    @staticmethod
    def ground_truth_curve(behavior, r, params, edge_attr=1):
        """Força radial exata em r (hex/square)"""
        a, b = params.coefficients(edge_attr == 1)
        return SimulacaoService.lj_force(np.asarray(r, dtype=float), a, b)

    @staticmethod
    def ground_truth_from_dataset(data, params):
        """Alvo exato para as linhas de um dataset de regressão"""
        behavior = data.meta.get('behavior', params.behavior)
        if behavior == 'boids':
            f = data.features
            unitario = f[:, [8, 9]]
            return params.C * unitario - params.S * unitario * f[:, [6]] + params.A * f[:, [2, 3]]
        r = data.features[:, 0]
        if data.groups is not None:
            kin = data.groups == 1
        else:
            kin = np.full(r.shape, data.meta.get('group', 1) == 1)
        a_kin, b_kin = params.coefficients(True)
        a_non, b_non = params.coefficients(False)
        return SimulacaoService.lj_force(r, np.where(kin, a_kin, a_non), np.where(kin, b_kin, b_non)).reshape(-1, 1)

    @staticmethod
    def evaluate(entries, behavior, params, grid_spec, net=None, data=None, edge_attr=None):
        """
        Tabela de avaliação por expressão

        Na grade (hex/square): MSE recortado contra a lei exata e contra o
        surrogate, MSE bruto contra a lei exata e a raiz recuperada. Com
        `data` (ou boids): as mesmas métricas sobre as linhas do dataset.
        """
        linhas = []
        na_grade = not grid_spec.on_dataset and behavior != 'boids'
        if na_grade:
            r = grid_spec.grid()
            atributo = edge_attr or 1
            verdade = AvaliacaoService.ground_truth_curve(behavior, r, params, atributo).reshape(-1, 1)
            surrogate = None
            if net is not None:
                surrogate = SurrogateService.radial_curve(
                    net, r, atributo if behavior == 'square' else None
                ).reshape(-1, 1)
            vistas = r.reshape(-1, 1)
        else:
            if data is None:
                raise ConfigError("Avaliação sobre o dataset exige o dataset de regressão")
            verdade = AvaliacaoService.ground_truth_from_dataset(data, params)
            surrogate = data.target_matrix() if data.meta.get('source') == 'surrogate' else None
            vistas = data.views()

        for entry in entries:
            valores = AvaliacaoService.expression_values(entry, vistas)
            with np.errstate(all='ignore'):
                bruto = float(np.mean((valores - verdade) ** 2))
            raiz = math.nan
            if na_grade and np.all(np.isfinite(valores)):
                raizes = SurrogateService.sign_changes(r, valores[:, 0])
                raiz = raizes[0] if raizes else math.nan
            linhas.append({
                'rank': entry.rank,
                'expr': entry.text,
                'complexity': entry.complexity,
                'mse': entry.mse,
                'clipped_mse_truth': AvaliacaoService.clipped_mse(valores, verdade),
                'clipped_mse_surrogate': (
                    AvaliacaoService.clipped_mse(valores, surrogate) if surrogate is not None else math.nan
                ),
                'raw_mse_truth': bruto if math.isfinite(bruto) else math.inf,
                'root': raiz,
            })
        logger.info(f"📊 {len(linhas)} expressão(ões) avaliada(s) {'na grade' if na_grade else 'no dataset'}")
        return pd.DataFrame(linhas)

    @staticmethod
    def ranked_table(entries):
        """Ordenação por complexidade e depois MSE"""
        ordenadas = sorted(entries, key=lambda e: (e.complexity, e.mse, e.text))
        return pd.DataFrame([
            {
                'rank': posicao,
                'expr': e.text,
                'complexity': e.complexity,
                'mse': e.mse,
                'fitness': e.fitness,
                'generation': e.generation,
            }
            for posicao, e in enumerate(ordenadas, start=1)
        ], columns=RESULT_COLUMNS)

    @staticmethod
    def force_curves(entries, behavior, params, grid_spec, net=None, top=5, edge_attr=None):
        """Curvas de força prontas para plotar: r, verdade, surrogate e as melhores expressões"""
        if behavior == 'boids':
            return None
        r = grid_spec.grid()
        atributo = edge_attr or 1
        tabela = pd.DataFrame({'r': r})
        tabela['ground_truth'] = AvaliacaoService.ground_truth_curve(behavior, r, params, atributo)
        if net is not None:
            tabela['surrogate'] = SurrogateService.radial_curve(net, r, atributo if behavior == 'square' else None)
        for entry in entries[:top]:
            tabela[f"rank_{entry.rank}"] = AvaliacaoService.expression_values(entry, r.reshape(-1, 1))[:, 0]
        return tabela

    @staticmethod
    def structure_table(entries):
        """Histograma de operadores e variáveis usadas por expressão"""
        linhas = []
        for entry in entries:
            histograma = ExpressaoService.operator_histogram(entry.expr)
            linha = {'rank': entry.rank, 'expr': entry.text, 'nodes': ExpressaoService.node_count(entry.expr)}
            for kind in OpKind:
                linha[kind.value] = histograma[kind.value]
            linha['variables'] = ' '.join(f"x{v}" for v in ExpressaoService.variables_used(entry.expr))
            linhas.append(linha)
        return pd.DataFrame(linhas)

    @staticmethod
    def boids_signatures(entry, n_points=34):
        """
        Verifica os três termos dos boids na componente x da expressão

        Vizinho sobre o eixo +x com velocidade perpendicular: a resposta em r é
        ajustada por c0 + c1/r: coesão puxa para o vizinho (c0 > 0) e separação
        empurra para longe (c1 < 0). O alinhamento é a variação da saída com
        a velocidade do vizinho ao longo de x.
        """
        r = np.linspace(R_RANGE[0], R_RANGE[1], n_points)
        dx = np.column_stack([r, np.zeros_like(r)])
        perpendicular = np.tile([0.0, 0.2], (n_points, 1))
        features, _ = DatasetService.compute_priors_batch(dx, perpendicular)
        resposta = AvaliacaoService.expression_values(entry, features)[:, 0]
        sem_assinatura = {'cohesion': False, 'separation': False, 'alignment': False}
        if not np.all(np.isfinite(resposta)):
            return sem_assinatura

        base = np.column_stack([np.ones_like(r), 1.0 / r])
        coef, *_ = np.linalg.lstsq(base, resposta, rcond=None)
        ajuste = base @ coef
        escala = float(np.sqrt(np.mean(resposta ** 2))) or 1.0
        residuo = float(np.sqrt(np.mean((resposta - ajuste) ** 2))) / escala

        paralela_lenta = np.tile([0.1, 0.0], (n_points, 1))
        paralela_rapida = np.tile([0.3, 0.0], (n_points, 1))
        lenta = AvaliacaoService.expression_values(entry, DatasetService.compute_priors_batch(dx, paralela_lenta)[0])
        rapida = AvaliacaoService.expression_values(entry, DatasetService.compute_priors_batch(dx, paralela_rapida)[0])
        variacao = np.abs(rapida - lenta)
        alinhamento = bool(np.all(np.isfinite(variacao)) and np.median(variacao) > 1e-6 * max(escala, 1.0))

        forma_ok = residuo < 0.1
        return {
            'cohesion': bool(forma_ok and coef[0] > 1e-3 * escala),
            'separation': bool(forma_ok and -coef[1] * np.mean(1.0 / r) > 0.05 * escala),
            'alignment': alinhamento,
        }

    @staticmethod
    def save_results(report, path):
        AvaliacaoService.ranked_table(report.entries).to_csv(path, **CSV_OPTIONS)

    @staticmethod
    def load_results(path, costs):
        """Lê o CSV ranqueado e reconstrói as expressões"""
        if not os.path.exists(path):
            raise MissingArtifactError(path, 'regress')
        tabela = pd.read_csv(path)
        faltando = [c for c in RESULT_COLUMNS if c not in tabela.columns]
        if faltando:
            raise DatasetError(f"Coluna(s) ausente(s): {', '.join(faltando)}", path, 1)
        entries = []
        for linha, registro in enumerate(tabela.itertuples(index=False), start=2):
            try:
                expr, params = ExpressaoService.parse(registro.expr)
            except ExpressionSyntaxError as e:
                raise DatasetError(f"Expressão inválida: {e}", path, linha)
            entries.append(ReportEntry(
                rank=int(registro.rank), expr=expr, params=params, text=registro.expr,
                complexity=ExpressaoService.complexity(expr, costs), mse=float(registro.mse),
                fitness=float(registro.fitness), generation=int(registro.generation),
            ))
        return entries
