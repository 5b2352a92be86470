import logging
import os

import pandas as pd

from ..services.avaliacao import AvaliacaoService
from ..services.datasets import CSV_OPTIONS, DatasetService
from ..services.surrogate import SurrogateService
from .base_controller import escrever_metadata, etapa, exigir, resultado, stage_dir
from .experimentos import ExperimentoController

logger = logging.getLogger(__name__)

SIGNATURE_TOP = 10


class RelatorioController:
    """Controller de avaliação e relatório das expressões ranqueadas"""

    @staticmethod
    def _carregar(cfg):
        """Resultados da regressão, surrogate (se existir) e dataset (se existir)"""
        resultados = exigir(os.path.join(stage_dir(cfg, 'regression', grupo=True), 'results.csv'), 'regress')
        entries = AvaliacaoService.load_results(resultados, cfg.mme.costs)

        net = None
        modelo = os.path.join(stage_dir(cfg, 'surrogate'), 'model.txt')
        if os.path.exists(modelo):
            net = SurrogateService.load_model(modelo)

        data = None
        caminho = os.path.join(stage_dir(cfg, 'datasets'), 'dataset.csv')
        if os.path.exists(caminho):
            data = DatasetService.load_dataset(caminho)
            if cfg.group:
                data = data.select_group(cfg.group)
        return entries, net, data

    @staticmethod
    @etapa('evaluate')
    def avaliar(cfg):
        """
        Compara as expressões com a lei exata e com o surrogate (MSE recortado em [-1, 1])

        Returns:
            dict: Resultado com o caminho de evaluation.csv
        """
        entries, net, data = RelatorioController._carregar(cfg)
        precisa_dataset = cfg.evaluation.on_dataset or cfg.behavior == 'boids'
        if precisa_dataset and data is None:
            exigir(os.path.join(stage_dir(cfg, 'datasets'), 'dataset.csv'), 'sample-surrogate')

        tabela = AvaliacaoService.evaluate(
            entries, cfg.behavior, cfg.simulation.params, cfg.evaluation, net, data, cfg.group or None
        )
        diretorio = stage_dir(cfg, 'evaluation', grupo=True)
        os.makedirs(diretorio, exist_ok=True)
        caminho = os.path.join(diretorio, 'evaluation.csv')
        tabela.to_csv(caminho, **CSV_OPTIONS)

        metadados = escrever_metadata(diretorio, cfg, 'evaluate', {
            'expressions': len(entries),
            'mode': 'dataset' if precisa_dataset else 'grid',
            'grid_points': cfg.evaluation.points,
            'surrogate_available': net is not None,
            'metric': 'mse after clipping both series to [-1, 1]',
        })
        ExperimentoController.registrar_experimento('evaluate', cfg, diretorio, metadados)
        return resultado(True, f'{len(entries)} expressão(ões) avaliada(s)', {'directory': diretorio, 'path': caminho})

    @staticmethod
    @etapa('report')
    def relatorio(cfg):
        """
        Gera ranked.csv, force_curves.csv (hex/square), structure.csv e,
        para boids, signatures.csv com os três termos nas dez primeiras expressões
        """
        entries, net, _ = RelatorioController._carregar(cfg)
        ordenadas = sorted(entries, key=lambda e: (e.complexity, e.mse, e.text))

        diretorio = stage_dir(cfg, 'report', grupo=True)
        os.makedirs(diretorio, exist_ok=True)
        AvaliacaoService.ranked_table(ordenadas).to_csv(os.path.join(diretorio, 'ranked.csv'), **CSV_OPTIONS)
        AvaliacaoService.structure_table(ordenadas).to_csv(os.path.join(diretorio, 'structure.csv'), **CSV_OPTIONS)
        arquivos = ['ranked.csv', 'structure.csv']

        curvas = AvaliacaoService.force_curves(
            ordenadas, cfg.behavior, cfg.simulation.params, cfg.evaluation, net, cfg.top_curves, cfg.group or None
        )
        if curvas is not None:
            curvas.to_csv(os.path.join(diretorio, 'force_curves.csv'), **CSV_OPTIONS)
            arquivos.append('force_curves.csv')

        completas = 0
        if cfg.behavior == 'boids':
            linhas = []
            for entry in ordenadas[:SIGNATURE_TOP]:
                assinaturas = AvaliacaoService.boids_signatures(entry)
                completas += all(assinaturas.values())
                linhas.append({'rank': entry.rank, 'expr': entry.text, **assinaturas})
            pd.DataFrame(linhas).to_csv(os.path.join(diretorio, 'signatures.csv'), **CSV_OPTIONS)
            arquivos.append('signatures.csv')
            logger.info(f"📊 {completas} expressão(ões) com os três termos dos boids entre as {SIGNATURE_TOP} primeiras")

        metadados = escrever_metadata(diretorio, cfg, 'report', {
            'files': arquivos,
            'expressions': len(ordenadas),
            'sort': 'complexity, mse',
        })
        ExperimentoController.registrar_experimento('report', cfg, diretorio, metadados)
        return resultado(True, f'Relatório gerado em {diretorio}', {'directory': diretorio, 'files': arquivos})
