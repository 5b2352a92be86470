import logging
import os

import pandas as pd

from ..services.avaliacao import AvaliacaoService
from ..services.datasets import CSV_OPTIONS, DatasetService
from ..services.mme import EvolucaoService
from .base_controller import escrever_metadata, etapa, exigir, resultado, stage_dir
from .experimentos import ExperimentoController

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ['generation', 'best_fitness', 'best_mse', 'population', 'recoveries', 'invalid']


class RegressaoController:
    """Controller da regressão simbólica (MME) sobre o dataset amostrado"""

    @staticmethod
    @etapa('regress')
    def regredir(cfg, jobs=1):
        """
        Executa a MME e grava results.csv (ranqueado por complexidade e MSE) e history.csv

        Returns:
            dict: Resultado com a melhor expressão
        """
        caminho = exigir(os.path.join(stage_dir(cfg, 'datasets'), 'dataset.csv'), 'sample-surrogate')
        data = DatasetService.load_dataset(caminho)
        if cfg.group:
            data = data.select_group(cfg.group)
            logger.info(f"📊 Regressão restrita a edge_attr={cfg.group} ({data.n_rows} linhas)")

        relatorio = EvolucaoService.run_mme(data, cfg.mme, jobs)

        diretorio = stage_dir(cfg, 'regression', grupo=True)
        os.makedirs(diretorio, exist_ok=True)
        AvaliacaoService.save_results(relatorio, os.path.join(diretorio, 'results.csv'))
        pd.DataFrame(relatorio.history, columns=HISTORY_COLUMNS).to_csv(
            os.path.join(diretorio, 'history.csv'), **CSV_OPTIONS
        )

        melhor = relatorio.best
        metadados = escrever_metadata(diretorio, cfg, 'regress', {
            'rows': data.n_rows,
            'features': data.feature_names,
            'group': cfg.group,
            'generations_run': relatorio.generations_run,
            'recoveries': relatorio.recoveries,
            'best': {
                'expr': melhor.text,
                'complexity': melhor.complexity,
                'mse': melhor.mse,
                'generation': melhor.generation,
            },
            'decisions': {
                'best_selection': 'min (f_c(complexity), mse)',
                'fitness_accuracy': 'raw mse',
            },
        })
        experimento = ExperimentoController.registrar_experimento('regress', cfg, diretorio, metadados)
        gravados = ExperimentoController.registrar_resultados(experimento, relatorio.entries)
        logger.debug(f"💾 {gravados} resultado(s) no registro")

        return resultado(True, f'Melhor expressão: {melhor.text}', {
            'directory': diretorio,
            'best': melhor.text,
            'best_mse': melhor.mse,
            'entries': len(relatorio.entries),
        })
