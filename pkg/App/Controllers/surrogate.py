import logging
import os

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from ..errors import ConfigError
from ..services.datasets import CSV_OPTIONS, R_RANGE, DatasetService
from ..services.surrogate import SurrogateService
from ..services.swarmsim import SimulacaoService
from .base_controller import escrever_metadata, etapa, exigir, ler_metadata, resultado, stage_dir
from .experimentos import ExperimentoController

logger = logging.getLogger(__name__)

MODEL_FILE = 'model.txt'
VALIDATION_RANGE = (0.08, 0.2)


class SurrogateController:
    """Controller do surrogate: treino a partir das trajetórias e amostragem do dataset de regressão"""

    @staticmethod
    def _extrair(diretorio, run, behavior, seed, sensing_range):
        log = DatasetService.load_trajectory(diretorio, run, behavior, seed)
        return DatasetService.extract_pairs(log, sensing_range)

    @staticmethod
    @etapa('train-surrogate')
    def treinar(cfg, jobs=1):
        """
        Treina o modelo de aresta sobre todas as execuções simuladas

        Returns:
            dict: Resultado com diretório, melhor época e validação (hex/square)
        """
        origem = stage_dir(cfg, 'simulation')
        meta_sim = ler_metadata(origem, 'simulate')
        runs = int(meta_sim.get('runs', 0))
        sensing_range = cfg.simulation.params.sensing_range

        logger.info(f"🔄 Etapa train-surrogate: extraindo pares de {runs} execução(ões)")
        conjuntos = Parallel(n_jobs=jobs)(
            delayed(SurrogateController._extrair)(origem, run, cfg.behavior, cfg.seed, sensing_range)
            for run in range(runs)
        )
        amostras = DatasetService.merge_samples(conjuntos)
        logger.info(
            f"📊 {len(amostras)} amostra(s) de aresta ({amostras.skipped} par(es) coincidente(s), "
            f"{amostras.flagged} nó(s) marcado(s))"
        )

        treino = SurrogateService.train_edge_model(amostras, cfg.surrogate)
        net = treino.net

        diretorio = stage_dir(cfg, 'surrogate')
        os.makedirs(diretorio, exist_ok=True)
        SurrogateService.save_model(net, os.path.join(diretorio, MODEL_FILE))
        DatasetService.save_normalization(net.normalization, os.path.join(diretorio, 'normalization.txt'))
        pd.DataFrame(treino.trace, columns=['epoch', 'train_loss', 'val_loss']).to_csv(
            os.path.join(diretorio, 'loss.csv'), **CSV_OPTIONS
        )

        validacao = SurrogateController.validar(net, cfg)
        metadados = escrever_metadata(diretorio, cfg, 'train-surrogate', {
            'samples': len(amostras),
            'dropped_outliers': treino.dropped,
            'coincident_pairs': amostras.skipped,
            'flagged_nodes': amostras.flagged,
            'n_train': treino.n_train,
            'n_val': treino.n_val,
            'best_epoch': treino.best_epoch,
            'layers': net.sizes,
            'aggregation': net.aggregation,
            'target_scale': net.target_scale,
            'trained_r_range_m': SurrogateService.trained_range(net, 'r'),
            'validation': validacao,
            'decisions': {
                'activation': net.activation,
                'boids_fit': 'end-to-end through mean aggregation',
                'input_scaling': 'min-max [0, 1] on training inputs',
            },
        })
        ExperimentoController.registrar_experimento('train-surrogate', cfg, diretorio, metadados)

        return resultado(True, f'Surrogate treinado (melhor época {treino.best_epoch})', {
            'directory': diretorio,
            'best_epoch': treino.best_epoch,
            'validation': validacao,
        })

    @staticmethod
    def validar(net, cfg):
        """Erro angular mediano e raízes da curva radial em [0.08, 0.2] m (hex/square)"""
        if cfg.behavior == 'boids':
            return {}
        r = np.linspace(VALIDATION_RANGE[0], VALIDATION_RANGE[1], 121)
        classes = (1, 2) if cfg.behavior == 'square' else (None,)
        validacao = {}
        for attr in classes:
            rotulo = f"edge_attr_{attr}" if attr else 'pair'
            curva = SurrogateService.radial_curve(net, r, attr)
            validacao[rotulo] = {
                'median_angular_error_deg': float(np.median(SurrogateService.angular_errors(net, r, attr))),
                'roots_m': SurrogateService.sign_changes(r, curva),
            }
        params = cfg.simulation.params
        validacao['true_root_m'] = SimulacaoService.lj_root(params.a, params.b)
        if cfg.behavior == 'square':
            validacao['true_root_kin_m'] = SimulacaoService.lj_root(*params.coefficients(True))
        return validacao

    @staticmethod
    @etapa('sample-surrogate')
    def amostrar(cfg):
        """
        Gera o dataset de regressão consultando o surrogate (ou a lei exata,
        com sample_source = ground_truth)
        """
        rng = np.random.default_rng([cfg.seed, cfg.sample_size])
        if cfg.sample_source == 'surrogate':
            modelo = exigir(os.path.join(stage_dir(cfg, 'surrogate'), MODEL_FILE), 'train-surrogate')
            net = SurrogateService.load_model(modelo)
            if net.behavior and net.behavior != cfg.behavior:
                raise ConfigError(f"Modelo em {modelo} foi treinado para '{net.behavior}'")
            data = SurrogateService.sample_surrogate(net, cfg.behavior, cfg.sample_size, rng)
        else:
            data = DatasetService.sample_ground_truth(cfg.behavior, cfg.sample_size, rng, cfg.simulation.params)

        diretorio = stage_dir(cfg, 'datasets')
        os.makedirs(diretorio, exist_ok=True)
        caminho = os.path.join(diretorio, 'dataset.csv')
        DatasetService.save_dataset(data, caminho)
        metadados = escrever_metadata(diretorio, cfg, 'sample-surrogate', {
            'rows': data.n_rows,
            'source': cfg.sample_source,
            'features': data.feature_names,
            'targets': data.target_names,
            'r_range_m': list(R_RANGE),
            'trained_r_range_m': data.meta.get('trained_r_range_m'),
            'extrapolated_rows': data.meta.get('extrapolated_rows', 0),
        })
        ExperimentoController.registrar_experimento('sample-surrogate', cfg, diretorio, metadados)
        return resultado(True, f'Dataset com {data.n_rows} linha(s)', {'directory': diretorio, 'path': caminho})
