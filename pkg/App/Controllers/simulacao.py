import logging
import os

import numpy as np
import pandas as pd

from ..services.datasets import CSV_OPTIONS, DatasetService
from ..services.swarmsim import SimulacaoService
from .base_controller import escrever_metadata, etapa, resultado, stage_dir
from .experimentos import ExperimentoController

logger = logging.getLogger(__name__)


class SimulacaoController:
    """Controller da etapa de simulação (gera as trajetórias de referência)"""

    @staticmethod
    @etapa('simulate')
    def simular(cfg, jobs=1):
        """
        Executa as simulações do comportamento e grava um par de CSVs por execução

        Args:
            cfg (ExperimentConfig): Configuração resolvida
            jobs (int): Execuções em paralelo

        Returns:
            dict: Resultado da operação (diretório, quadros, parâmetros de ordem)
        """
        sim = cfg.simulation
        diretorio = stage_dir(cfg, 'simulation')
        logger.info(f"🔄 Etapa simulate: '{cfg.behavior}' em {diretorio}")

        logs = SimulacaoService.simulate(sim, jobs)
        ordem = []
        for log in logs:
            DatasetService.save_trajectory(log, diretorio)
            ordem.append(SimulacaoController.order_parameters(log))
        pd.DataFrame(ordem).to_csv(os.path.join(diretorio, 'order_parameters.csv'), **CSV_OPTIONS)

        params = sim.params
        metadados = escrever_metadata(diretorio, cfg, 'simulate', {
            'runs': sim.runs,
            'frames_per_run': sim.frames,
            'agent_count': sim.agent_count,
            'degenerate_pairs': int(sum(log.degenerate_pairs for log in logs)),
            'decisions': {
                'force_law': 'a/r^12 - b/r^6',
                'damping': params.damping if params.damping_active else None,
                'max_speed': params.max_speed,
                'min_separation': params.min_separation,
                'integration_dt_s': sim.integration_dt_s,
                'boids_velocity_frame': 'world',
                'lj_root_m': SimulacaoService.lj_root(params.a, params.b),
                'lj_root_kin_m': SimulacaoService.lj_root(*params.coefficients(True)),
            },
        })
        ExperimentoController.registrar_experimento('simulate', cfg, diretorio, metadados)

        logger.info(f"✅ {len(logs)} execução(ões) gravada(s) em {diretorio}")
        return resultado(True, f'{len(logs)} execução(ões) simulada(s)', {
            'directory': diretorio,
            'runs': len(logs),
            'frames_per_run': sim.frames,
        })

    @staticmethod
    def order_parameters(log):
        """Parâmetros de ordem no primeiro e no último quadro de uma execução"""
        linha = {'run': log.run_index}
        for rotulo, k in (('initial', 0), ('final', log.n_frames - 1)):
            linha[f'polarization_{rotulo}'] = SimulacaoService.polarization(log.velocities[k])
            linha[f'median_nn_{rotulo}'] = float(np.median(
                SimulacaoService.nearest_neighbor_distances(log.positions[k])
            ))
            if log.behavior == 'square':
                for relacao in ('kin', 'nonkin'):
                    linha[f'median_nn_{relacao}_{rotulo}'] = float(np.median(
                        SimulacaoService.nearest_neighbor_distances(log.positions[k], log.kin, relacao)
                    ))
        return linha
