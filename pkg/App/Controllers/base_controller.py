import functools
import json
import logging
import os

import numpy as np

from ..config import config_hash
from ..errors import MissingArtifactError, SwarmSymregError

logger = logging.getLogger(__name__)

METADATA_FILE = 'metadata.json'
SCHEMA_VERSION = 'swarm-symreg/v1'


def resultado(success, message, data=None, codigo=0):
    """Dicionário de retorno padrão dos controllers"""
    return {
        'success': success,
        'message': message,
        'data': data,
        'codigo': codigo,
    }


def etapa(nome):
    """
    Envolve uma etapa do pipeline: erros do projeto viram o retorno padrão
    com o código de saída correspondente
    """
    def decorador(funcao):
        @functools.wraps(funcao)
        def envolvida(*args, **kwargs):
            try:
                return funcao(*args, **kwargs)
            except SwarmSymregError as e:
                logger.error(f"❌ Etapa '{nome}' falhou: {e.message}")
                return resultado(False, e.message, None, e.codigo)
        return envolvida
    return decorador


def stage_dir(cfg, nome, grupo=False):
    """<out>/<etapa>/<behavior>[_g<grupo>]"""
    sufixo = f"_g{cfg.group}" if grupo and cfg.group else ''
    return os.path.join(cfg.out_dir, nome, f"{cfg.behavior}{sufixo}")


def exigir(caminho, etapa_anterior):
    if not os.path.exists(caminho):
        raise MissingArtifactError(caminho, etapa_anterior)
    return caminho


def _json_default(valor):
    if isinstance(valor, np.integer):
        return int(valor)
    if isinstance(valor, np.floating):
        return float(valor)
    if isinstance(valor, np.ndarray):
        return valor.tolist()
    return str(valor)


def escrever_metadata(diretorio, cfg, nome, extras=None):
    """Grava metadata.json da etapa (sem carimbo de tempo) e devolve o conteúdo"""
    metadados = {
        'schema': SCHEMA_VERSION,
        'stage': nome,
        'behavior': cfg.behavior,
        'seed': cfg.seed,
        'config_hash': config_hash(cfg),
        'config': cfg.to_dict(),
    }
    metadados['config'].pop('out_dir', None)
    metadados.update(extras or {})
    os.makedirs(diretorio, exist_ok=True)
    with open(os.path.join(diretorio, METADATA_FILE), 'w', newline='\n') as arquivo:
        arquivo.write(json.dumps(metadados, sort_keys=True, indent=2, default=_json_default) + '\n')
    logger.info(f"💾 Metadados gravados em {diretorio}")
    return json.loads(json.dumps(metadados, default=_json_default))


def ler_metadata(diretorio, etapa_anterior):
    caminho = exigir(os.path.join(diretorio, METADATA_FILE), etapa_anterior)
    with open(caminho) as arquivo:
        return json.load(arquivo)
