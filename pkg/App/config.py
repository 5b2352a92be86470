"""
Configuração de experimentos

Arquivo INI com as seções [experiment] [simulation] [surrogate] [mme]
[micro] [evaluation]. Chaves desconhecidas ou valores inválidos geram
ConfigError; opções da linha de comando sobrescrevem o arquivo.
"""

import configparser
import dataclasses
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .services.avaliacao import EvalGridSpec
from .services.exprtree import CostTable, OpKind
from .services.mme import MicroConfig, MmeConfig
from .services.surrogate import TrainConfig
from .services.swarmsim import BEHAVIORS, BehaviorParams, SimConfig

logger = logging.getLogger(__name__)

SECTIONS = ('experiment', 'simulation', 'surrogate', 'mme', 'micro', 'evaluation')
SAMPLE_SOURCES = ('surrogate', 'ground_truth')

_SIM_KEYS = {f.name for f in dataclasses.fields(SimConfig)} - {'params', 'rng_seed'}
_PARAM_KEYS = {f.name for f in dataclasses.fields(BehaviorParams)} - {'behavior'}
_TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)} - {'rng_seed'}
_MME_KEYS = ({f.name for f in dataclasses.fields(MmeConfig)} - {'micro', 'rng_seed', 'costs'}) | {
    'pow_with_operator_exponent', *(f"cost_{kind.value}" for kind in OpKind)
}
_MICRO_KEYS = {f.name for f in dataclasses.fields(MicroConfig)}
_EVAL_KEYS = {f.name for f in dataclasses.fields(EvalGridSpec)} | {'top_curves'}
_EXPERIMENT_KEYS = {'behavior', 'seed', 'out_dir', 'sample_size', 'sample_source', 'group'}

ALLOWED_KEYS = {
    'experiment': _EXPERIMENT_KEYS,
    'simulation': _SIM_KEYS | _PARAM_KEYS,
    'surrogate': _TRAIN_KEYS,
    'mme': _MME_KEYS,
    'micro': _MICRO_KEYS,
    'evaluation': _EVAL_KEYS,
}


@dataclass(frozen=True)
class ExperimentConfig:
    behavior: str = 'hex'
    seed: int = 0
    out_dir: str = 'out'
    sample_size: int = 4500
    sample_source: str = 'surrogate'
    group: int = 0                  # square: 0 = todas as classes, 1 = kin, 2 = non-kin
    top_curves: int = 5
    simulation: SimConfig = field(default_factory=SimConfig)
    surrogate: TrainConfig = field(default_factory=TrainConfig)
    mme: MmeConfig = field(default_factory=MmeConfig)
    evaluation: EvalGridSpec = field(default_factory=EvalGridSpec)

    def __post_init__(self):
        if self.behavior not in BEHAVIORS:
            raise ConfigError(f"Comportamento desconhecido: {self.behavior}. Use um de {BEHAVIORS}")
        if self.sample_size < 1:
            raise ConfigError("sample_size deve ser >= 1")
        if self.sample_source not in SAMPLE_SOURCES:
            raise ConfigError(f"sample_source deve ser um de {SAMPLE_SOURCES}")
        if self.group not in (0, 1, 2):
            raise ConfigError("group deve ser 0, 1 ou 2")
        if self.group and self.behavior != 'square':
            raise ConfigError("group só se aplica ao comportamento square")

    def to_dict(self):
        return json.loads(json.dumps(dataclasses.asdict(self), sort_keys=True, default=str))


def config_hash(cfg):
    """SHA-256 do JSON canônico da configuração resolvida (sem o diretório de saída)"""
    dados = cfg.to_dict()
    dados.pop('out_dir', None)
    canonico = json.dumps(dados, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonico.encode('utf-8')).hexdigest()


def _coerce(valor, modelo, secao, chave):
    """Converte `valor` (texto ou já tipado) para o tipo do valor padrão `modelo`"""
    if not isinstance(valor, str):
        return valor
    try:
        if isinstance(modelo, bool):
            normalizado = valor.strip().lower()
            if normalizado not in configparser.ConfigParser.BOOLEAN_STATES:
                raise ValueError(valor)
            return configparser.ConfigParser.BOOLEAN_STATES[normalizado]
        if isinstance(modelo, int):
            return int(valor)
        if isinstance(modelo, float):
            return float(valor)
        if isinstance(modelo, tuple):
            itens = valor.replace(',', ' ').split()
            return tuple(int(i) if i.lstrip('-').isdigit() else i for i in itens)
        return valor.strip()
    except ValueError:
        raise ConfigError(f"Valor inválido para [{secao}] {chave}: '{valor}'")


def _typed(classe, secao, valores, base=None):
    """Aplica `valores` sobre os padrões de `classe` (ou sobre `base`)"""
    base = base if base is not None else classe()
    convertidos = {chave: _coerce(valor, getattr(base, chave), secao, chave) for chave, valor in valores.items()}
    try:
        return dataclasses.replace(base, **convertidos)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Configuração inválida em [{secao}]: {e}")


def read_ini(path):
    """Lê o arquivo INI e devolve {seção: {chave: texto}} validando os nomes"""
    if not os.path.exists(path):
        raise ConfigError(f"Arquivo de configuração não encontrado: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read(path, encoding='utf-8')
    except configparser.Error as e:
        raise ConfigError(f"Arquivo de configuração malformado: {e}")
    secoes = {}
    for secao in parser.sections():
        if secao not in SECTIONS:
            raise ConfigError(f"Seção desconhecida [{secao}] em {path}")
        secoes[secao] = dict(parser.items(secao))
    return secoes


def load_config(path=None, overrides=None, defaults=None):
    """
    Resolve a configuração do experimento

    Args:
        path (str, optional): Arquivo INI
        overrides (dict, optional): {seção: {chave: valor}} vindos da linha de comando
        defaults (dict, optional): Valores abaixo do arquivo (ex.: OUT_DIR da aplicação)

    Returns:
        ExperimentConfig: Configuração validada
    """
    secoes = {secao: dict(valores) for secao, valores in (defaults or {}).items()}
    for secao, valores in (read_ini(path) if path else {}).items():
        secoes.setdefault(secao, {}).update(valores)
    for secao, valores in (overrides or {}).items():
        secoes.setdefault(secao, {}).update({k: v for k, v in valores.items() if v is not None})

    for secao, valores in secoes.items():
        desconhecidas = sorted(set(valores) - ALLOWED_KEYS[secao])
        if desconhecidas:
            raise ConfigError(f"Chave(s) desconhecida(s) em [{secao}]: {', '.join(desconhecidas)}")

    experimento = dict(secoes.get('experiment', {}))
    padrao = ExperimentConfig()
    behavior = _coerce(experimento.get('behavior', padrao.behavior), '', 'experiment', 'behavior')
    seed = _coerce(experimento.get('seed', padrao.seed), 0, 'experiment', 'seed')
    if behavior not in BEHAVIORS:
        raise ConfigError(f"Comportamento desconhecido: {behavior}. Use um de {BEHAVIORS}")

    simulacao = secoes.get('simulation', {})
    params = _typed(
        BehaviorParams, 'simulation', {k: v for k, v in simulacao.items() if k in _PARAM_KEYS},
        BehaviorParams(behavior=behavior),
    )
    try:
        sim_base = SimConfig.for_behavior(behavior, params=params, rng_seed=seed)
    except TypeError as e:
        raise ConfigError(str(e))
    sim = _typed(SimConfig, 'simulation', {k: v for k, v in simulacao.items() if k in _SIM_KEYS}, sim_base)

    treino = _typed(TrainConfig, 'surrogate', secoes.get('surrogate', {}), TrainConfig(rng_seed=seed))
    micro = _typed(MicroConfig, 'micro', secoes.get('micro', {}))

    mme_valores = dict(secoes.get('mme', {}))
    custos = {}
    for kind in OpKind:
        chave = f"cost_{kind.value}"
        if chave in mme_valores:
            custos[kind] = _coerce(mme_valores.pop(chave), 0, 'mme', chave)
    pow_operador = _coerce(mme_valores.pop('pow_with_operator_exponent', 20), 0, 'mme', 'pow_with_operator_exponent')
    try:
        tabela = CostTable(custos, pow_with_operator_exponent=pow_operador)
    except ValueError as e:
        raise ConfigError(f"Custos de operadores inválidos: {e}")
    if 'operators' in mme_valores:
        operadores = _coerce(mme_valores.pop('operators'), (), 'mme', 'operators')
        try:
            mme_valores['operators'] = tuple(OpKind(op) for op in operadores)
        except ValueError as e:
            raise ConfigError(f"Operador desconhecido em [mme] operators: {e}")
    mme = _typed(MmeConfig, 'mme', mme_valores, MmeConfig(costs=tabela, micro=micro, rng_seed=seed))

    avaliacao = dict(secoes.get('evaluation', {}))
    top = _coerce(avaliacao.pop('top_curves', padrao.top_curves), 0, 'evaluation', 'top_curves')
    grade = _typed(EvalGridSpec, 'evaluation', avaliacao)

    restantes = {k: v for k, v in experimento.items() if k not in ('behavior', 'seed')}
    if 'sample_size' not in restantes and behavior != 'hex':
        restantes['sample_size'] = 10000
    cfg = _typed(
        ExperimentConfig, 'experiment', restantes,
        ExperimentConfig(
            behavior=behavior, seed=seed, top_curves=top, simulation=sim,
            surrogate=treino, mme=mme, evaluation=grade,
        ),
    )
    logger.debug(f"⚙️ Configuração resolvida ({config_hash(cfg)[:12]})")
    return cfg
