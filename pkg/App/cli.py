"""
Comandos de linha de comando do pipeline

    flask --app App simulate --behavior hex --runs 2 --seed 7
    python -m App regress --behavior hex --population 1000 --generations 100

Códigos de saída: 0 sucesso, 2 configuração, 3 artefato ausente, 4 falha numérica.
"""

import functools
import logging

import click
from flask import current_app
from flask.cli import with_appcontext

from .config import load_config
from .errors import SwarmSymregError
from .services.swarmsim import BEHAVIORS


def opcoes_comuns(funcao):
    """--config, --behavior, --seed, --jobs, --out-dir e --verbose em todos os comandos"""
    opcoes = [
        click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
                     help='Arquivo INI do experimento'),
        click.option('--behavior', type=click.Choice(BEHAVIORS), default=None, help='Caso de estudo'),
        click.option('--seed', type=int, default=None, help='Semente mestre'),
        click.option('--jobs', type=int, default=1, show_default=True, help='Trabalhadores em paralelo'),
        click.option('--out-dir', type=click.Path(file_okay=False), default=None, help='Diretório dos artefatos'),
        click.option('--verbose', is_flag=True, help='Log em nível DEBUG'),
    ]
    for opcao in reversed(opcoes):
        funcao = opcao(funcao)
    return funcao


def _executar(contexto, config_path, behavior, seed, out_dir, verbose, secoes, chamada):
    """Resolve a configuração, chama o controller e converte o resultado em código de saída"""
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    secoes = {secao: dict(valores) for secao, valores in secoes.items()}
    secoes.setdefault('experiment', {}).update({'behavior': behavior, 'seed': seed, 'out_dir': out_dir})
    try:
        cfg = load_config(
            config_path, secoes, defaults={'experiment': {'out_dir': current_app.config['OUT_DIR']}}
        )
    except SwarmSymregError as e:
        click.echo(f"Erro: {e.message}", err=True)
        contexto.exit(e.codigo)

    result = chamada(cfg)
    if result['success']:
        click.echo(result['message'])
    else:
        click.echo(f"Erro: {result['message']}", err=True)
    contexto.exit(result['codigo'])


def comando(nome):
    """click.command com contexto da aplicação e opções comuns"""
    def decorador(funcao):
        @click.command(nome, help=funcao.__doc__)
        @opcoes_comuns
        @with_appcontext
        @click.pass_context
        @functools.wraps(funcao)
        def envolvida(*args, **kwargs):
            return funcao(*args, **kwargs)
        return envolvida
    return decorador


@click.option('--runs', type=int, default=None, help='Número de simulações')
@click.option('--agents', 'agent_count', type=int, default=None, help='Agentes por simulação')
@click.option('--duration', 'duration_s', type=float, default=None, help='Duração simulada (s)')
@click.option('--record-hz', type=float, default=None, help='Taxa de gravação (Hz)')
@click.option('--dt', 'integration_dt_s', type=float, default=None, help='Passo de integração (s)')
@click.option('--no-damping', is_flag=True, help='Desliga o amortecimento da formação de padrões')
@comando('simulate')
def simulate(ctx, config_path, behavior, seed, jobs, out_dir, verbose, no_damping, **simulacao):
    """Simula o enxame e grava as trajetórias de referência"""
    from .Controllers.simulacao import SimulacaoController

    if no_damping:
        simulacao['use_damping'] = False
    _executar(ctx, config_path, behavior, seed, out_dir, verbose, {'simulation': simulacao},
              lambda cfg: SimulacaoController.simular(cfg, jobs))


@click.option('--epochs', type=int, default=None, help='Épocas de treino')
@click.option('--batch-size', type=int, default=None, help='Tamanho do mini-lote')
@click.option('--lr', 'learning_rate', type=float, default=None, help='Taxa de aprendizado do Adam')
@click.option('--max-samples', type=int, default=None, help='Limite de amostras de treino (0 = todas)')
@click.option('--hidden', type=str, default=None, help='Camadas ocultas, ex.: "300 300"')
@comando('train-surrogate')
def train_surrogate(ctx, config_path, behavior, seed, jobs, out_dir, verbose, **treino):
    """Treina o modelo de aresta sobre as trajetórias simuladas"""
    from .Controllers.surrogate import SurrogateController

    _executar(ctx, config_path, behavior, seed, out_dir, verbose, {'surrogate': treino},
              lambda cfg: SurrogateController.treinar(cfg, jobs))


@click.option('--n', 'sample_size', type=int, default=None, help='Linhas do dataset')
@click.option('--source', 'sample_source', type=click.Choice(['surrogate', 'ground_truth']), default=None,
              help='Origem dos alvos')
@comando('sample-surrogate')
def sample_surrogate(ctx, config_path, behavior, seed, jobs, out_dir, verbose, **experimento):
    """Gera o dataset de regressão a partir do surrogate (ou da lei exata)"""
    from .Controllers.surrogate import SurrogateController

    _executar(ctx, config_path, behavior, seed, out_dir, verbose, {'experiment': experimento},
              SurrogateController.amostrar)


@click.option('--population', 'population_size', type=int, default=None, help='Tamanho da população macro')
@click.option('--generations', 'max_generations', type=int, default=None, help='Gerações macro')
@click.option('--tau', type=int, default=None, help='Complexidade alvo')
@click.option('--rho', type=float, default=None, help='Peso da penalidade de complexidade')
@click.option('--report-size', type=int, default=None, help='Expressões no resultado')
@click.option('--micro-population', type=int, default=None, help='População da micro evolução')
@click.option('--micro-generations', type=int, default=None, help='Gerações da micro evolução')
@click.option('--group', type=click.IntRange(0, 2), default=None, help='square: 1 = kin, 2 = non-kin')
@comando('regress')
def regress(ctx, config_path, behavior, seed, jobs, out_dir, verbose, group, micro_population,
            micro_generations, **mme):
    """Executa a regressão simbólica MME sobre o dataset"""
    from .Controllers.regressao import RegressaoController

    secoes = {
        'mme': mme,
        'micro': {'micro_population': micro_population, 'micro_generations': micro_generations},
        'experiment': {'group': group},
    }
    _executar(ctx, config_path, behavior, seed, out_dir, verbose, secoes,
              lambda cfg: RegressaoController.regredir(cfg, jobs))


@click.option('--on-dataset', is_flag=True, default=None, help='Avalia nas linhas do dataset em vez da grade')
@click.option('--points', type=int, default=None, help='Pontos da grade de avaliação')
@click.option('--group', type=click.IntRange(0, 2), default=None, help='square: 1 = kin, 2 = non-kin')
@comando('evaluate')
def evaluate(ctx, config_path, behavior, seed, jobs, out_dir, verbose, group, **avaliacao):
    """Compara as expressões com a lei exata e com o surrogate (MSE recortado)"""
    from .Controllers.relatorio import RelatorioController

    avaliacao['on_dataset'] = avaliacao['on_dataset'] or None
    _executar(ctx, config_path, behavior, seed, out_dir, verbose,
              {'evaluation': avaliacao, 'experiment': {'group': group}}, RelatorioController.avaliar)


@click.option('--top', 'top_curves', type=int, default=None, help='Expressões nas curvas de força')
@click.option('--group', type=click.IntRange(0, 2), default=None, help='square: 1 = kin, 2 = non-kin')
@comando('report')
def report(ctx, config_path, behavior, seed, jobs, out_dir, verbose, group, top_curves):
    """Gera as tabelas do relatório (ranking, curvas de força, estrutura)"""
    from .Controllers.relatorio import RelatorioController

    _executar(ctx, config_path, behavior, seed, out_dir, verbose,
              {'experiment': {'group': group}, 'evaluation': {'top_curves': top_curves}},
              RelatorioController.relatorio)


COMANDOS = [simulate, train_surrogate, sample_surrogate, regress, evaluate, report]
