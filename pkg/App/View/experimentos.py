from flask import Blueprint, jsonify, request

from ..Controllers.experimentos import ExperimentoController

experimentos_bp = Blueprint('experimentos', __name__)


@experimentos_bp.route('/api/experimentos')
def listar_experimentos():
    """Lista as execuções registradas, com filtros opcionais ?etapa= e ?behavior="""
    result = ExperimentoController.listar_experimentos(
        etapa=request.args.get('etapa'),
        behavior=request.args.get('behavior'),
    )
    return jsonify(result)


@experimentos_bp.route('/api/experimentos/<int:experimento_id>')
def obter_experimento(experimento_id):
    result = ExperimentoController.obter_experimento(experimento_id)
    return jsonify(result), (200 if result['success'] else 404)


@experimentos_bp.route('/api/experimentos/<int:experimento_id>/resultados')
def listar_resultados(experimento_id):
    """Expressões ranqueadas de uma execução de regressão"""
    result = ExperimentoController.listar_resultados(experimento_id)
    return jsonify(result), (200 if result['success'] else 404)
